// Copyright 2026 The CIRo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//! End-to-end paths assembled from beacons, and their CIDT as read from the
//! carried extensions.
//!
//! Hops are listed in traffic direction. The first and last AS are the
//! endpoints; their internal segments depend on where the hosts sit and are
//! not counted.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::beaconing::Pcb;
use crate::ids::{AsId, InterfaceId, Timestamp, HOURS};
use crate::wire::{current_hour_index, decode_cidt, AsEntry, CidtExtension, CidtWireVector};

/// One AS on a path, entered at `ingress` and left at `egress` in traffic
/// direction. Endpoints use [`InterfaceId::NONE`] on their open side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AsHop {
    pub as_id: AsId,
    pub ingress: InterfaceId,
    pub egress: InterfaceId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Traffic flows from the beacon's origin toward its holder.
    AlongBeacon,
    /// Traffic flows from the holder toward the origin.
    AgainstBeacon,
}

/// A stored beacon used as one piece of a path.
#[derive(Debug, Clone)]
pub struct SegmentUse {
    pub pcb: Arc<Pcb>,
    /// AS holding the beacon and the interface it arrived on.
    pub holder: AsId,
    pub holder_ingress: InterfaceId,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
enum HopData {
    Endpoint,
    Missing,
    /// Vector oriented so that its forward half is the traffic direction.
    Vector { segment: usize, v: CidtWireVector },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EndpointError {
    #[error("no segments")]
    Empty,
    #[error("segments do not join: {0} then {1}")]
    Disjoint(AsId, AsId),
    #[error("no path with available CIDT")]
    NoneAvailable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndToEndPath {
    pub hops: Vec<AsHop>,
    /// Timestamp of each constituent segment.
    pub segment_timestamps: Vec<Timestamp>,
    data: Vec<HopData>,
}

/// One AS as seen within a single segment.
struct Piece<'a> {
    hop: AsHop,
    entry: Option<&'a AsEntry>,
    direction: Direction,
    segment: usize,
}

fn swap_halves(v: &CidtWireVector) -> CidtWireVector {
    let mut out = [0u8; 2 * HOURS];
    out[..HOURS].copy_from_slice(v.backward());
    out[HOURS..].copy_from_slice(v.forward());
    CidtWireVector(out)
}

/// Vector for crossing `entry`'s AS from `ingress` to `egress` in traffic
/// direction, if the entry describes that crossing.
fn oriented(entry: &AsEntry, direction: Direction, ingress: InterfaceId, egress: InterfaceId) -> Option<CidtWireVector> {
    let (key, beacon_egress) = match direction {
        Direction::AlongBeacon => (ingress, egress),
        Direction::AgainstBeacon => (egress, ingress),
    };
    if key.is_none() || beacon_egress != entry.egress {
        return None;
    }
    let v = match entry.extension.as_ref()? {
        CidtExtension::Flat(v) if entry.ingress == key => *v,
        CidtExtension::Flat(_) => return None,
        CidtExtension::Map(m) => *m.get(&key)?,
    };
    Some(match direction {
        Direction::AlongBeacon => v,
        Direction::AgainstBeacon => swap_halves(&v),
    })
}

fn pieces(seg: &SegmentUse, segment: usize) -> Vec<Piece<'_>> {
    let entries = seg.pcb.entries();
    let mut out: Vec<Piece> = entries
        .iter()
        .map(|e| Piece {
            hop: AsHop { as_id: e.as_id, ingress: e.ingress, egress: e.egress },
            entry: Some(*e),
            direction: seg.direction,
            segment,
        })
        .collect();
    out.push(Piece {
        hop: AsHop { as_id: seg.holder, ingress: seg.holder_ingress, egress: InterfaceId::NONE },
        entry: None,
        direction: seg.direction,
        segment,
    });
    if seg.direction == Direction::AgainstBeacon {
        out.reverse();
        for p in &mut out {
            p.hop = AsHop { as_id: p.hop.as_id, ingress: p.hop.egress, egress: p.hop.ingress };
        }
    }
    out
}

impl EndToEndPath {
    /// Joins segments end to end. Consecutive segments must meet at one AS,
    /// which is entered through the first and left through the second.
    pub fn from_segments(segments: &[SegmentUse]) -> Result<Self, EndpointError> {
        if segments.is_empty() {
            return Err(EndpointError::Empty);
        }
        // per AS position: the pieces describing it (two at a join)
        let mut slots: Vec<(AsHop, Vec<Piece>)> = Vec::new();
        for (s, seg) in segments.iter().enumerate() {
            let mut ps = pieces(seg, s).into_iter();
            if let Some((last, group)) = slots.last_mut() {
                let first = ps.next().expect("segment has a holder");
                if first.hop.as_id != last.as_id {
                    return Err(EndpointError::Disjoint(last.as_id, first.hop.as_id));
                }
                last.egress = first.hop.egress;
                group.push(first);
            }
            slots.extend(ps.map(|p| (p.hop, vec![p])));
        }
        let n = slots.len();
        let data = slots
            .iter()
            .enumerate()
            .map(|(i, (hop, group))| {
                if i == 0 || i + 1 == n {
                    return HopData::Endpoint;
                }
                group
                    .iter()
                    .find_map(|p| {
                        let v = oriented(p.entry?, p.direction, hop.ingress, hop.egress)?;
                        Some(HopData::Vector { segment: p.segment, v })
                    })
                    .unwrap_or(HopData::Missing)
            })
            .collect();
        Ok(EndToEndPath {
            hops: slots.into_iter().map(|(h, _)| h).collect(),
            segment_timestamps: segments.iter().map(|s| s.pcb.timestamp).collect(),
            data,
        })
    }

    /// Path from a beacon's holder to its origin.
    pub fn toward_origin(pcb: Arc<Pcb>, holder: AsId, holder_ingress: InterfaceId) -> Self {
        Self::from_segments(&[SegmentUse { pcb, holder, holder_ingress, direction: Direction::AgainstBeacon }])
            .expect("single segment")
    }

    pub fn source(&self) -> AsId {
        self.hops[0].as_id
    }

    pub fn destination(&self) -> AsId {
        self.hops[self.hops.len() - 1].as_id
    }

    pub fn transit_hops(&self) -> usize {
        self.hops.len().saturating_sub(2)
    }

    fn sum(&self, now: Timestamp, half: impl Fn(&CidtWireVector) -> &[u8]) -> Option<f64> {
        let mut total = 0.0;
        for d in &self.data {
            match d {
                HopData::Endpoint => {}
                HopData::Missing => return None,
                HopData::Vector { segment, v } => {
                    let idx = current_hour_index(self.segment_timestamps[*segment], now)?;
                    total += decode_cidt(half(v)[idx]);
                }
            }
        }
        Some(total)
    }
}

/// Current-hour CIDT (g/bit) of traffic along the path, or `None` when a
/// transit hop has no data or a segment is outside its 24-hour window.
pub fn end_to_end_cidt(path: &EndToEndPath, now: Timestamp) -> Option<f64> {
    path.sum(now, CidtWireVector::forward)
}

/// Same as [`end_to_end_cidt`] for traffic in the opposite direction.
pub fn reverse_cidt(path: &EndToEndPath, now: Timestamp) -> Option<f64> {
    path.sum(now, CidtWireVector::backward)
}

/// Lowest CIDT; ties go to fewer hops, then the smaller hop sequence.
pub fn select_greenest(paths: &[EndToEndPath], now: Timestamp) -> Result<&EndToEndPath, EndpointError> {
    paths
        .iter()
        .filter_map(|p| Some((end_to_end_cidt(p, now)?, p)))
        .min_by(|(a, p), (b, q)| a.total_cmp(b).then(p.hops.len().cmp(&q.hops.len())).then_with(|| p.hops.cmp(&q.hops)))
        .map(|(_, p)| p)
        .ok_or(EndpointError::NoneAvailable)
}
