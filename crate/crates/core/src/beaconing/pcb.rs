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
//! Persistent beacon chains. Each node shares its prefix with every beacon
//! derived from the same parent.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ids::{AsId, InterfaceId, Timestamp, HOURS};
use crate::wire::{current_hour_index, message_hash, AsEntry, CidtExtension, RoutingMessage, HEADER_LEN, VECTOR_LEN};

/// Which dissemination a beacon belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// Flat mode, or core beaconing in hierarchical mode.
    Core,
    /// Hierarchical mode: from a core AS down the provider-customer tree.
    IntraIsd,
}

#[derive(Debug)]
pub struct Pcb {
    parent: Option<Arc<Pcb>>,
    pub entry: AsEntry,
    pub origin: AsId,
    pub timestamp: Timestamp,
    pub kind: SegmentKind,
    hops: u16,
    transit: u16,
    covered: u16,
    /// Per slot: sum of backward octets over transit entries.
    cum: [u16; HOURS],
    as_bits: [u64; 2],
    /// All ASNs on the path are below 128, so `as_bits` is exact.
    bits_exact: bool,
    digest: u64,
    /// Independent second path hash; together with `digest` it identifies
    /// the path.
    digest2: u64,
    wire_len: usize,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn entry_len(e: &AsEntry) -> usize {
    13 + match &e.extension {
        None => 0,
        Some(CidtExtension::Flat(_)) => VECTOR_LEN,
        Some(CidtExtension::Map(m)) => 2 + m.len() * (2 + VECTOR_LEN),
    }
}

fn with_bit(mut bits: [u64; 2], asn: AsId) -> [u64; 2] {
    bits[(asn.0 / 64 % 2) as usize] |= 1 << (asn.0 % 64);
    bits
}

fn has_bit(bits: [u64; 2], asn: AsId) -> bool {
    bits[(asn.0 / 64 % 2) as usize] & (1 << (asn.0 % 64)) != 0
}

impl Pcb {
    /// A fresh beacon holding only the origin's entry.
    pub fn originate(origin: AsId, egress: InterfaceId, timestamp: Timestamp, kind: SegmentKind, extension: Option<CidtExtension>) -> Arc<Pcb> {
        let entry = AsEntry { as_id: origin, ingress: InterfaceId::NONE, egress, extension };
        let digest = mix(mix(origin.0 ^ ((kind as u64) << 63)) ^ u64::from(egress.0));
        let digest2 = mix(digest ^ 0x5851_f42d_4c95_7f2d);
        Arc::new(Pcb {
            parent: None,
            wire_len: HEADER_LEN + entry_len(&entry),
            entry,
            origin,
            timestamp,
            kind,
            hops: 1,
            transit: 0,
            covered: 0,
            cum: [0; HOURS],
            as_bits: with_bit([0; 2], origin),
            bits_exact: origin.0 < 128,
            digest,
            digest2,
        })
    }

    /// Appends a transit entry.
    pub fn extend(self: &Arc<Self>, entry: AsEntry) -> Arc<Pcb> {
        let mut cum = self.cum;
        let mut covered = self.covered;
        if let Some(v) = entry.segment_vector() {
            covered += 1;
            for (c, o) in cum.iter_mut().zip(v.backward()) {
                *c = c.saturating_add(u16::from(*o));
            }
        }
        let hop = u64::from(entry.ingress.0) << 16 | u64::from(entry.egress.0);
        let digest = mix(self.digest ^ mix(entry.as_id.0) ^ hop);
        let digest2 = mix(self.digest2.rotate_left(17) ^ mix(entry.as_id.0 ^ 0x9e37_79b9_7f4a_7c15).wrapping_add(hop));
        Arc::new(Pcb {
            parent: Some(Arc::clone(self)),
            wire_len: self.wire_len + entry_len(&entry),
            as_bits: with_bit(self.as_bits, entry.as_id),
            bits_exact: self.bits_exact && entry.as_id.0 < 128,
            digest2,
            entry,
            origin: self.origin,
            timestamp: self.timestamp,
            kind: self.kind,
            hops: self.hops + 1,
            transit: self.transit + 1,
            covered,
            cum,
            digest,
        })
    }

    pub fn hops(&self) -> usize {
        usize::from(self.hops)
    }

    /// Fraction of transit entries carrying an extension; 1 when there are
    /// no transit entries.
    pub fn coverage(&self) -> f64 {
        if self.transit == 0 { 1.0 } else { f64::from(self.covered) / f64::from(self.transit) }
    }

    pub fn transit_hops(&self) -> usize {
        usize::from(self.transit)
    }

    pub fn covered_hops(&self) -> usize {
        usize::from(self.covered)
    }

    /// Entries from the origin onwards.
    pub fn entries(&self) -> Vec<&AsEntry> {
        let mut out = Vec::with_capacity(self.hops());
        let mut node = Some(self);
        while let Some(n) = node {
            out.push(&n.entry);
            node = n.parent.as_deref();
        }
        out.reverse();
        out
    }

    pub fn message(&self) -> RoutingMessage {
        RoutingMessage { origin_as: self.origin, timestamp: self.timestamp, entries: self.entries().into_iter().cloned().collect() }
    }

    pub fn wire_len(&self) -> usize {
        self.wire_len
    }

    pub fn contains_as(&self, asn: AsId) -> bool {
        if !has_bit(self.as_bits, asn) {
            return false;
        }
        if self.bits_exact && asn.0 < 128 {
            return true;
        }
        let mut node = Some(self);
        while let Some(n) = node {
            if n.entry.as_id == asn {
                return true;
            }
            node = n.parent.as_deref();
        }
        false
    }

    /// Hash of the interface-level path (not timestamps or extensions).
    pub fn path_digest(&self) -> u64 {
        self.digest
    }

    /// Same interface-level path, judged by two independent 64-bit path
    /// hashes, the hop count and the last entry.
    pub fn same_path(&self, other: &Pcb) -> bool {
        let (x, y) = (&self.entry, &other.entry);
        self.digest == other.digest
            && self.digest2 == other.digest2
            && self.hops == other.hops
            && self.kind == other.kind
            && x.as_id == y.as_id
            && x.ingress == y.ingress
            && x.egress == y.egress
    }

    /// Hash of the serialized message.
    pub fn hash(&self) -> u64 {
        message_hash(&self.message())
    }

    /// Current-hour CIDT toward the origin in mg/Gbit (sum of backward
    /// octets), or `None` once the window has expired.
    pub fn cost_mg(&self, now: Timestamp) -> Option<u32> {
        current_hour_index(self.timestamp, now).map(|i| u32::from(self.cum[i]))
    }

    pub fn cost_at_index(&self, idx: usize) -> u32 {
        u32::from(self.cum[idx])
    }

    pub fn ases(&self) -> Vec<AsId> {
        self.entries().iter().map(|e| e.as_id).collect()
    }
}
