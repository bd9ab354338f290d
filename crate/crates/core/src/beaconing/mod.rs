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
//! Round-based beacon dissemination with CIDT extensions and green-path
//! retention.

mod pcb;
mod sim;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::ids::{AsId, InterfaceId, Timestamp};
use crate::topology::{AsNode, NeighborRole};

pub use pcb::{Pcb, SegmentKind};
pub use sim::{write_transcript_csv, RoundReport, RunSummary, Simulation, TranscriptRow};

pub const MIN_PERIOD_HOURS: f64 = 1.0;
pub const MAX_PERIOD_HOURS: f64 = 2.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Flat,
    Hierarchical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimize {
    #[default]
    Green,
    None,
}

/// Which neighbors a beacon may be passed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportPolicy {
    /// Beacons learned from a customer (or originated) go to every neighbor,
    /// all others only to customers.
    #[default]
    ValleyFree,
    /// Every neighbor not already on the path.
    Flood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisseminationConfig {
    pub period_hours: f64,
    /// Per-AS periods are drawn from `[period_hours, period_hours + spread]`.
    pub period_spread_hours: f64,
    /// Random per-AS phase within the first period.
    pub staggered: bool,
    pub retention_n: usize,
    pub mode: Mode,
    pub optimize: Optimize,
    pub export: ExportPolicy,
    pub max_path_hops: usize,
    pub max_rounds: usize,
    pub start_time: Timestamp,
    /// Fraction of ASes running the forecasting module.
    pub participation: f64,
    pub seed: u64,
    /// Originating ASes; all when unset.
    pub origins: Option<Vec<AsId>>,
    pub record_transcript: bool,
}

impl Default for DisseminationConfig {
    fn default() -> Self {
        DisseminationConfig {
            period_hours: 1.0,
            period_spread_hours: 0.0,
            staggered: false,
            retention_n: 5,
            mode: Mode::Flat,
            optimize: Optimize::Green,
            export: ExportPolicy::ValleyFree,
            max_path_hops: 10,
            max_rounds: 64,
            start_time: 0,
            participation: 1.0,
            seed: 1,
            origins: None,
            record_transcript: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeaconError {
    #[error("invalid dissemination config: {0}")]
    Config(String),
    #[error("hierarchical mode needs at least one core AS")]
    NoCore,
    #[error("intra-domain state missing or out of order for {0}")]
    State(AsId),
}

impl DisseminationConfig {
    pub fn validate(&self) -> Result<(), BeaconError> {
        let bad = |m: String| Err(BeaconError::Config(m));
        let hi = self.period_hours + self.period_spread_hours;
        if !(self.period_hours >= MIN_PERIOD_HOURS && hi <= MAX_PERIOD_HOURS) || self.period_spread_hours < 0.0 {
            return bad(format!("periods must lie in [{MIN_PERIOD_HOURS}, {MAX_PERIOD_HOURS}] h, got {}..{hi}", self.period_hours));
        }
        if self.retention_n == 0 {
            return bad("retention_n must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.participation) {
            return bad(format!("participation {} outside [0, 1]", self.participation));
        }
        if self.max_path_hops < 2 {
            return bad("max_path_hops must be at least 2".into());
        }
        Ok(())
    }
}

pub(crate) fn hours_to_secs(h: f64) -> u64 {
    (h * 3600.0).round().max(1.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeriodCheck {
    Ok,
    BelowFloor,
    /// Above `bound` hours (the smaller of 2.6 and 24/(hops-1)).
    AboveBound { bound: f64 },
}

/// Checks a dissemination period against the hourly floor and the bound that
/// keeps a beacon's 24-hour window alive along `max_path_hops` ASes.
pub fn validate_period(period_hours: f64, max_path_hops: usize) -> PeriodCheck {
    debug_assert!(max_path_hops >= 2);
    let bound = MAX_PERIOD_HOURS.min(24.0 / (max_path_hops.max(2) - 1) as f64);
    if !(period_hours >= MIN_PERIOD_HOURS) {
        PeriodCheck::BelowFloor
    } else if period_hours > bound {
        PeriodCheck::AboveBound { bound }
    } else {
        PeriodCheck::Ok
    }
}

/// A received beacon with its receipt metadata.
#[derive(Debug, Clone)]
pub struct Beacon {
    pub pcb: Arc<Pcb>,
    /// Local interface the beacon arrived on.
    pub ingress: InterfaceId,
    pub received_at: Timestamp,
}

/// Received beacons of one AS, grouped by (kind, origin).
#[derive(Debug, Clone, Default)]
pub struct BeaconStore {
    groups: BTreeMap<(SegmentKind, AsId), Vec<Beacon>>,
}

impl BeaconStore {
    pub fn get(&self, kind: SegmentKind, origin: AsId) -> &[Beacon] {
        self.groups.get(&(kind, origin)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn groups(&self) -> impl Iterator<Item = ((SegmentKind, AsId), &[Beacon])> + '_ {
        self.groups.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.values().all(Vec::is_empty)
    }

    /// Adds beacons, keeping only the newest copy of each path, then trims
    /// every touched group to `capacity` by the ranking of `optimize`.
    pub fn insert_all(&mut self, mut beacons: Vec<Beacon>, capacity: usize, optimize: Optimize, now: Timestamp) {
        beacons.sort_by_key(|b| (b.pcb.kind, b.pcb.origin));
        let mut seen: FxHashMap<(u64, InterfaceId), usize> = FxHashMap::default();
        let mut incoming = beacons.into_iter().peekable();
        while let Some(first) = incoming.next() {
            let key = (first.pcb.kind, first.pcb.origin);
            let group = self.groups.entry(key).or_default();
            seen.clear();
            for (i, o) in group.iter().enumerate() {
                seen.entry((o.pcb.path_digest(), o.ingress)).or_insert(i);
            }
            let mut next = Some(first);
            while let Some(b) = next {
                let id = (b.pcb.path_digest(), b.ingress);
                let hit = match seen.get(&id) {
                    Some(&i) if group[i].pcb.same_path(&b.pcb) => Some(i),
                    Some(_) => group.iter().position(|o| o.ingress == b.ingress && o.pcb.same_path(&b.pcb)),
                    None => None,
                };
                match hit {
                    Some(i) => {
                        if b.pcb.timestamp > group[i].pcb.timestamp {
                            group[i] = b;
                        }
                    }
                    None => {
                        seen.entry(id).or_insert(group.len());
                        group.push(b);
                    }
                }
                next = incoming.next_if(|b| (b.pcb.kind, b.pcb.origin) == key);
            }
            if group.len() > capacity {
                rank_store(group, optimize, now);
                group.truncate(capacity);
            }
        }
    }

    /// Drops beacons whose forecast window has run out.
    pub fn evict_expired(&mut self, now: Timestamp) {
        for g in self.groups.values_mut() {
            g.retain(|b| b.pcb.cost_mg(now).is_some());
        }
        self.groups.retain(|_, g| !g.is_empty());
    }

    /// Order-independent digest of the stored paths.
    pub fn path_digest(&self) -> u64 {
        self.groups.values().flatten().fold(0u64, |acc, b| acc.wrapping_add(b.pcb.path_digest() ^ u64::from(b.ingress.0)))
    }
}

fn rank_store(group: &mut [Beacon], optimize: Optimize, now: Timestamp) {
    match optimize {
        Optimize::Green => group.sort_by_cached_key(|b| (b.pcb.cost_mg(now).unwrap_or(u32::MAX), b.pcb.hops(), b.pcb.path_digest())),
        Optimize::None => group.sort_by(|a, b| {
            b.pcb
                .coverage()
                .total_cmp(&a.pcb.coverage())
                .then(b.pcb.timestamp.cmp(&a.pcb.timestamp))
                .then(a.pcb.path_digest().cmp(&b.pcb.path_digest()))
        }),
    }
}

/// Candidates for one origin ordered by extension coverage (descending),
/// timestamp (descending) and serialized-message hash.
pub fn select_pcbs(store: &BeaconStore, kind: SegmentKind, origin: AsId) -> Vec<&Beacon> {
    let mut out: Vec<&Beacon> = store.get(kind, origin).iter().collect();
    // coverage is non-negative, so its bit pattern orders like the value
    out.sort_by_cached_key(|b| (Reverse(b.pcb.coverage().to_bits()), Reverse(b.pcb.timestamp), b.pcb.hash()));
    out
}

/// Ranking inputs of one green-retention candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetainKey {
    /// Current-hour end-to-end CIDT in mg/Gbit; `None` when expired.
    pub cost_mg: Option<u32>,
    pub hops: usize,
    /// Hash of the interface-level path, stable across re-originations.
    pub hash: u64,
}

/// Indices of the `n` lowest-CIDT candidates, ties broken by hop count then
/// hash.
pub fn green_retain(candidates: &[RetainKey], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    idx.sort_by_key(|&i| {
        let k = &candidates[i];
        (k.cost_mg.map_or(u64::MAX, u64::from), k.hops, k.hash)
    });
    idx.truncate(n);
    idx
}

/// Position of an AS in hierarchical dissemination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeaconRole {
    CoreBeacon,
    IntraIsdOrigin,
    IntraIsdPropagate,
}

/// Interfaces whose segment to `egress` an AS describes in its map
/// extension.
pub fn relevant_interfaces(
    node: &AsNode,
    role: BeaconRole,
    ingress: InterfaceId,
    egress: InterfaceId,
    is_core: impl Fn(AsId) -> bool,
) -> BTreeSet<InterfaceId> {
    let mut out = BTreeSet::new();
    match role {
        BeaconRole::CoreBeacon => {
            out.insert(ingress);
        }
        BeaconRole::IntraIsdOrigin => {
            for i in node.interfaces.values() {
                if i.id != egress && (is_core(i.neighbor) || i.role == NeighborRole::Peer) {
                    out.insert(i.id);
                }
            }
        }
        BeaconRole::IntraIsdPropagate => {
            out.insert(ingress);
            for i in node.interfaces.values() {
                let smaller_customer = i.role == NeighborRole::Customer && i.id < egress;
                if i.id != egress && (smaller_customer || i.role == NeighborRole::Peer) {
                    out.insert(i.id);
                }
            }
        }
    }
    out.remove(&InterfaceId::NONE);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Site;
    use crate::topology::{GeoCoord, Interface};
    use crate::ids::ZoneId;

    #[test]
    fn period_bounds() {
        assert_eq!(validate_period(2.6, 10), PeriodCheck::Ok);
        assert_eq!(validate_period(0.5, 10), PeriodCheck::BelowFloor);
        match validate_period(2.0, 20) {
            PeriodCheck::AboveBound { bound } => assert!((bound - 24.0 / 19.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(validate_period(1.0, 25), PeriodCheck::Ok);
        assert!(matches!(validate_period(2.7, 2), PeriodCheck::AboveBound { .. }));
    }

    #[test]
    fn config_validation() {
        assert!(DisseminationConfig::default().validate().is_ok());
        let c = DisseminationConfig { period_hours: 2.0, period_spread_hours: 0.7, ..Default::default() };
        assert!(c.validate().is_err());
        let c = DisseminationConfig { retention_n: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn retain_examples() {
        let k = |c: u32, h: usize, hash: u64| RetainKey { cost_mg: Some(c), hops: h, hash };
        assert_eq!(green_retain(&[k(5, 2, 0), k(3, 2, 1)], 1), vec![1]);
        assert_eq!(green_retain(&[k(4, 4, 0), k(4, 3, 1)], 1), vec![1]);
        assert_eq!(green_retain(&[k(4, 3, 9), k(4, 3, 2)], 1), vec![1]);
        let mut all = green_retain(&[k(4, 3, 9), k(1, 3, 2), k(7, 1, 0)], 5);
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
        let expired = RetainKey { cost_mg: None, hops: 1, hash: 0 };
        assert_eq!(green_retain(&[expired, k(250, 9, 5)], 1), vec![1]);
    }

    fn node_with(ifs: &[(u16, u64, NeighborRole)]) -> AsNode {
        let site = Site { coord: GeoCoord::new(0.0, 0.0).unwrap(), zone: ZoneId(0) };
        AsNode {
            id: AsId(1),
            core: false,
            routers: vec![crate::topology::Router { id: 0, site }],
            router_links: vec![],
            interfaces: ifs
                .iter()
                .map(|&(id, nb, role)| {
                    let i = Interface {
                        id: InterfaceId(id),
                        neighbor: AsId(nb),
                        neighbor_interface: InterfaceId(1),
                        role,
                        site,
                        border_router: 0,
                    };
                    (i.id, i)
                })
                .collect(),
        }
    }

    #[test]
    fn relevant_interface_rules() {
        use NeighborRole::*;
        let n = node_with(&[(1, 10, Provider), (2, 20, Customer), (5, 50, Customer), (9, 90, Customer)]);
        let set = |v: &[u16]| v.iter().map(|i| InterfaceId(*i)).collect::<BTreeSet<_>>();
        let no_core = |_: AsId| false;
        assert_eq!(relevant_interfaces(&n, BeaconRole::CoreBeacon, InterfaceId(1), InterfaceId(5), no_core), set(&[1]));
        assert_eq!(relevant_interfaces(&n, BeaconRole::IntraIsdPropagate, InterfaceId(1), InterfaceId(5), no_core), set(&[1, 2]));
        assert_eq!(relevant_interfaces(&n, BeaconRole::IntraIsdPropagate, InterfaceId(1), InterfaceId(2), no_core), set(&[1]));
        let p = node_with(&[(1, 10, Provider), (3, 30, Peer), (4, 40, Customer), (7, 70, Customer)]);
        assert_eq!(relevant_interfaces(&p, BeaconRole::IntraIsdPropagate, InterfaceId(1), InterfaceId(7), no_core), set(&[1, 3, 4]));
        let c = node_with(&[(1, 10, Peer), (2, 11, Peer), (3, 30, Peer), (4, 40, Customer)]);
        let core = |a: AsId| a.0 == 10 || a.0 == 11;
        assert_eq!(relevant_interfaces(&c, BeaconRole::IntraIsdOrigin, InterfaceId::NONE, InterfaceId(4), core), set(&[1, 2, 3]));
    }

    fn beacon(asn: u64, ts: Timestamp, ext: Option<u8>, transit: usize) -> Beacon {
        use crate::wire::{AsEntry, CidtExtension, CidtWireVector};
        let mut p = Pcb::originate(AsId(asn), InterfaceId(1), ts, SegmentKind::Core, None);
        for t in 0..transit {
            let extension = ext.map(|o| CidtExtension::Flat(CidtWireVector([o; 48])));
            let extension = if t == 0 { extension } else { None };
            p = p.extend(AsEntry { as_id: AsId(100 + t as u64), ingress: InterfaceId(1), egress: InterfaceId(2), extension });
        }
        Beacon { pcb: p, ingress: InterfaceId(3), received_at: ts }
    }

    #[test]
    fn selection_order() {
        let mut s = BeaconStore::default();
        assert!(select_pcbs(&s, SegmentKind::Core, AsId(1)).is_empty());
        let full_old = beacon(1, 0, Some(1), 1);
        let half_new = beacon(1, 3600, Some(1), 2);
        s.insert_all(vec![half_new.clone(), full_old.clone()], 10, Optimize::None, 3600);
        let got = select_pcbs(&s, SegmentKind::Core, AsId(1));
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].pcb.timestamp, 0);
        assert_eq!(got[0].pcb.coverage(), 1.0);

        let mut s = BeaconStore::default();
        let older = beacon(1, 0, Some(1), 1);
        let newer = {
            let mut b = beacon(1, 7200, Some(1), 1);
            b.ingress = InterfaceId(4);
            b
        };
        s.insert_all(vec![older, newer], 10, Optimize::None, 7200);
        assert_eq!(select_pcbs(&s, SegmentKind::Core, AsId(1))[0].pcb.timestamp, 7200);
    }

    #[test]
    fn store_dedups_and_bounds() {
        let mut s = BeaconStore::default();
        s.insert_all(vec![beacon(1, 0, Some(2), 1)], 2, Optimize::Green, 0);
        s.insert_all(vec![beacon(1, 3600, Some(2), 1)], 2, Optimize::Green, 3600);
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(SegmentKind::Core, AsId(1))[0].pcb.timestamp, 3600);
        s.insert_all(vec![beacon(1, 3600, Some(9), 2), beacon(1, 3600, Some(1), 3)], 2, Optimize::Green, 3600);
        assert_eq!(s.len(), 2);
        let costs: Vec<u32> = s.get(SegmentKind::Core, AsId(1)).iter().map(|b| b.pcb.cost_mg(3600).unwrap()).collect();
        assert_eq!(costs, vec![1, 2]);
        s.evict_expired(3600 * 30);
        assert!(s.is_empty());
    }
}
