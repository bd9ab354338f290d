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
//! Shared test oracles.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use ciro_core::ids::{AsId, InterfaceId, ZoneId};
use ciro_core::model::{hop_cidt, CieValue};
use ciro_core::topology::{build_intra_state, IntraDomainState, Topology};

pub fn states(t: &Topology) -> Vec<IntraDomainState> {
    t.ases.values().map(|n| build_intra_state(n, &|c| t.zone_of(c)).unwrap()).collect()
}

/// Exact transit CIDT (mg/Gbit) of traffic entering `asn` at `from` and
/// leaving at `to`, straight from the device model.
pub fn exact_hop_mg(cie: &BTreeMap<ZoneId, CieValue>, s: &IntraDomainState, from: InterfaceId, to: InterfaceId) -> f64 {
    hop_cidt(&s.paths(from, to).unwrap(), cie).unwrap() * 1e12
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Best {
    pub mg: f64,
    /// Transit ASes on the path.
    pub transit: usize,
}

/// Shortest-walk tree over (AS, arrival interface) nodes rooted at one origin.
pub struct Oracle {
    pub origin: AsId,
    dist: BTreeMap<(AsId, InterfaceId), (f64, usize)>,
    pred: BTreeMap<(AsId, InterfaceId), (AsId, InterfaceId)>,
}

type HopTable = BTreeMap<(AsId, InterfaceId, InterfaceId), f64>;

/// Dijkstra from `origin` with per-hop transit CIDT as edge weights. The
/// origin and the destination contribute nothing; walks may revisit ASes.
pub fn oracle(t: &Topology, hop: &HopTable, origin: AsId) -> Oracle {
    let mut dist: BTreeMap<(AsId, InterfaceId), (f64, usize)> = BTreeMap::new();
    let mut pred = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    let q = |d: f64| (d * 1e9).round() as u64;
    for intf in t.ases[&origin].interfaces.values() {
        let n = (intf.neighbor, intf.neighbor_interface);
        dist.insert(n, (0.0, 0));
        pred.insert(n, (origin, InterfaceId::NONE));
        heap.push(Reverse((0u64, 0usize, n.0, n.1)));
    }
    while let Some(Reverse((dq, h, x, i))) = heap.pop() {
        let (d, dh) = dist[&(x, i)];
        if (q(d), dh) != (dq, h) || x == origin {
            continue;
        }
        for e in t.ases[&x].interfaces.values() {
            if e.id == i {
                continue;
            }
            let nd = d + hop[&(x, i, e.id)];
            let n = (e.neighbor, e.neighbor_interface);
            let better = match dist.get(&n) {
                None => true,
                Some(&(od, oh)) => (q(nd), h + 1) < (q(od), oh),
            };
            if better {
                dist.insert(n, (nd, h + 1));
                pred.insert(n, (x, i));
                heap.push(Reverse((q(nd), h + 1, n.0, n.1)));
            }
        }
    }
    Oracle { origin, dist, pred }
}

impl Oracle {
    /// Cheapest transit CIDT to every other AS.
    pub fn best(&self) -> BTreeMap<AsId, Best> {
        let mut out: BTreeMap<AsId, Best> = BTreeMap::new();
        for (&(x, _), &(d, h)) in &self.dist {
            if x == self.origin {
                continue;
            }
            let b = out.entry(x).or_insert(Best { mg: d, transit: h });
            if d < b.mg {
                *b = Best { mg: d, transit: h };
            }
        }
        out
    }

    /// ASes along the cheapest walk to `dest`, origin first.
    pub fn walk(&self, dest: AsId) -> Vec<AsId> {
        let end = self
            .dist
            .iter()
            .filter(|((x, _), _)| *x == dest)
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(k, _)| *k)
            .expect("reachable");
        let mut out = vec![end.0];
        let mut cur = end;
        while let Some(&p) = self.pred.get(&cur) {
            out.push(p.0);
            if p.0 == self.origin {
                break;
            }
            cur = p;
        }
        out.reverse();
        out
    }
}

/// Whether a walk visits some AS twice.
pub fn revisits(walk: &[AsId]) -> bool {
    let mut seen = std::collections::BTreeSet::new();
    walk.iter().any(|a| !seen.insert(*a))
}

/// Backward hop costs: traffic toward the beacon origin enters at the
/// beacon's egress and leaves at its ingress.
pub fn hop_table(t: &Topology, states: &[IntraDomainState]) -> HopTable {
    let cie = t.zone_cie();
    let mut out = BTreeMap::new();
    for (s, (asn, node)) in states.iter().zip(&t.ases) {
        for &i in node.interfaces.keys() {
            for &e in node.interfaces.keys() {
                if i != e {
                    out.insert((*asn, i, e), exact_hop_mg(&cie, s, e, i));
                }
            }
        }
    }
    out
}

