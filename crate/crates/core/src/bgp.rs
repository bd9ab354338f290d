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
//! Valley-free BGP baseline at AS granularity.
//!
//! Route preference: customer over peer over provider, then shorter AS path,
//! then lower next-hop AS number. Customer-learned routes are exported to
//! everyone, others only to customers.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::endpoint::AsHop;
use crate::exec::Execution;
use crate::ids::{AsId, InterfaceId};
use crate::model::{hop_cidt, CieLookup, ModelError};
use crate::topology::{AsGraph, IntraDomainState, NeighborRole, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnedFrom {
    #[serde(rename = "self")]
    Origin,
    Customer,
    Peer,
    Provider,
}

impl LearnedFrom {
    fn of(role: NeighborRole) -> Self {
        match role {
            NeighborRole::Customer => LearnedFrom::Customer,
            NeighborRole::Peer => LearnedFrom::Peer,
            NeighborRole::Provider => LearnedFrom::Provider,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LearnedFrom::Origin => "self",
            LearnedFrom::Customer => "customer",
            LearnedFrom::Peer => "peer",
            LearnedFrom::Provider => "provider",
        }
    }
}

/// Best route of one AS toward `destination`. `as_path` starts at the next
/// hop and ends at the destination; it is empty for the destination itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub destination: AsId,
    pub as_path: Vec<AsId>,
    pub learned_from: LearnedFrom,
}

impl Route {
    pub fn next_hop(&self) -> Option<AsId> {
        self.as_path.first().copied()
    }

    fn key(&self) -> (LearnedFrom, usize, Option<AsId>) {
        (self.learned_from, self.as_path.len(), self.next_hop())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BgpError {
    #[error("no fixpoint for destination {destination} after {iterations} iterations")]
    NotConverged { destination: AsId, iterations: usize },
    #[error("unknown AS {0}")]
    UnknownAs(AsId),
    #[error("cannot resolve hop {0} -> {1} to interfaces")]
    Unresolvable(AsId, AsId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io: {0}")]
    Io(String),
}

/// One best route per (AS, destination).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoutingTables {
    pub routes: BTreeMap<AsId, BTreeMap<AsId, Route>>,
}

impl RoutingTables {
    pub fn route(&self, from: AsId, destination: AsId) -> Option<&Route> {
        self.routes.get(&from)?.get(&destination)
    }

    /// `as,destination,path,learned_from`, the path being space-separated
    /// ASNs from the holder to the destination.
    pub fn write_csv(&self, out: impl Write) -> Result<(), BgpError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| BgpError::Io(e.to_string());
        w.write_record(["as", "destination", "path", "learned_from"]).map_err(err)?;
        for (a, table) in &self.routes {
            for (d, r) in table {
                let path: Vec<String> = std::iter::once(*a).chain(r.as_path.iter().copied()).map(|x| x.to_string()).collect();
                w.write_record([a.to_string(), d.to_string(), path.join(" "), r.learned_from.as_str().to_string()]).map_err(err)?;
            }
        }
        w.flush().map_err(|e| BgpError::Io(e.to_string()))
    }
}

/// Index-based adjacency for the propagation loops.
struct Adjacency {
    ids: Vec<AsId>,
    /// Per AS: (neighbor index, role the neighbor plays).
    nbrs: Vec<Vec<(usize, NeighborRole)>>,
}

impl Adjacency {
    fn new(graph: &AsGraph) -> Self {
        let ids: Vec<AsId> = graph.ases().collect();
        let index: BTreeMap<AsId, usize> = ids.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let nbrs = ids.iter().map(|a| graph.neighbors(*a).map(|(b, r)| (index[&b], r)).collect()).collect();
        Adjacency { ids, nbrs }
    }
}

#[derive(Clone, PartialEq)]
struct Slot {
    path: Vec<usize>,
    from: LearnedFrom,
}

/// Whether `holder` exports its route (learned via `from`) to a neighbor
/// playing `role` for it.
fn exports(from: LearnedFrom, role: NeighborRole) -> bool {
    matches!(from, LearnedFrom::Origin | LearnedFrom::Customer) || role == NeighborRole::Customer
}

/// Best route of `x` given its neighbors' current routes.
fn best_from(adj: &Adjacency, x: usize, table: &[Option<Slot>]) -> Option<Slot> {
    let mut best: Option<(Slot, (LearnedFrom, usize, AsId))> = None;
    for &(n, role) in &adj.nbrs[x] {
        let Some(r) = &table[n] else { continue };
        // n sees x in the inverse role
        if !exports(r.from, role.inverse()) || r.path.contains(&x) {
            continue;
        }
        let from = LearnedFrom::of(role);
        let key = (from, r.path.len() + 1, adj.ids[n]);
        if best.as_ref().is_none_or(|(_, k)| key < *k) {
            let mut path = Vec::with_capacity(r.path.len() + 1);
            path.push(n);
            path.extend_from_slice(&r.path);
            best = Some((Slot { path, from }, key));
        }
    }
    best.map(|(s, _)| s)
}

fn propagate_one(adj: &Adjacency, d: usize, order_seed: Option<u64>) -> Result<Vec<Option<Slot>>, BgpError> {
    let n = adj.ids.len();
    let mut table: Vec<Option<Slot>> = vec![None; n];
    table[d] = Some(Slot { path: Vec::new(), from: LearnedFrom::Origin });
    let cap = 4 * n.max(1);
    let mut rng = order_seed.map(ChaCha8Rng::seed_from_u64);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cap {
        let changed = match rng.as_mut() {
            None => {
                // synchronous: everyone reads the previous iteration
                let next: Vec<Option<Slot>> = (0..n).map(|x| if x == d { table[d].clone() } else { best_from(adj, x, &table) }).collect();
                let changed = next != table;
                table = next;
                changed
            }
            Some(rng) => {
                // asynchronous: updates are visible immediately, in shuffled order
                order.shuffle(rng);
                let mut changed = false;
                for &x in &order {
                    if x == d {
                        continue;
                    }
                    let r = best_from(adj, x, &table);
                    if r != table[x] {
                        table[x] = r;
                        changed = true;
                    }
                }
                changed
            }
        };
        if !changed {
            return Ok(table);
        }
    }
    Err(BgpError::NotConverged { destination: adj.ids[d], iterations: cap })
}

fn propagate_with(graph: &AsGraph, exec: Execution, order_seed: Option<u64>) -> Result<RoutingTables, BgpError> {
    let adj = Adjacency::new(graph);
    let dests: Vec<usize> = (0..adj.ids.len()).collect();
    let per_dest = exec.try_map(&dests, |&d| propagate_one(&adj, d, order_seed.map(|s| s ^ adj.ids[d].0)))?;
    let mut routes: BTreeMap<AsId, BTreeMap<AsId, Route>> = adj.ids.iter().map(|a| (*a, BTreeMap::new())).collect();
    for (d, table) in per_dest.into_iter().enumerate() {
        let destination = adj.ids[d];
        for (x, slot) in table.into_iter().enumerate() {
            if let Some(s) = slot {
                let route = Route { destination, as_path: s.path.iter().map(|i| adj.ids[*i]).collect(), learned_from: s.from };
                routes.get_mut(&adj.ids[x]).expect("known AS").insert(destination, route);
            }
        }
    }
    Ok(RoutingTables { routes })
}

/// Synchronous iteration to the fixpoint (at most 4·|V| iterations per
/// destination).
pub fn propagate(graph: &AsGraph, exec: Execution) -> Result<RoutingTables, BgpError> {
    propagate_with(graph, exec, None)
}

/// Asynchronous variant: ASes update one at a time in a seeded random order.
pub fn propagate_randomized(graph: &AsGraph, exec: Execution, seed: u64) -> Result<RoutingTables, BgpError> {
    propagate_with(graph, exec, Some(seed))
}

/// Zero or more customer-to-provider steps, at most one peer step, then only
/// provider-to-customer steps.
pub fn is_valley_free(graph: &AsGraph, path: &[AsId]) -> bool {
    let mut descending = false;
    for w in path.windows(2) {
        match graph.role(w[0], w[1]) {
            None => return false,
            Some(NeighborRole::Provider) if descending => return false,
            Some(NeighborRole::Provider) => {}
            Some(NeighborRole::Peer) if descending => return false,
            Some(NeighborRole::Peer | NeighborRole::Customer) => descending = true,
        }
    }
    true
}

/// Interface used to reach `next` from `node`: the lowest-numbered one.
fn egress_toward(topo: &Topology, node: AsId, next: AsId) -> Result<InterfaceId, BgpError> {
    let n = topo.ases.get(&node).ok_or(BgpError::UnknownAs(node))?;
    n.interfaces_to(next).map(|i| i.id).min().ok_or(BgpError::Unresolvable(node, next))
}

/// Interface-level hops of `from`'s route, leaving `from` through `first_egress`
/// (or its lowest interface toward the next hop). Transit ASes use their own
/// next-hop interface.
pub fn resolve(topo: &Topology, from: AsId, route: &Route, first_egress: Option<InterfaceId>) -> Result<Vec<AsHop>, BgpError> {
    let ases: Vec<AsId> = std::iter::once(from).chain(route.as_path.iter().copied()).collect();
    let mut hops = Vec::with_capacity(ases.len());
    let mut ingress = InterfaceId::NONE;
    for (i, &a) in ases.iter().enumerate() {
        let Some(&next) = ases.get(i + 1) else {
            hops.push(AsHop { as_id: a, ingress, egress: InterfaceId::NONE });
            break;
        };
        let egress = match first_egress {
            Some(e) if i == 0 => e,
            _ => egress_toward(topo, a, next)?,
        };
        hops.push(AsHop { as_id: a, ingress, egress });
        ingress = topo.interface(a, egress).ok_or(BgpError::Unresolvable(a, next))?.neighbor_interface;
    }
    Ok(hops)
}

/// Sum of hop CIDTs (g/bit) over the transit ASes of a resolved path.
pub fn bgp_path_cidt(
    hops: &[AsHop],
    states: &BTreeMap<AsId, &IntraDomainState>,
    lookup: &impl CieLookup,
) -> Result<f64, BgpError> {
    let mut total = 0.0;
    for h in hops.iter().skip(1).take(hops.len().saturating_sub(2)) {
        let s = states.get(&h.as_id).ok_or(BgpError::UnknownAs(h.as_id))?;
        let paths = s.paths(h.ingress, h.egress).ok_or(BgpError::Unresolvable(h.as_id, h.as_id))?;
        total += hop_cidt(&paths, lookup)?;
    }
    Ok(total)
}

/// Routes held by the border routers of `source` toward `destination`.
///
/// Each border router prefers the best route learned on its own interfaces
/// and falls back to the AS-wide best route. Duplicates are merged, so the
/// result has at most one entry per border router.
pub fn k_bgp_alternatives(
    topo: &Topology,
    graph: &AsGraph,
    tables: &RoutingTables,
    source: AsId,
    destination: AsId,
) -> Result<Vec<Vec<AsHop>>, BgpError> {
    let node = topo.ases.get(&source).ok_or(BgpError::UnknownAs(source))?;
    let Some(as_best) = tables.route(source, destination) else { return Ok(Vec::new()) };
    if source == destination {
        return Ok(vec![vec![AsHop { as_id: source, ingress: InterfaceId::NONE, egress: InterfaceId::NONE }]]);
    }
    let routers: BTreeSet<u32> = node.interfaces.values().map(|i| i.border_router).collect();
    let mut out: Vec<Vec<AsHop>> = Vec::new();
    for r in routers {
        let mut best: Option<((LearnedFrom, usize, AsId, InterfaceId), Route)> = None;
        for intf in node.interfaces.values().filter(|i| i.border_router == r) {
            let n = intf.neighbor;
            let learned = if n == destination {
                Some(Route { destination, as_path: vec![n], learned_from: LearnedFrom::of(intf.role) })
            } else {
                tables.route(n, destination).and_then(|nr| {
                    let role_at_n = graph.role(n, source)?;
                    if !exports(nr.learned_from, role_at_n) || nr.as_path.contains(&source) {
                        return None;
                    }
                    let mut as_path = vec![n];
                    as_path.extend_from_slice(&nr.as_path);
                    Some(Route { destination, as_path, learned_from: LearnedFrom::of(intf.role) })
                })
            };
            if let Some(route) = learned {
                let (f, len, nh) = route.key();
                let key = (f, len, nh.expect("non-empty"), intf.id);
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((key, route));
                }
            }
        }
        let hops = match best {
            Some(((_, _, _, e), route)) => resolve(topo, source, &route, Some(e))?,
            None => resolve(topo, source, as_best, None)?,
        };
        if !out.contains(&hops) {
            out.push(hops);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Relationship;

    fn graph(links: &[(u64, u64, Relationship)]) -> AsGraph {
        let mut g = AsGraph::new();
        for &(a, b, r) in links {
            g.add_as(AsId(a));
            g.add_as(AsId(b));
            g.add_link(AsId(a), AsId(b), r).unwrap();
        }
        g
    }

    fn path(t: &RoutingTables, a: u64, d: u64) -> Vec<u64> {
        t.route(AsId(a), AsId(d)).unwrap().as_path.iter().map(|x| x.0).collect()
    }

    const P2C: Relationship = Relationship::ProviderToCustomer;
    const P2P: Relationship = Relationship::PeerToPeer;

    #[test]
    fn self_route_is_empty() {
        let t = propagate(&graph(&[(1, 2, P2C)]), Execution::Sequential).unwrap();
        let r = t.route(AsId(1), AsId(1)).unwrap();
        assert!(r.as_path.is_empty());
        assert_eq!(r.learned_from, LearnedFrom::Origin);
    }

    #[test]
    fn chain_follows_providers() {
        // 1 provides for 2, 2 provides for 3
        let t = propagate(&graph(&[(1, 2, P2C), (2, 3, P2C)]), Execution::Sequential).unwrap();
        assert_eq!(path(&t, 3, 1), vec![2, 1]);
        assert_eq!(path(&t, 1, 3), vec![2, 3]);
        assert_eq!(t.route(AsId(3), AsId(1)).unwrap().learned_from, LearnedFrom::Provider);
        assert_eq!(t.route(AsId(1), AsId(3)).unwrap().learned_from, LearnedFrom::Customer);
    }

    #[test]
    fn customer_route_beats_shorter_peer_route() {
        // 1 peers with 4 and also reaches it through its customer 2
        let g = graph(&[(1, 4, P2P), (1, 2, P2C), (2, 4, P2C)]);
        let t = propagate(&g, Execution::Sequential).unwrap();
        assert_eq!(path(&t, 1, 4), vec![2, 4]);
        assert_eq!(t.route(AsId(1), AsId(4)).unwrap().learned_from, LearnedFrom::Customer);
    }

    #[test]
    fn peers_do_not_transit_for_peers() {
        // 1 -- 2 -- 3 all peers: 1 cannot reach 3
        let t = propagate(&graph(&[(1, 2, P2P), (2, 3, P2P)]), Execution::Sequential).unwrap();
        assert!(t.route(AsId(1), AsId(3)).is_none());
        assert_eq!(path(&t, 1, 2), vec![2]);
    }

    #[test]
    fn ties_go_to_the_lower_next_hop() {
        // 9 has two providers 5 and 3, both customers of 1
        let g = graph(&[(1, 5, P2C), (1, 3, P2C), (5, 9, P2C), (3, 9, P2C)]);
        let t = propagate(&g, Execution::Sequential).unwrap();
        assert_eq!(path(&t, 9, 1), vec![3, 1]);
        assert_eq!(path(&t, 1, 9), vec![3, 9]);
    }

    #[test]
    fn valley_free_predicate() {
        let g = graph(&[(1, 2, P2C), (1, 3, P2C), (2, 4, P2C), (3, 5, P2C), (2, 3, P2P)]);
        let ids = |v: &[u64]| v.iter().map(|x| AsId(*x)).collect::<Vec<_>>();
        assert!(is_valley_free(&g, &ids(&[4, 2, 1, 3, 5])));
        assert!(is_valley_free(&g, &ids(&[4, 2, 3, 5])));
        // down then up
        assert!(!is_valley_free(&g, &ids(&[1, 2, 4, 2])));
        assert!(!is_valley_free(&g, &ids(&[2, 1, 3, 2])));
        // peer then up
        assert!(!is_valley_free(&g, &ids(&[2, 3, 1])));
    }

    #[test]
    fn randomized_orders_reach_the_same_fixpoint() {
        let g = graph(&[(1, 2, P2C), (1, 3, P2C), (2, 4, P2C), (3, 4, P2C), (2, 3, P2P), (4, 5, P2C), (3, 5, P2C)]);
        let base = propagate(&g, Execution::Sequential).unwrap();
        for seed in 0..10 {
            assert_eq!(propagate_randomized(&g, Execution::Sequential, seed).unwrap(), base);
        }
    }
}
