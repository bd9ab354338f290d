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
//! Router-level and device-level intra-domain paths.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::ids::{AsId, InterfaceId, ZoneId};
use crate::model::{path_cidt, Device, DeviceKind, IntraDomainPath, ModelError, Site};

use super::geo::{great_circle_km, GeoCoord};
use super::{AsNode, Router};

/// Edge weights below this are raised to it so that co-located routers still
/// yield strictly positive link weights.
const MIN_LINK_KM: f64 = 1e-3;

const AMPLIFIER_SPACING_KM: f64 = 80.0;
const REGENERATOR_SPACING_KM: f64 = 1500.0;

/// Picks a border router for every interface: the closest router already
/// connected to the interface's neighbor (ties to the lowest index), or a new
/// router placed at the interface. New routers are appended to `routers`.
///
/// `interfaces` lists `(id, neighbor, location)`; `connected` lists, per router
/// index, the neighbor ASes it links to.
pub fn map_border_routers(
    routers: &mut Vec<Router>,
    interfaces: &[(InterfaceId, AsId, Site)],
    connected: &BTreeMap<u32, BTreeSet<AsId>>,
) -> BTreeMap<InterfaceId, u32> {
    let mut out = BTreeMap::new();
    for (intf, neighbor, site) in interfaces {
        let mut best: Option<(f64, u32)> = None;
        for (idx, nbrs) in connected {
            if !nbrs.contains(neighbor) || *idx as usize >= routers.len() {
                continue;
            }
            let d = great_circle_km(&routers[*idx as usize].site.coord, &site.coord);
            if best.is_none_or(|(bd, bi)| d < bd || (d == bd && *idx < bi)) {
                best = Some((d, *idx));
            }
        }
        let chosen = match best {
            Some((_, idx)) => idx,
            None => {
                let idx = routers.len() as u32;
                routers.push(Router { id: idx, site: *site });
                idx
            }
        };
        out.insert(*intf, chosen);
    }
    out
}

/// A shortest router path with its length.
#[derive(Debug, Clone, PartialEq)]
pub struct RouterPath {
    pub routers: Vec<u32>,
    pub km: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, u32);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn adjacency(n: usize, edges: &[(u32, u32, f64)]) -> Vec<Vec<(u32, f64)>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        if a == b {
            continue;
        }
        adj[a as usize].push((b, w));
        adj[b as usize].push((a, w));
    }
    for list in &mut adj {
        list.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        list.dedup_by_key(|e| e.0);
    }
    adj
}

fn dijkstra(adj: &[Vec<(u32, f64)>], src: u32) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[src as usize] = 0.0;
    heap.push(Entry(0.0, src));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u as usize] {
            continue;
        }
        for &(v, w) in &adj[u as usize] {
            let nd = d + w;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist
}

fn on_shortest(total: f64, candidate: f64) -> bool {
    candidate <= total + 1e-9 * total.max(1.0)
}

/// Shortest router paths between every pair of `endpoints`, by great-circle
/// km over `links`. Among equally short paths the lexicographically smallest
/// router sequence wins. Unreachable pairs map to `None`.
pub fn intra_paths(
    coords: &[GeoCoord],
    links: &[(u32, u32)],
    endpoints: &BTreeSet<u32>,
) -> BTreeMap<(u32, u32), Option<RouterPath>> {
    let edges: Vec<(u32, u32, f64)> = links
        .iter()
        .map(|&(a, b)| (a, b, great_circle_km(&coords[a as usize], &coords[b as usize]).max(MIN_LINK_KM)))
        .collect();
    weighted_paths(coords.len(), &edges, endpoints)
}

/// [`intra_paths`] over explicit positive edge weights.
pub fn weighted_paths(
    n: usize,
    edges: &[(u32, u32, f64)],
    endpoints: &BTreeSet<u32>,
) -> BTreeMap<(u32, u32), Option<RouterPath>> {
    let adj = adjacency(n, edges);
    let dists: BTreeMap<u32, Vec<f64>> = endpoints.iter().map(|&e| (e, dijkstra(&adj, e))).collect();
    let mut out = BTreeMap::new();
    for &s in endpoints {
        for &t in endpoints {
            let total = dists[&s][t as usize];
            if !total.is_finite() {
                out.insert((s, t), None);
                continue;
            }
            // Greedy walk: the smallest next router that stays on a shortest path.
            let to_t = &dists[&t];
            let mut seq = vec![s];
            let mut at = s;
            let mut walked = 0.0;
            while at != t {
                let next = adj[at as usize]
                    .iter()
                    .find(|&&(v, w)| on_shortest(total, walked + w + to_t[v as usize]) && !seq.contains(&v))
                    .copied()
                    .expect("a shortest-path successor exists");
                walked += next.1;
                at = next.0;
                seq.push(at);
            }
            out.insert((s, t), Some(RouterPath { routers: seq, km: total }));
        }
    }
    out
}

/// Router count assumed between two interfaces `distance_km` apart when the
/// AS's router topology does not connect them.
pub fn synth_router_chain(distance_km: f64) -> usize {
    match distance_km {
        d if d < 1.0 => 1,
        d if d < 20.0 => 2,
        d if d < 100.0 => 3,
        d if d < 1000.0 => 4,
        _ => 5,
    }
}

/// Evenly spaced router locations between `a` and `b`: a single router sits at
/// the midpoint, otherwise both ends are included.
pub fn synth_router_sites(a: &GeoCoord, b: &GeoCoord) -> Vec<GeoCoord> {
    let n = synth_router_chain(great_circle_km(a, b));
    if n == 1 {
        return vec![a.interpolate(b, 0.5)];
    }
    (0..n).map(|i| a.interpolate(b, i as f64 / (n - 1) as f64)).collect()
}

/// Device-level expansion of a router path given the routers' sites.
/// `zone_of` places in-line amplifiers and regenerators.
pub fn place_optical(sites: &[Site], zone_of: &impl Fn(&GeoCoord) -> ZoneId) -> Vec<Device> {
    let mut devices = Vec::new();
    for (i, site) in sites.iter().enumerate() {
        for kind in [DeviceKind::WdmSwitch, DeviceKind::Transponder, DeviceKind::Muxponder] {
            devices.push(Device::typical(kind, *site));
        }
        devices.push(Device::typical(DeviceKind::CoreRouter, *site));
        for kind in [DeviceKind::Muxponder, DeviceKind::Transponder, DeviceKind::WdmSwitch] {
            devices.push(Device::typical(kind, *site));
        }
        let Some(next) = sites.get(i + 1) else { break };
        let d = great_circle_km(&site.coord, &next.coord);
        let mut span: Vec<(f64, DeviceKind)> = Vec::new();
        for (spacing, kind) in [(AMPLIFIER_SPACING_KM, DeviceKind::Amplifier), (REGENERATOR_SPACING_KM, DeviceKind::Regenerator)] {
            let n = (d / spacing).floor() as usize;
            span.extend((1..=n).map(|j| (j as f64 / (n + 1) as f64, kind)));
        }
        span.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for (t, kind) in span {
            let coord = site.coord.interpolate(&next.coord, t);
            devices.push(Device::typical(kind, Site { coord, zone: zone_of(&coord) }));
        }
    }
    devices
}

/// CIDT as a linear form over zone CIEs: `sum_z coeff_z * CIE_z`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearCidt {
    pub terms: Vec<(ZoneId, f64)>,
}

impl LinearCidt {
    /// Coefficients recovered by evaluating the model with a unit CIE in one
    /// zone at a time.
    pub fn of_path(path: &IntraDomainPath) -> Result<Self, ModelError> {
        let zones: BTreeSet<ZoneId> = path
            .devices
            .iter()
            .flat_map(|d| std::iter::once(d.site.zone).chain(d.redundants.iter().map(|r| r.site.zone)))
            .collect();
        let mut terms = Vec::with_capacity(zones.len());
        for z in zones {
            let indicator = |s: &Site| crate::model::CieValue::new(if s.zone == z { 1.0 } else { 0.0 }).ok();
            terms.push((z, path_cidt(path, &indicator)?));
        }
        Ok(LinearCidt { terms })
    }

    pub fn zones(&self) -> impl Iterator<Item = ZoneId> + '_ {
        self.terms.iter().map(|t| t.0)
    }

    pub fn eval(&self, cie: impl Fn(ZoneId) -> Option<f64>) -> Result<f64, ModelError> {
        let mut acc = 0.0;
        for (z, c) in &self.terms {
            acc += c * cie(*z).ok_or(ModelError::UnresolvedLocation(*z))?;
        }
        Ok(acc)
    }
}

/// One AS's reconstructed intra-domain state: border router per interface and
/// a device-level path per border-router pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IntraDomainState {
    pub asn: AsId,
    pub border_router_of: BTreeMap<InterfaceId, u32>,
    /// Keyed by `(a, b)` with `a <= b`; devices listed from `a` to `b`.
    pub router_paths: BTreeMap<(u32, u32), RouterLevel>,
    /// Per router pair: linear CIDT form of the device path.
    pub cidt_forms: BTreeMap<(u32, u32), LinearCidt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouterLevel {
    pub sites: Vec<Site>,
    pub devices: Vec<Device>,
    pub synthesized: bool,
}

fn key(a: u32, b: u32) -> (u32, u32) {
    if a <= b { (a, b) } else { (b, a) }
}

impl IntraDomainState {
    pub fn interfaces(&self) -> impl Iterator<Item = InterfaceId> + '_ {
        self.border_router_of.keys().copied()
    }

    fn pair(&self, ingress: InterfaceId, egress: InterfaceId) -> Option<(u32, u32)> {
        Some(key(*self.border_router_of.get(&ingress)?, *self.border_router_of.get(&egress)?))
    }

    /// The active intra-domain path set between two interfaces (single-path
    /// routing: one path of weight 1).
    pub fn paths(&self, ingress: InterfaceId, egress: InterfaceId) -> Option<Vec<IntraDomainPath>> {
        let (a, _) = self.pair(ingress, egress)?;
        let rl = self.router_paths.get(&self.pair(ingress, egress)?)?;
        let forward = self.border_router_of[&ingress] == a;
        let devices = if forward { rl.devices.clone() } else { rl.devices.iter().rev().cloned().collect() };
        Some(vec![IntraDomainPath::new(devices, ingress, egress)])
    }

    pub fn cidt_form(&self, ingress: InterfaceId, egress: InterfaceId) -> Option<&LinearCidt> {
        self.cidt_forms.get(&self.pair(ingress, egress)?)
    }

    /// Great-circle km travelled inside the AS between two interfaces.
    pub fn path_km(&self, ingress: InterfaceId, egress: InterfaceId) -> Option<f64> {
        let rl = self.router_paths.get(&self.pair(ingress, egress)?)?;
        Some(rl.sites.windows(2).map(|w| great_circle_km(&w[0].coord, &w[1].coord)).sum())
    }

    pub fn border_site(&self, node: &AsNode, intf: InterfaceId) -> Option<Site> {
        let r = *self.border_router_of.get(&intf)?;
        node.routers.get(r as usize).map(|r| r.site)
    }
}

/// Builds the intra-domain state of one AS. Border routers come from the
/// interfaces' `border_router` field; router pairs the router topology cannot
/// connect get a synthesized chain between the two border routers.
pub fn build_intra_state(
    node: &AsNode,
    zone_of: &impl Fn(&GeoCoord) -> ZoneId,
) -> Result<IntraDomainState, ModelError> {
    let border_router_of: BTreeMap<InterfaceId, u32> =
        node.interfaces.values().map(|i| (i.id, i.border_router)).collect();
    let endpoints: BTreeSet<u32> = border_router_of.values().copied().collect();
    let coords: Vec<GeoCoord> = node.routers.iter().map(|r| r.site.coord).collect();
    let shortest = intra_paths(&coords, &node.router_links, &endpoints);
    let mut router_paths = BTreeMap::new();
    let mut cidt_forms = BTreeMap::new();
    for ((a, b), found) in shortest {
        if a > b {
            continue;
        }
        let (sites, synthesized) = match found {
            Some(p) => (p.routers.iter().map(|r| node.routers[*r as usize].site).collect::<Vec<_>>(), false),
            None => {
                let (sa, sb) = (&node.routers[a as usize].site.coord, &node.routers[b as usize].site.coord);
                let sites = synth_router_sites(sa, sb)
                    .into_iter()
                    .map(|c| Site { coord: c, zone: zone_of(&c) })
                    .collect();
                (sites, true)
            }
        };
        let devices = place_optical(&sites, zone_of);
        let form = LinearCidt::of_path(&IntraDomainPath::new(devices.clone(), InterfaceId::NONE, InterfaceId::NONE))?;
        cidt_forms.insert((a, b), form);
        router_paths.insert((a, b), RouterLevel { sites, devices, synthesized });
    }
    Ok(IntraDomainState { asn: node.id, border_router_of, router_paths, cidt_forms })
}
