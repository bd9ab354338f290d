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
//! Seeded synthetic topologies for desk-scale experiments.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ids::{AsId, InterfaceId};
use crate::model::{EnergyMix, EnergySource, Site};

use super::geo::{great_circle_km, GeoCoord};
use super::graph::{NeighborRole, Relationship};
use super::{nearest_zone, AsLink, AsNode, Interface, Router, Topology, Zone, SCHEMA_VERSION};

/// A zone of the generator's palette: name, centroid and generation shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub mix: EnergyMix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub zones: Vec<ZoneSpec>,
    /// Size of the initial fully peered top tier.
    pub core_clique: usize,
    pub max_providers: usize,
    /// Chance that a new AS also peers with an existing one.
    pub peering_prob: f64,
    pub min_routers: usize,
    pub max_routers: usize,
    /// Chance that a link between two multi-router ASes gets a parallel twin.
    pub parallel_link_prob: f64,
    /// Max zones a large AS spreads its routers over.
    pub max_footprint_zones: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("degenerate generator parameters: {0}")]
    Params(String),
    #[error("generated graph is not connected")]
    Disconnected,
}

fn mix(shares: &[(EnergySource, f64)]) -> EnergyMix {
    EnergyMix::new(shares.iter().copied()).expect("palette mixes are valid")
}

/// Sixteen regions whose annual CIE spans roughly 4 to 1001 g/kWh.
pub fn default_palette() -> Vec<ZoneSpec> {
    use EnergySource::*;
    let z = |name: &str, lat: f64, lon: f64, shares: &[(EnergySource, f64)]| ZoneSpec {
        name: name.to_string(),
        lat,
        lon,
        mix: mix(shares),
    };
    vec![
        z("north-america-west", 45.0, -120.0, &[(Hydro, 0.6), (NaturalGas, 0.2), (Wind, 0.1), (Nuclear, 0.1)]),
        z("north-america-central", 40.0, -95.0, &[(Coal, 0.6), (NaturalGas, 0.3), (Wind, 0.1)]),
        z("north-america-east", 40.0, -77.0, &[(NaturalGas, 0.4), (Nuclear, 0.3), (Coal, 0.2), (Hydro, 0.1)]),
        z("south-america", -15.0, -50.0, &[(Hydro, 0.8), (Biomass, 0.1), (NaturalGas, 0.1)]),
        z("iceland", 64.5, -19.0, &[(Geothermal, 0.3), (Hydro, 0.7)]),
        z("nordic", 62.0, 15.0, &[(Hydro, 1.0)]),
        z("western-europe", 47.0, 2.0, &[(Nuclear, 0.7), (Hydro, 0.1), (Wind, 0.1), (NaturalGas, 0.1)]),
        z(
            "central-europe",
            51.0,
            10.0,
            &[(Coal, 0.35), (Wind, 0.25), (NaturalGas, 0.15), (Nuclear, 0.1), (Solar, 0.1), (Biomass, 0.05)],
        ),
        z("eastern-europe", 52.0, 20.0, &[(Coal, 0.75), (NaturalGas, 0.1), (Wind, 0.1), (Biomass, 0.05)]),
        z("middle-east", 25.0, 45.0, &[(NaturalGas, 0.9), (Solar, 0.1)]),
        z("southern-africa", -29.0, 25.0, &[(Coal, 1.0)]),
        z("india", 22.0, 79.0, &[(Coal, 0.75), (Hydro, 0.1), (NaturalGas, 0.05), (Solar, 0.05), (Wind, 0.05)]),
        z("china-north", 40.0, 115.0, &[(Coal, 0.85), (Wind, 0.1), (Solar, 0.05)]),
        z("china-south", 25.0, 110.0, &[(Coal, 0.45), (Hydro, 0.4), (Nuclear, 0.1), (Wind, 0.05)]),
        z("japan", 36.0, 138.0, &[(NaturalGas, 0.4), (Coal, 0.3), (Nuclear, 0.1), (Solar, 0.1), (Hydro, 0.1)]),
        z("australia", -30.0, 145.0, &[(Coal, 0.6), (NaturalGas, 0.2), (Solar, 0.1), (Wind, 0.1)]),
    ]
}

pub fn zones_from_specs(specs: &[ZoneSpec]) -> Vec<Zone> {
    specs
        .iter()
        .map(|z| Zone { name: z.name.clone(), centroid: GeoCoord { lat: z.lat, lon: z.lon }, mix: z.mix.clone() })
        .collect()
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            zones: default_palette(),
            core_clique: 4,
            max_providers: 2,
            peering_prob: 0.15,
            min_routers: 2,
            max_routers: 10,
            parallel_link_prob: 0.3,
            max_footprint_zones: 4,
        }
    }
}

impl SynthParams {
    fn validate(&self, n_ases: usize) -> Result<(), SynthError> {
        let fail = |m: &str| Err(SynthError::Params(m.to_string()));
        if n_ases < 2 {
            return fail("need at least 2 ASes");
        }
        if self.zones.is_empty() {
            return fail("zone palette is empty");
        }
        if self.core_clique < 1 {
            return fail("core_clique must be >= 1");
        }
        if self.max_providers < 1 {
            return fail("max_providers must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.peering_prob) || !(0.0..=1.0).contains(&self.parallel_link_prob) {
            return fail("probabilities must lie in [0,1]");
        }
        if self.min_routers < 1 || self.max_routers < self.min_routers {
            return fail("router bounds must satisfy 1 <= min_routers <= max_routers");
        }
        if self.max_footprint_zones < 1 {
            return fail("max_footprint_zones must be >= 1");
        }
        for z in &self.zones {
            GeoCoord::new(z.lat, z.lon).map_err(|e| SynthError::Params(e.to_string()))?;
        }
        Ok(())
    }
}

fn jitter(rng: &mut ChaCha8Rng, center: GeoCoord, deg: f64) -> GeoCoord {
    let lat = (center.lat + rng.random_range(-deg..=deg)).clamp(-85.0, 85.0);
    let mut lon = center.lon + rng.random_range(-deg..=deg);
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    GeoCoord { lat, lon }
}

/// Minimum spanning tree (Prim) plus a few nearest-neighbor shortcuts.
fn router_links(rng: &mut ChaCha8Rng, coords: &[GeoCoord]) -> Vec<(u32, u32)> {
    let n = coords.len();
    let mut links = BTreeSet::new();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    in_tree[0] = true;
    for v in 1..n {
        best[v] = (great_circle_km(&coords[0], &coords[v]), 0);
    }
    for _ in 1..n {
        let (v, _) = (0..n)
            .filter(|&v| !in_tree[v])
            .map(|v| (v, best[v].0))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("vertex left");
        in_tree[v] = true;
        let u = best[v].1;
        links.insert((u.min(v) as u32, u.max(v) as u32));
        for w in 0..n {
            if !in_tree[w] {
                let d = great_circle_km(&coords[v], &coords[w]);
                if d < best[w].0 {
                    best[w] = (d, v);
                }
            }
        }
    }
    for v in 0..n {
        if n > 2 && rng.random_bool(0.3) {
            let w = (0..n)
                .filter(|&w| w != v && !links.contains(&(v.min(w) as u32, v.max(w) as u32)))
                .min_by(|&a, &b| {
                    great_circle_km(&coords[v], &coords[a]).total_cmp(&great_circle_km(&coords[v], &coords[b]))
                });
            if let Some(w) = w {
                links.insert((v.min(w) as u32, v.max(w) as u32));
            }
        }
    }
    links.into_iter().collect()
}

struct Draft {
    routers: Vec<GeoCoord>,
    core: bool,
}

/// Generates a connected, relationship-annotated topology of `n_ases` ASes.
/// The first `core_clique` ASes peer with each other; every later AS buys
/// transit from up to `max_providers` earlier ASes chosen by preferential
/// attachment and occasionally peers with one more.
pub fn gen_synthetic(seed: u64, n_ases: usize, params: &SynthParams) -> Result<Topology, SynthError> {
    params.validate(n_ases)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zones = zones_from_specs(&params.zones);

    // geography
    let clique = params.core_clique.min(n_ases);
    let mut drafts = Vec::with_capacity(n_ases);
    for i in 0..n_ases {
        // earlier ASes are larger: more routers spread over more zones
        let size = 1.0 - i as f64 / n_ases as f64;
        let span = params.max_routers - params.min_routers;
        let hi = params.min_routers + (span as f64 * size).round() as usize;
        let n_routers = rng.random_range(params.min_routers..=hi.max(params.min_routers));
        let footprint = if i < clique {
            params.max_footprint_zones
        } else {
            1 + (((params.max_footprint_zones - 1) as f64) * size * size).round() as usize
        };
        let mut homes: Vec<&Zone> = zones.choose_multiple(&mut rng, footprint.min(zones.len())).collect();
        homes.sort_by(|a, b| a.name.cmp(&b.name));
        let routers = (0..n_routers)
            .map(|r| {
                let z = homes[r % homes.len()];
                jitter(&mut rng, z.centroid, 4.0)
            })
            .collect();
        drafts.push(Draft { routers, core: i < clique });
    }

    // AS graph
    let mut edges: Vec<(usize, usize, Relationship)> = Vec::new();
    let mut adjacent: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut degree = vec![0usize; n_ases];
    let mut link = |a: usize, b: usize, rel: Relationship, edges: &mut Vec<_>, degree: &mut Vec<usize>| {
        if adjacent.insert((a.min(b), a.max(b))) {
            edges.push((a, b, rel));
            degree[a] += 1;
            degree[b] += 1;
            true
        } else {
            false
        }
    };
    for a in 0..clique {
        for b in a + 1..clique {
            link(a, b, Relationship::PeerToPeer, &mut edges, &mut degree);
        }
    }
    for i in clique..n_ases {
        let want = rng.random_range(1..=params.max_providers.min(i));
        let mut providers = BTreeSet::new();
        while providers.len() < want {
            let pool: Vec<usize> = (0..i).filter(|p| !providers.contains(p)).collect();
            let p = *pool.choose_weighted(&mut rng, |&p| degree[p] as f64 + 1.0).expect("nonempty pool");
            providers.insert(p);
        }
        for p in providers {
            link(p, i, Relationship::ProviderToCustomer, &mut edges, &mut degree);
        }
        if i > clique && rng.random_bool(params.peering_prob) {
            let pool: Vec<usize> = (clique..i).collect();
            let q = *pool.choose(&mut rng).expect("nonempty pool");
            link(q, i, Relationship::PeerToPeer, &mut edges, &mut degree);
        }
    }

    // interfaces: each AS link lands on the closest router pair; parallel
    // twins use the next closest pair with fresh routers on both sides
    let ids: Vec<AsId> = (0..n_ases).map(|i| AsId(i as u64 + 1)).collect();
    let mut nodes: BTreeMap<AsId, AsNode> = BTreeMap::new();
    for (i, d) in drafts.iter().enumerate() {
        let routers: Vec<Router> = d
            .routers
            .iter()
            .enumerate()
            .map(|(r, c)| Router { id: r as u32, site: Site { coord: *c, zone: nearest_zone(&zones, c) } })
            .collect();
        let router_links = router_links(&mut rng, &d.routers);
        nodes.insert(ids[i], AsNode { id: ids[i], core: d.core, routers, router_links, interfaces: BTreeMap::new() });
    }
    let mut next_intf = vec![1u16; n_ases];
    let mut links = Vec::new();
    for (a, b, rel) in edges {
        let mut pairs: Vec<(f64, u32, u32)> = Vec::new();
        for (ra, ca) in drafts[a].routers.iter().enumerate() {
            for (rb, cb) in drafts[b].routers.iter().enumerate() {
                pairs.push((great_circle_km(ca, cb), ra as u32, rb as u32));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut chosen = vec![pairs[0]];
        let twin = drafts[a].routers.len() > 1 && drafts[b].routers.len() > 1;
        if twin && rng.random_bool(params.parallel_link_prob) {
            if let Some(p) = pairs.iter().find(|p| p.1 != pairs[0].1 && p.2 != pairs[0].2) {
                chosen.push(*p);
            }
        }
        for (_, ra, rb) in chosen {
            let (ia, ib) = (InterfaceId(next_intf[a]), InterfaceId(next_intf[b]));
            next_intf[a] += 1;
            next_intf[b] += 1;
            let mid = drafts[a].routers[ra as usize].interpolate(&drafts[b].routers[rb as usize], 0.5);
            let site = Site { coord: mid, zone: nearest_zone(&zones, &mid) };
            let role_of_b = match rel {
                Relationship::ProviderToCustomer => NeighborRole::Customer,
                Relationship::PeerToPeer => NeighborRole::Peer,
            };
            nodes.get_mut(&ids[a]).expect("node").interfaces.insert(
                ia,
                Interface { id: ia, neighbor: ids[b], neighbor_interface: ib, role: role_of_b, site, border_router: ra },
            );
            nodes.get_mut(&ids[b]).expect("node").interfaces.insert(
                ib,
                Interface {
                    id: ib,
                    neighbor: ids[a],
                    neighbor_interface: ia,
                    role: role_of_b.inverse(),
                    site,
                    border_router: rb,
                },
            );
            links.push(AsLink { as_a: ids[a], as_b: ids[b], relationship: rel, interface_a: ia, interface_b: ib });
        }
    }

    let topo = Topology { schema_version: SCHEMA_VERSION, zones, ases: nodes, links };
    if !topo.as_graph().is_connected() {
        return Err(SynthError::Disconnected);
    }
    Ok(topo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cie_from_mix;

    #[test]
    fn same_seed_same_topology() {
        let p = SynthParams::default();
        assert_eq!(gen_synthetic(11, 60, &p).unwrap(), gen_synthetic(11, 60, &p).unwrap());
        assert_ne!(gen_synthetic(11, 60, &p).unwrap(), gen_synthetic(12, 60, &p).unwrap());
    }

    #[test]
    fn two_ases_one_link() {
        let t = gen_synthetic(5, 2, &SynthParams::default()).unwrap();
        assert_eq!(t.as_graph().edge_count(), 1);
    }

    #[test]
    fn fifty_is_connected_and_valid() {
        let t = gen_synthetic(1, 50, &SynthParams::default()).unwrap();
        assert!(t.as_graph().is_connected());
        t.validate().unwrap();
        for node in t.ases.values() {
            assert!(!node.interfaces.is_empty());
        }
    }

    #[test]
    fn palette_spans_reference_range() {
        let cies: Vec<f64> = default_palette().iter().map(|z| cie_from_mix(&z.mix).grams_per_kwh()).collect();
        let lo = cies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cies.iter().copied().fold(0.0, f64::max);
        assert!((lo - 4.0).abs() < 1e-9);
        assert!((hi - 1001.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_params_rejected() {
        assert!(gen_synthetic(1, 1, &SynthParams::default()).is_err());
        let p = SynthParams { max_routers: 0, ..SynthParams::default() };
        assert!(matches!(gen_synthetic(1, 10, &p), Err(SynthError::Params(_))));
        let p = SynthParams { zones: vec![], ..SynthParams::default() };
        assert!(gen_synthetic(1, 10, &p).is_err());
    }
}
