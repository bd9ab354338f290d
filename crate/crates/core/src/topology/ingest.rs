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
//! CSV ingestion of measured topology data.
//!
//! Files (all with a header row):
//! - interfaces: `as_id,interface_id,neighbor_as,neighbor_interface,lat,lon`
//! - routers: `router_id,as_id,lat,lon`
//! - router links: `router_a,router_b` (links across ASes tell which routers
//!   face which neighbor)
//! - energy mixes: `country,coal,gas,biomass,solar,geothermal,nuclear,wind,hydro`
//! - zone centroids: `country,lat,lon`

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::Deserialize;

use crate::ids::{AsId, InterfaceId};
use crate::model::{EnergyMix, EnergySource, Site};

use super::geo::GeoCoord;
use super::graph::{AsGraph, NeighborRole, Relationship};
use super::intra::map_border_routers;
use super::{nearest_zone, AsLink, AsNode, Interface, Router, Topology, TopologyError, Zone, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct InterfaceRow {
    pub as_id: u64,
    pub interface_id: u16,
    pub neighbor_as: u64,
    pub neighbor_interface: u16,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RouterRow {
    pub router_id: u64,
    pub as_id: u64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RouterLinkRow {
    pub router_a: u64,
    pub router_b: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct MixRow {
    pub country: String,
    pub coal: f64,
    pub gas: f64,
    pub biomass: f64,
    pub solar: f64,
    pub geothermal: f64,
    pub nuclear: f64,
    pub wind: f64,
    pub hydro: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CentroidRow {
    pub country: String,
    pub lat: f64,
    pub lon: f64,
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(reader: impl Read) -> Result<Vec<T>, TopologyError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| TopologyError::Invalid(format!("CSV record {}: {e}", i + 1))))
        .collect()
}

fn coord(lat: f64, lon: f64) -> Result<GeoCoord, TopologyError> {
    GeoCoord::new(lat, lon).map_err(|e| TopologyError::Invalid(e.to_string()))
}

/// Zones from mix rows joined with centroid rows on `country`.
pub fn zones_from_rows(mixes: &[MixRow], centroids: &[CentroidRow]) -> Result<Vec<Zone>, TopologyError> {
    let centers: BTreeMap<&str, &CentroidRow> = centroids.iter().map(|c| (c.country.as_str(), c)).collect();
    let mut zones = Vec::new();
    for m in mixes {
        let c = centers
            .get(m.country.as_str())
            .ok_or_else(|| TopologyError::Invalid(format!("no centroid for country {}", m.country)))?;
        let mix = EnergyMix::new([
            (EnergySource::Coal, m.coal),
            (EnergySource::NaturalGas, m.gas),
            (EnergySource::Biomass, m.biomass),
            (EnergySource::Solar, m.solar),
            (EnergySource::Geothermal, m.geothermal),
            (EnergySource::Nuclear, m.nuclear),
            (EnergySource::Wind, m.wind),
            (EnergySource::Hydro, m.hydro),
        ])
        .map_err(|e| TopologyError::Invalid(format!("country {}: {e}", m.country)))?;
        zones.push(Zone { name: m.country.clone(), centroid: coord(c.lat, c.lon)?, mix });
    }
    if zones.is_empty() {
        return Err(TopologyError::Invalid("no energy-mix zones".into()));
    }
    Ok(zones)
}

/// Assembles a topology from an AS graph plus geo and router data. ASes
/// without providers are labeled core. Each interface is attached to the
/// closest router already facing the same neighbor, or to a new router at the
/// interface location.
pub fn assemble(
    graph: &AsGraph,
    zones: Vec<Zone>,
    interfaces: &[InterfaceRow],
    routers: &[RouterRow],
    router_links: &[RouterLinkRow],
) -> Result<Topology, TopologyError> {
    let site = |c: GeoCoord| Site { coord: c, zone: nearest_zone(&zones, &c) };

    // router ids -> (as, index within as)
    let mut sorted: Vec<&RouterRow> = routers.iter().filter(|r| graph.contains(AsId(r.as_id))).collect();
    sorted.sort_by_key(|r| (r.as_id, r.router_id));
    let mut index: BTreeMap<u64, (AsId, u32)> = BTreeMap::new();
    let mut per_as: BTreeMap<AsId, Vec<Router>> = graph.ases().map(|a| (a, Vec::new())).collect();
    for r in sorted {
        let list = per_as.get_mut(&AsId(r.as_id)).expect("filtered");
        let idx = list.len() as u32;
        if index.insert(r.router_id, (AsId(r.as_id), idx)).is_some() {
            return Err(TopologyError::Invalid(format!("duplicate router id {}", r.router_id)));
        }
        list.push(Router { id: idx, site: site(coord(r.lat, r.lon)?) });
    }

    let mut internal: BTreeMap<AsId, BTreeSet<(u32, u32)>> = BTreeMap::new();
    let mut facing: BTreeMap<AsId, BTreeMap<u32, BTreeSet<AsId>>> = BTreeMap::new();
    for l in router_links {
        let (Some(&(a, ia)), Some(&(b, ib))) = (index.get(&l.router_a), index.get(&l.router_b)) else {
            continue;
        };
        if a == b {
            internal.entry(a).or_default().insert((ia.min(ib), ia.max(ib)));
        } else {
            facing.entry(a).or_default().entry(ia).or_default().insert(b);
            facing.entry(b).or_default().entry(ib).or_default().insert(a);
        }
    }

    let mut rows_by_as: BTreeMap<AsId, Vec<&InterfaceRow>> = BTreeMap::new();
    for row in interfaces {
        let (a, n) = (AsId(row.as_id), AsId(row.neighbor_as));
        if !graph.contains(a) || !graph.contains(n) {
            continue;
        }
        if graph.role(a, n).is_none() {
            return Err(TopologyError::Invalid(format!("interface {a}#{} names non-neighbor {n}", row.interface_id)));
        }
        if row.interface_id == 0 || row.neighbor_interface == 0 {
            return Err(TopologyError::Invalid(format!("interface id 0 is reserved (AS {a})")));
        }
        rows_by_as.entry(a).or_default().push(row);
    }

    let mut ases = BTreeMap::new();
    for asn in graph.ases() {
        let mut routers = per_as.remove(&asn).unwrap_or_default();
        let rows = rows_by_as.get(&asn).map(Vec::as_slice).unwrap_or(&[]);
        let mut seen = BTreeSet::new();
        let mut wanted = Vec::new();
        for r in rows {
            if !seen.insert(r.interface_id) {
                return Err(TopologyError::Invalid(format!("AS {asn} lists interface {} twice", r.interface_id)));
            }
            wanted.push((InterfaceId(r.interface_id), AsId(r.neighbor_as), site(coord(r.lat, r.lon)?)));
        }
        let empty = BTreeMap::new();
        let border = map_border_routers(&mut routers, &wanted, facing.get(&asn).unwrap_or(&empty));
        let interfaces = rows
            .iter()
            .zip(&wanted)
            .map(|(r, (id, n, s))| {
                let role = graph.role(asn, *n).expect("checked above");
                let intf = Interface {
                    id: *id,
                    neighbor: *n,
                    neighbor_interface: InterfaceId(r.neighbor_interface),
                    role,
                    site: *s,
                    border_router: border[id],
                };
                (*id, intf)
            })
            .collect();
        let core = !graph.neighbors(asn).any(|(_, role)| role == NeighborRole::Provider);
        let router_links = internal.remove(&asn).unwrap_or_default().into_iter().collect();
        ases.insert(asn, AsNode { id: asn, core, routers, router_links, interfaces });
    }

    let mut links = Vec::new();
    for (asn, node) in &ases {
        for intf in node.interfaces.values() {
            let (a, b, ia, ib, rel) = match intf.role {
                NeighborRole::Customer => (*asn, intf.neighbor, intf.id, intf.neighbor_interface, Relationship::ProviderToCustomer),
                NeighborRole::Peer if *asn < intf.neighbor => {
                    (*asn, intf.neighbor, intf.id, intf.neighbor_interface, Relationship::PeerToPeer)
                }
                _ => continue,
            };
            links.push(AsLink { as_a: a, as_b: b, relationship: rel, interface_a: ia, interface_b: ib });
        }
    }
    for (a, b, _) in graph.links() {
        if !ases[&a].interfaces.values().any(|i| i.neighbor == b) {
            return Err(TopologyError::Invalid(format!("AS link {a}-{b} has no interface records")));
        }
    }

    let topo = Topology { schema_version: SCHEMA_VERSION, zones, ases, links };
    topo.validate()?;
    Ok(topo)
}

/// Small hand-made topology: one location per AS, every interface at its
/// AS's location. Repeating a link adds a parallel interface pair.
pub fn from_as_links(
    zones: Vec<Zone>,
    ases: &[(AsId, GeoCoord)],
    links: &[(AsId, AsId, Relationship)],
) -> Result<Topology, TopologyError> {
    let mut graph = AsGraph::new();
    let loc: BTreeMap<AsId, GeoCoord> = ases.iter().copied().collect();
    for (a, _) in ases {
        graph.add_as(*a);
    }
    let mut next: BTreeMap<AsId, u16> = BTreeMap::new();
    let mut rows = Vec::new();
    for &(a, b, rel) in links {
        let (Some(ca), Some(cb)) = (loc.get(&a), loc.get(&b)) else {
            return Err(TopologyError::Invalid(format!("link {a}-{b} names an unknown AS")));
        };
        if graph.role(a, b).is_none() {
            graph.add_link(a, b, rel).map_err(|e| TopologyError::Invalid(e.to_string()))?;
        }
        let mut id = |x: AsId| {
            let n = next.entry(x).or_insert(0);
            *n += 1;
            *n
        };
        let (ia, ib) = (id(a), id(b));
        rows.push(InterfaceRow { as_id: a.0, interface_id: ia, neighbor_as: b.0, neighbor_interface: ib, lat: ca.lat, lon: ca.lon });
        rows.push(InterfaceRow { as_id: b.0, interface_id: ib, neighbor_as: a.0, neighbor_interface: ia, lat: cb.lat, lon: cb.lon });
    }
    assemble(&graph, zones, &rows, &[], &[])
}
