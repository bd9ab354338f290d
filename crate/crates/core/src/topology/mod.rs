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
//! Evaluation topology: AS graph with interfaces and geography, plus a
//! router-level topology per AS from which device-level intra-domain paths
//! are reconstructed.

mod geo;
mod graph;
pub mod ingest;
mod intra;
mod synth;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use geo::{great_circle_km, CoordError, GeoCoord, EARTH_RADIUS_KM};
pub use graph::{load_as_rel, prune_to_core, AsGraph, GraphError, NeighborRole, Relationship};
pub use intra::{
    build_intra_state, intra_paths, map_border_routers, place_optical, synth_router_chain, synth_router_sites,
    weighted_paths, IntraDomainState, LinearCidt, RouterLevel, RouterPath,
};
pub use synth::{default_palette, gen_synthetic, zones_from_specs, SynthError, SynthParams, ZoneSpec};

use crate::ids::{AsId, InterfaceId, ZoneId};
use crate::model::{cie_from_mix, CieValue, EnergyMix, Site};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    pub centroid: GeoCoord,
    pub mix: EnergyMix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Router {
    pub id: u32,
    pub site: Site,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub id: InterfaceId,
    pub neighbor: AsId,
    pub neighbor_interface: InterfaceId,
    /// Role the neighbor plays for this AS.
    pub role: NeighborRole,
    pub site: Site,
    /// Router index within the owning AS.
    pub border_router: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsNode {
    pub id: AsId,
    /// Member of the core (top-tier) set; used by hierarchical dissemination.
    pub core: bool,
    pub routers: Vec<Router>,
    /// Undirected router adjacencies by router index.
    pub router_links: Vec<(u32, u32)>,
    pub interfaces: BTreeMap<InterfaceId, Interface>,
}

impl AsNode {
    pub fn interface_ids(&self) -> Vec<InterfaceId> {
        self.interfaces.keys().copied().collect()
    }

    pub fn border_router_count(&self) -> usize {
        self.interfaces.values().map(|i| i.border_router).collect::<BTreeSet<_>>().len()
    }

    pub fn interfaces_to(&self, neighbor: AsId) -> impl Iterator<Item = &Interface> + '_ {
        self.interfaces.values().filter(move |i| i.neighbor == neighbor)
    }
}

/// One inter-AS link. For provider-to-customer links `as_a` is the provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsLink {
    pub as_a: AsId,
    pub as_b: AsId,
    pub relationship: Relationship,
    pub interface_a: InterfaceId,
    pub interface_b: InterfaceId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub schema_version: u32,
    pub zones: Vec<Zone>,
    pub ases: BTreeMap<AsId, AsNode>,
    pub links: Vec<AsLink>,
}

#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error("unsupported topology schema version {0}")]
    Schema(u32),
    #[error("invalid topology JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

impl Topology {
    pub fn as_graph(&self) -> AsGraph {
        let mut g = AsGraph::new();
        for a in self.ases.keys() {
            g.add_as(*a);
        }
        for l in &self.links {
            if g.role(l.as_a, l.as_b).is_none() {
                g.add_link(l.as_a, l.as_b, l.relationship).expect("distinct endpoints");
            }
        }
        g
    }

    pub fn zone_cie(&self) -> BTreeMap<ZoneId, CieValue> {
        self.zones.iter().enumerate().map(|(i, z)| (ZoneId(i as u32), cie_from_mix(&z.mix))).collect()
    }

    /// Nearest zone centroid.
    pub fn zone_of(&self, coord: &GeoCoord) -> ZoneId {
        nearest_zone(&self.zones, coord)
    }

    /// Keeps only the listed ASes and the links among them.
    pub fn restrict_to(&self, keep: &BTreeSet<AsId>) -> Topology {
        let links: Vec<AsLink> =
            self.links.iter().filter(|l| keep.contains(&l.as_a) && keep.contains(&l.as_b)).cloned().collect();
        let ases = self
            .ases
            .iter()
            .filter(|(a, _)| keep.contains(a))
            .map(|(a, node)| {
                let mut node = node.clone();
                node.interfaces.retain(|_, i| keep.contains(&i.neighbor));
                (*a, node)
            })
            .collect();
        Topology { schema_version: self.schema_version, zones: self.zones.clone(), ases, links }
    }

    pub fn interface(&self, asn: AsId, intf: InterfaceId) -> Option<&Interface> {
        self.ases.get(&asn).and_then(|n| n.interfaces.get(&intf))
    }

    /// Checks cross references between links, interfaces and routers.
    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(TopologyError::Schema(self.schema_version));
        }
        for (asn, node) in &self.ases {
            for intf in node.interfaces.values() {
                if intf.id.is_none() {
                    return Err(TopologyError::Invalid(format!("AS {asn} uses reserved interface id 0")));
                }
                if intf.border_router as usize >= node.routers.len() {
                    return Err(TopologyError::Invalid(format!("AS {asn} interface {} has no border router", intf.id)));
                }
                let back = self.interface(intf.neighbor, intf.neighbor_interface).ok_or_else(|| {
                    TopologyError::Invalid(format!("AS {asn} interface {} points at missing peer", intf.id))
                })?;
                if back.neighbor != *asn || back.neighbor_interface != intf.id || back.role != intf.role.inverse() {
                    return Err(TopologyError::Invalid(format!("AS {asn} interface {} is not mirrored", intf.id)));
                }
            }
            for (a, b) in &node.router_links {
                if *a as usize >= node.routers.len() || *b as usize >= node.routers.len() {
                    return Err(TopologyError::Invalid(format!("AS {asn} router link out of range")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes") + "\n"
    }

    pub fn from_json(s: &str) -> Result<Topology, TopologyError> {
        let t: Topology = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }
}

pub(crate) fn nearest_zone(zones: &[Zone], coord: &GeoCoord) -> ZoneId {
    let mut best = (f64::INFINITY, 0usize);
    for (i, z) in zones.iter().enumerate() {
        let d = great_circle_km(&z.centroid, coord);
        if d < best.0 {
            best = (d, i);
        }
    }
    ZoneId(best.1 as u32)
}
