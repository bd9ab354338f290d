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
//! AS-level relationship graph, the `as1|as2|rel` text format and core pruning.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::ids::AsId;

/// Business relationship of an inter-AS link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relationship {
    ProviderToCustomer,
    PeerToPeer,
}

/// Role of a neighbor as seen from one AS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRole {
    Customer,
    Peer,
    Provider,
}

impl NeighborRole {
    pub fn inverse(self) -> NeighborRole {
        match self {
            NeighborRole::Customer => NeighborRole::Provider,
            NeighborRole::Peer => NeighborRole::Peer,
            NeighborRole::Provider => NeighborRole::Customer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: self-loop on AS {asn}")]
    SelfLoop { line: usize, asn: AsId },
    #[error("duplicate link between AS {0} and AS {1}")]
    Duplicate(AsId, AsId),
    #[error("core size must be positive")]
    EmptyCore,
    #[error("core size {k} exceeds {n} ASes")]
    CoreTooLarge { k: usize, n: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Undirected AS graph with typed edges. `role(a, b)` is the role `b` plays for `a`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsGraph {
    adj: BTreeMap<AsId, BTreeMap<AsId, NeighborRole>>,
}

impl AsGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_as(&mut self, asn: AsId) {
        self.adj.entry(asn).or_default();
    }

    /// Adds a link; for `ProviderToCustomer`, `a` is the provider.
    pub fn add_link(&mut self, a: AsId, b: AsId, rel: Relationship) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop { line: 0, asn: a });
        }
        if self.adj.get(&a).is_some_and(|n| n.contains_key(&b)) {
            return Err(GraphError::Duplicate(a.min(b), a.max(b)));
        }
        let (ra, rb) = match rel {
            Relationship::ProviderToCustomer => (NeighborRole::Customer, NeighborRole::Provider),
            Relationship::PeerToPeer => (NeighborRole::Peer, NeighborRole::Peer),
        };
        self.adj.entry(a).or_default().insert(b, ra);
        self.adj.entry(b).or_default().insert(a, rb);
        Ok(())
    }

    pub fn ases(&self) -> impl Iterator<Item = AsId> + '_ {
        self.adj.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn contains(&self, asn: AsId) -> bool {
        self.adj.contains_key(&asn)
    }

    pub fn neighbors(&self, asn: AsId) -> impl Iterator<Item = (AsId, NeighborRole)> + '_ {
        self.adj.get(&asn).into_iter().flat_map(|m| m.iter().map(|(k, v)| (*k, *v)))
    }

    pub fn role(&self, a: AsId, b: AsId) -> Option<NeighborRole> {
        self.adj.get(&a).and_then(|m| m.get(&b)).copied()
    }

    pub fn degree(&self, asn: AsId) -> usize {
        self.adj.get(&asn).map_or(0, |m| m.len())
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(|m| m.len()).sum::<usize>() / 2
    }

    /// Links as `(a, b, rel)` with `a < b` for peers and `a` the provider otherwise.
    pub fn links(&self) -> Vec<(AsId, AsId, Relationship)> {
        let mut out = Vec::new();
        for (&a, nbrs) in &self.adj {
            for (&b, &role) in nbrs {
                match role {
                    NeighborRole::Customer => out.push((a, b, Relationship::ProviderToCustomer)),
                    NeighborRole::Peer if a < b => out.push((a, b, Relationship::PeerToPeer)),
                    _ => {}
                }
            }
        }
        out
    }

    /// Subgraph induced by `keep`.
    pub fn induced(&self, keep: &BTreeSet<AsId>) -> AsGraph {
        let adj = self
            .adj
            .iter()
            .filter(|(a, _)| keep.contains(a))
            .map(|(a, nbrs)| {
                (*a, nbrs.iter().filter(|(b, _)| keep.contains(b)).map(|(b, r)| (*b, *r)).collect())
            })
            .collect();
        AsGraph { adj }
    }

    /// `asn` plus every AS reachable from it over provider-to-customer links.
    pub fn customer_cone(&self, asn: AsId) -> BTreeSet<AsId> {
        let mut seen = BTreeSet::from([asn]);
        let mut queue = VecDeque::from([asn]);
        while let Some(a) = queue.pop_front() {
            for (b, role) in self.neighbors(a) {
                if role == NeighborRole::Customer && seen.insert(b) {
                    queue.push_back(b);
                }
            }
        }
        seen
    }

    pub fn is_connected(&self) -> bool {
        let Some(start) = self.adj.keys().next().copied() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(a) = queue.pop_front() {
            for (b, _) in self.neighbors(a) {
                if seen.insert(b) {
                    queue.push_back(b);
                }
            }
        }
        seen.len() == self.adj.len()
    }
}

/// Parses `as1|as2|rel` lines, `rel` being -1 (as1 provides for as2) or 0 (peers).
/// A trailing source column (`as1|as2|rel|src`) is tolerated; `#` lines are comments.
pub fn load_as_rel(reader: impl BufRead) -> Result<AsGraph, GraphError> {
    let mut graph = AsGraph::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| GraphError::Io(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(GraphError::Malformed { line: line_no, reason: format!("expected 3 fields, got {}", fields.len()) });
        }
        let parse_as = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map(AsId)
                .map_err(|_| GraphError::Malformed { line: line_no, reason: format!("bad AS number {s:?}") })
        };
        let a = parse_as(fields[0])?;
        let b = parse_as(fields[1])?;
        let rel = match fields[2].trim() {
            "-1" => Relationship::ProviderToCustomer,
            "0" => Relationship::PeerToPeer,
            other => {
                return Err(GraphError::Malformed { line: line_no, reason: format!("unknown relationship {other:?}") })
            }
        };
        if a == b {
            return Err(GraphError::SelfLoop { line: line_no, asn: a });
        }
        graph.add_link(a, b, rel)?;
    }
    Ok(graph)
}

/// Repeatedly deletes the lowest-degree AS (lowest AS number on ties) until `k` remain.
pub fn prune_to_core(graph: &AsGraph, k: usize) -> Result<BTreeSet<AsId>, GraphError> {
    if k == 0 {
        return Err(GraphError::EmptyCore);
    }
    if k > graph.len() {
        return Err(GraphError::CoreTooLarge { k, n: graph.len() });
    }
    let mut degree: BTreeMap<AsId, usize> = graph.ases().map(|a| (a, graph.degree(a))).collect();
    let mut queue: BTreeSet<(usize, AsId)> = degree.iter().map(|(a, d)| (*d, *a)).collect();
    while degree.len() > k {
        let (_, victim) = queue.pop_first().expect("queue tracks remaining ASes");
        degree.remove(&victim);
        for (nbr, _) in graph.neighbors(victim) {
            if let Some(d) = degree.get_mut(&nbr) {
                queue.remove(&(*d, nbr));
                *d -= 1;
                queue.insert((*d, nbr));
            }
        }
    }
    Ok(degree.into_keys().collect())
}
