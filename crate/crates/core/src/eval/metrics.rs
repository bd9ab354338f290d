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
//! Per-pair CIDT and delay comparison of CIRo and BGP paths, and the
//! traffic-weighted carbon footprint.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::beaconing::{Mode, SegmentKind, Simulation};
use crate::bgp::{k_bgp_alternatives, RoutingTables};
use crate::endpoint::{end_to_end_cidt, AsHop, Direction, EndToEndPath, SegmentUse};
use crate::exec::Execution;
use crate::ids::{AsId, Timestamp, ZoneId};
use crate::topology::{great_circle_km, AsGraph, IntraDomainState, Topology};
use crate::traffic::TrafficMatrix;

use super::{EvalError, Stage};

/// Signal speed in fiber, 2/3 c.
pub const SIGNAL_SPEED_M_PER_S: f64 = 2e8;

/// Great-circle delays ignore fiber detours and underestimate real one-way
/// delay by a factor of about 1.5.
pub const DELAY_NOTE: &str = "great-circle propagation delay at 2e8 m/s; underestimates real delay by a factor of ~1.5";

const G_PER_BIT_TO_G_PER_GBIT: f64 = 1e9;

/// Comparison of one ordered AS pair. CIDTs are in g/Gbit of current-hour
/// ground truth, delays in ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub src: AsId,
    pub dst: AsId,
    /// Path the source endpoint selects from its CIRo segments.
    pub greenest_ciro_cidt: f64,
    /// Greenest of the source's border-router BGP routes.
    pub greenest_bgp_cidt: f64,
    pub mean_bgp_cidt: f64,
    /// Mean over the k greenest CIRo paths, k being the number of the
    /// source's border routers.
    pub mean_k_greenest_ciro_cidt: f64,
    /// `greenest_bgp_cidt - greenest_ciro_cidt`.
    pub abs_diff: f64,
    /// `greenest_ciro_cidt / greenest_bgp_cidt`; 1 when both are zero.
    pub relative_ratio: Option<f64>,
    pub relative_ratio_mean: Option<f64>,
    pub propagation_delay_ciro_ms: f64,
    pub propagation_delay_bgp_ms: f64,
    pub mean_k_delay_ciro_ms: f64,
    pub mean_delay_bgp_ms: f64,
    pub latency_ratio: Option<f64>,
    pub latency_ratio_mean: Option<f64>,
    pub ciro_paths: usize,
    pub bgp_paths: usize,
    pub ciro_hops: usize,
    pub bgp_hops: usize,
}

/// Pair metrics over a fixed AS set; pairs lacking a CIRo or a BGP path are
/// only counted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairTable {
    pub ases: BTreeSet<AsId>,
    pub rows: Vec<PairMetrics>,
    pub omitted: usize,
}

/// Everything the per-pair computation reads.
pub struct EvalContext<'s, 'a> {
    pub topo: &'a Topology,
    pub graph: AsGraph,
    pub states: BTreeMap<AsId, &'a IntraDomainState>,
    pub sim: &'s Simulation<'a>,
    pub tables: &'s RoutingTables,
    pub now: Timestamp,
    /// CIE (g/kWh) of every zone for the hour of `now`.
    pub cie: BTreeMap<ZoneId, f64>,
}

pub fn ratio(a: f64, b: f64) -> Option<f64> {
    if b > 0.0 {
        Some(a / b)
    } else if a == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

/// One-way delay along interface-level hops: great-circle legs between the
/// consecutive interface sites.
pub fn path_delay_ms(topo: &Topology, hops: &[AsHop]) -> Option<f64> {
    let mut km = 0.0;
    let mut last = None;
    for h in hops {
        for intf in [h.ingress, h.egress] {
            if intf.is_none() {
                continue;
            }
            let here = topo.interface(h.as_id, intf)?.site.coord;
            if let Some(prev) = last {
                km += great_circle_km(&prev, &here);
            }
            last = Some(here);
        }
    }
    Some(km * 1e3 / SIGNAL_SPEED_M_PER_S * 1e3)
}

impl EvalContext<'_, '_> {
    /// Model CIDT (g/Gbit) of the transit hops at the hour of `now`.
    pub fn ground_truth(&self, hops: &[AsHop]) -> Option<f64> {
        let mut total = 0.0;
        for h in hops.iter().skip(1).take(hops.len().saturating_sub(2)) {
            let form = self.states.get(&h.as_id)?.cidt_form(h.ingress, h.egress)?;
            total += form.eval(|z| self.cie.get(&z).copied()).ok()?;
        }
        Some(total * G_PER_BIT_TO_G_PER_GBIT)
    }

    /// CIRo paths from `src` to `dst` built from the beacon stores.
    pub fn ciro_paths(&self, src: AsId, dst: AsId) -> Vec<EndToEndPath> {
        match self.sim.config().mode {
            Mode::Flat => self
                .sim
                .beacons(src, SegmentKind::Core, dst)
                .iter()
                .map(|b| EndToEndPath::toward_origin(b.pcb.clone(), src, b.ingress))
                .collect(),
            Mode::Hierarchical => self.combined_paths(src, dst),
        }
    }

    /// Up segment to a core AS, core segment, down segment from a core AS.
    fn combined_paths(&self, src: AsId, dst: AsId) -> Vec<EndToEndPath> {
        let is_core = |a: AsId| self.topo.ases.get(&a).is_some_and(|n| n.core);
        let tree = |holder: AsId, direction: Direction| -> Vec<(AsId, Option<SegmentUse>)> {
            if is_core(holder) {
                return vec![(holder, None)];
            }
            let Some(store) = self.sim.store(holder) else { return Vec::new() };
            store
                .groups()
                .filter(|((kind, _), _)| *kind == SegmentKind::IntraIsd)
                .flat_map(|((_, origin), beacons)| {
                    beacons.iter().map(move |b| {
                        (origin, Some(SegmentUse { pcb: b.pcb.clone(), holder, holder_ingress: b.ingress, direction }))
                    })
                })
                .collect()
        };
        let ups = tree(src, Direction::AgainstBeacon);
        let downs = tree(dst, Direction::AlongBeacon);
        let mut out = Vec::new();
        for (c1, up) in &ups {
            for (c2, down) in &downs {
                let cores: Vec<Option<SegmentUse>> = if c1 == c2 {
                    vec![None]
                } else {
                    self.sim
                        .beacons(*c1, SegmentKind::Core, *c2)
                        .iter()
                        .map(|b| {
                            Some(SegmentUse {
                                pcb: b.pcb.clone(),
                                holder: *c1,
                                holder_ingress: b.ingress,
                                direction: Direction::AgainstBeacon,
                            })
                        })
                        .collect()
                };
                for core in cores {
                    let segs: Vec<SegmentUse> = [up, &core, down].into_iter().flatten().cloned().collect();
                    let Ok(p) = EndToEndPath::from_segments(&segs) else { continue };
                    let distinct: BTreeSet<AsId> = p.hops.iter().map(|h| h.as_id).collect();
                    if distinct.len() == p.hops.len() && p.source() == src && p.destination() == dst {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    pub fn pair(&self, src: AsId, dst: AsId) -> Option<PairMetrics> {
        let node = self.topo.ases.get(&src)?;
        let k = node.border_router_count().max(1);

        // the endpoint ranks by what its segments advertise
        let mut ciro: Vec<(f64, EndToEndPath)> = self
            .ciro_paths(src, dst)
            .into_iter()
            .filter_map(|p| Some((end_to_end_cidt(&p, self.now)?, p)))
            .collect();
        ciro.sort_by(|(a, p), (b, q)| a.total_cmp(b).then(p.hops.len().cmp(&q.hops.len())).then_with(|| p.hops.cmp(&q.hops)));
        let ciro_paths = ciro.len();
        let chosen: Vec<(f64, f64, usize)> = ciro
            .iter()
            .take(k)
            .filter_map(|(_, p)| Some((self.ground_truth(&p.hops)?, path_delay_ms(self.topo, &p.hops)?, p.hops.len())))
            .collect();
        let &(greenest_ciro, delay_ciro, ciro_hops) = chosen.first()?;

        let alts = k_bgp_alternatives(self.topo, &self.graph, self.tables, src, dst).ok()?;
        let mut bgp: Vec<(f64, f64, &Vec<AsHop>)> = alts
            .iter()
            .filter_map(|h| Some((self.ground_truth(h)?, path_delay_ms(self.topo, h)?, h)))
            .collect();
        bgp.sort_by(|(a, _, p), (b, _, q)| a.total_cmp(b).then(p.len().cmp(&q.len())).then_with(|| p.cmp(q)));
        let &(greenest_bgp, delay_bgp, bgp_best) = bgp.first()?;

        let mean = |xs: &mut dyn Iterator<Item = f64>, n: usize| xs.sum::<f64>() / n as f64;
        let mean_k_ciro = mean(&mut chosen.iter().map(|c| c.0), chosen.len());
        let mean_k_delay = mean(&mut chosen.iter().map(|c| c.1), chosen.len());
        let mean_bgp = mean(&mut bgp.iter().map(|b| b.0), bgp.len());
        let mean_bgp_delay = mean(&mut bgp.iter().map(|b| b.1), bgp.len());
        Some(PairMetrics {
            src,
            dst,
            greenest_ciro_cidt: greenest_ciro,
            greenest_bgp_cidt: greenest_bgp,
            mean_bgp_cidt: mean_bgp,
            mean_k_greenest_ciro_cidt: mean_k_ciro,
            abs_diff: greenest_bgp - greenest_ciro,
            relative_ratio: ratio(greenest_ciro, greenest_bgp),
            relative_ratio_mean: ratio(mean_k_ciro, mean_bgp),
            propagation_delay_ciro_ms: delay_ciro,
            propagation_delay_bgp_ms: delay_bgp,
            mean_k_delay_ciro_ms: mean_k_delay,
            mean_delay_bgp_ms: mean_bgp_delay,
            latency_ratio: ratio(delay_ciro, delay_bgp),
            latency_ratio_mean: ratio(mean_k_delay, mean_bgp_delay),
            ciro_paths,
            bgp_paths: bgp.len(),
            ciro_hops,
            bgp_hops: bgp_best.len(),
        })
    }
}

/// Metrics for every ordered pair of distinct ASes, parallel over sources.
pub fn compute_pair_metrics(ctx: &EvalContext<'_, '_>, exec: Execution) -> PairTable {
    let ases: Vec<AsId> = ctx.topo.ases.keys().copied().collect();
    let per_src = exec.map(&ases, |&s| {
        let mut rows = Vec::new();
        let mut omitted = 0;
        for &d in &ases {
            if d == s {
                continue;
            }
            match ctx.pair(s, d) {
                Some(m) => rows.push(m),
                None => omitted += 1,
            }
        }
        (rows, omitted)
    });
    let mut table = PairTable { ases: ases.iter().copied().collect(), ..Default::default() };
    for (rows, omitted) in per_src {
        table.rows.extend(rows);
        table.omitted += omitted;
    }
    table
}

/// Annual outbound footprint of one source AS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsSavings {
    pub as_id: AsId,
    pub outbound_bytes_per_year: f64,
    /// Outbound volume toward destinations with pair metrics.
    pub covered_bytes_per_year: f64,
    pub bgp_g_per_year: f64,
    pub ciro_g_per_year: f64,
    pub savings_g_per_year: f64,
    /// `savings / bgp`; unset without BGP footprint.
    pub relative_reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Footprint {
    pub per_as: Vec<AsSavings>,
    pub total_bgp_g_per_year: f64,
    pub total_ciro_g_per_year: f64,
    pub total_savings_g_per_year: f64,
    /// Volume between pairs without metrics.
    pub uncovered_bytes_per_year: f64,
}

impl Footprint {
    pub fn relative_reduction(&self) -> Option<f64> {
        (self.total_bgp_g_per_year > 0.0).then(|| self.total_savings_g_per_year / self.total_bgp_g_per_year)
    }
}

/// Weights the greenest-path CIDT difference of every pair by its traffic.
pub fn carbon_footprint_savings(table: &PairTable, matrix: &TrafficMatrix) -> Result<Footprint, EvalError> {
    let index: BTreeMap<(AsId, AsId), &PairMetrics> = table.rows.iter().map(|m| ((m.src, m.dst), m)).collect();
    let mut per: BTreeMap<AsId, AsSavings> = table
        .ases
        .iter()
        .map(|a| {
            (*a, AsSavings {
                as_id: *a,
                outbound_bytes_per_year: 0.0,
                covered_bytes_per_year: 0.0,
                bgp_g_per_year: 0.0,
                ciro_g_per_year: 0.0,
                savings_g_per_year: 0.0,
                relative_reduction: None,
            })
        })
        .collect();
    let mut out = Footprint::default();
    for ((s, d), bytes) in matrix.iter() {
        if !table.ases.contains(&d) {
            return Err(EvalError::new(Stage::Metrics, format!("traffic destination AS {d} has no metrics")));
        }
        let entry = per
            .get_mut(&s)
            .ok_or_else(|| EvalError::new(Stage::Metrics, format!("traffic source AS {s} has no metrics")))?;
        entry.outbound_bytes_per_year += bytes;
        let Some(m) = index.get(&(s, d)) else {
            out.uncovered_bytes_per_year += bytes;
            continue;
        };
        let gbit = bytes * 8.0 / 1e9;
        entry.covered_bytes_per_year += bytes;
        entry.bgp_g_per_year += gbit * m.greenest_bgp_cidt;
        entry.ciro_g_per_year += gbit * m.greenest_ciro_cidt;
        entry.savings_g_per_year += gbit * m.abs_diff;
    }
    for e in per.values_mut() {
        e.relative_reduction = (e.bgp_g_per_year > 0.0).then(|| e.savings_g_per_year / e.bgp_g_per_year);
        out.total_bgp_g_per_year += e.bgp_g_per_year;
        out.total_ciro_g_per_year += e.ciro_g_per_year;
        out.total_savings_g_per_year += e.savings_g_per_year;
    }
    out.per_as = per.into_values().collect();
    Ok(out)
}
