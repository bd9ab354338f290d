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
//! Pair metrics and pipeline plumbing on hand-made and small synthetic
//! topologies.

use std::collections::BTreeSet;
use std::path::PathBuf;

use ciro_core::beaconing::{DisseminationConfig, Mode, Simulation};
use ciro_core::bgp::{propagate, RoutingTables};
use ciro_core::endpoint::AsHop;
use ciro_core::eval::{
    cie_at, path_delay_ms, ratio, run_pipeline, run_stages, EvalContext, ExperimentConfig, PairMetrics, ProviderKind,
    Stage, TopologyFiles, TopologySource,
};
use ciro_core::exec::Execution;
use ciro_core::forecast::StaticProvider;
use ciro_core::ids::{AsId, InterfaceId};
use ciro_core::model::{hop_cidt, EnergyMix, EnergySource};
use ciro_core::topology::ingest::from_as_links;
use ciro_core::topology::{
    build_intra_state, great_circle_km, zones_from_specs, GeoCoord, IntraDomainState, Relationship, Topology, ZoneSpec,
};

const P2C: Relationship = Relationship::ProviderToCustomer;

fn zone(name: &str, lat: f64, lon: f64, source: EnergySource) -> ZoneSpec {
    ZoneSpec { name: name.into(), lat, lon, mix: EnergyMix::new([(source, 1.0)]).unwrap() }
}

fn at(lat: f64, lon: f64) -> GeoCoord {
    GeoCoord::new(lat, lon).unwrap()
}

fn states(t: &Topology) -> Vec<IntraDomainState> {
    t.ases.values().map(|n| build_intra_state(n, &|c| t.zone_of(c)).unwrap()).collect()
}

struct Run {
    topo: Topology,
    states: Vec<IntraDomainState>,
    tables: RoutingTables,
}

impl Run {
    fn new(topo: Topology) -> Self {
        let states = states(&topo);
        let tables = propagate(&topo.as_graph(), Execution::Sequential).unwrap();
        Run { topo, states, tables }
    }

    fn pair(&self, config: DisseminationConfig, src: u64, dst: u64) -> Option<PairMetrics> {
        let provider = StaticProvider::from_topology(&self.topo);
        let mut sim = Simulation::new(&self.topo, &self.states, config, Execution::Sequential).unwrap();
        sim.run_until_stable(&provider);
        let now = sim.last_round_time().unwrap();
        let ctx = EvalContext {
            topo: &self.topo,
            graph: self.topo.as_graph(),
            states: self.states.iter().map(|s| (s.asn, s)).collect(),
            sim: &sim,
            tables: &self.tables,
            now,
            cie: cie_at(&self.topo, &provider, now).unwrap(),
        };
        ctx.pair(AsId(src), AsId(dst))
    }
}

/// S=1 and D=4 both buy transit from A=2 (coal) and B=3 (wind).
fn diamond() -> Topology {
    let zones = zones_from_specs(&[
        zone("coal", 50.0, 10.0, EnergySource::Coal),
        zone("wind", -50.0, 10.0, EnergySource::Wind),
    ]);
    let ases = [(AsId(1), at(0.0, 0.0)), (AsId(2), at(50.0, 10.0)), (AsId(3), at(-50.0, 10.0)), (AsId(4), at(0.0, 20.0))];
    let links = [(AsId(2), AsId(1), P2C), (AsId(3), AsId(1), P2C), (AsId(2), AsId(4), P2C), (AsId(3), AsId(4), P2C)];
    single_router(from_as_links(zones, &ases, &links).unwrap(), 1)
}

/// Moves all interfaces of `asn` onto its first router, so that BGP offers
/// it a single route.
fn single_router(mut topo: Topology, asn: u64) -> Topology {
    for i in topo.ases.get_mut(&AsId(asn)).unwrap().interfaces.values_mut() {
        i.border_router = 0;
    }
    topo.validate().unwrap();
    topo
}

/// Hop CIDT in g/Gbit through the AS's two interfaces, straight from the model.
fn transit_g_per_gbit(run: &Run, asn: u64) -> f64 {
    let node = &run.topo.ases[&AsId(asn)];
    let ids: Vec<InterfaceId> = node.interfaces.keys().copied().collect();
    let state = run.states.iter().find(|s| s.asn == AsId(asn)).unwrap();
    hop_cidt(&state.paths(ids[0], ids[1]).unwrap(), &run.topo.zone_cie()).unwrap() * 1e9
}

#[test]
fn diamond_prefers_the_wind_branch() {
    let run = Run::new(diamond());
    let coal = transit_g_per_gbit(&run, 2);
    let wind = transit_g_per_gbit(&run, 3);
    assert!(coal > 10.0 * wind);
    let m = run.pair(DisseminationConfig::default(), 1, 4).unwrap();
    // BGP breaks the tie between equal provider routes toward the lower ASN
    assert!((m.greenest_bgp_cidt - coal).abs() <= 1e-9 * coal);
    assert!((m.greenest_ciro_cidt - wind).abs() <= 1e-9 * coal);
    assert!((m.abs_diff - (coal - wind)).abs() <= 1e-9 * coal);
    assert!((m.relative_ratio.unwrap() - wind / coal).abs() < 1e-9);
    assert_eq!((m.ciro_hops, m.bgp_hops), (3, 3));
    assert_eq!(m.ciro_paths, 2);
}

/// Core ASes 2 (coal), 3 and 5 (wind) peer with each other; S=1 buys
/// transit from 2 and 3, D=4 from 5.
#[test]
fn hierarchical_mode_combines_up_core_and_down_segments() {
    let zones = zones_from_specs(&[
        zone("coal", 50.0, 10.0, EnergySource::Coal),
        zone("wind", -50.0, 10.0, EnergySource::Wind),
    ]);
    let p2p = Relationship::PeerToPeer;
    let ases = [
        (AsId(1), at(0.0, 0.0)),
        (AsId(2), at(50.0, 10.0)),
        (AsId(3), at(-50.0, 10.0)),
        (AsId(4), at(0.0, 20.0)),
        (AsId(5), at(-50.0, 12.0)),
    ];
    let links = [
        (AsId(2), AsId(1), P2C),
        (AsId(3), AsId(1), P2C),
        (AsId(5), AsId(4), P2C),
        (AsId(2), AsId(3), p2p),
        (AsId(3), AsId(5), p2p),
        (AsId(2), AsId(5), p2p),
    ];
    let run = Run::new(single_router(from_as_links(zones, &ases, &links).unwrap(), 1));
    let config = DisseminationConfig { mode: Mode::Hierarchical, ..Default::default() };
    let m = run.pair(config, 1, 4).unwrap();
    let (coal, wind) = (transit_g_per_gbit(&run, 2), transit_g_per_gbit(&run, 3));
    let wind5 = transit_g_per_gbit(&run, 5);
    assert!((m.greenest_ciro_cidt - (wind + wind5)).abs() <= 1e-9 * coal);
    assert!((m.greenest_bgp_cidt - (coal + wind5)).abs() <= 1e-9 * coal);
    assert_eq!(m.ciro_hops, 4);
}

#[test]
fn adjacent_pair_has_unit_ratios_and_great_circle_delay() {
    let zones = zones_from_specs(&[zone("wind", 0.0, 0.0, EnergySource::Wind)]);
    let topo = from_as_links(zones, &[(AsId(1), at(0.0, 0.0)), (AsId(2), at(0.0, 90.0))], &[(AsId(1), AsId(2), P2C)]).unwrap();
    let run = Run::new(topo);
    let m = run.pair(DisseminationConfig::default(), 1, 2).unwrap();
    assert_eq!((m.abs_diff, m.relative_ratio, m.latency_ratio), (0.0, Some(1.0), Some(1.0)));
    // a quarter meridian of 10007.5 km at 2e8 m/s
    let km = great_circle_km(&at(0.0, 0.0), &at(0.0, 90.0));
    assert!((km - 10007.5).abs() < 0.1);
    assert!((m.propagation_delay_ciro_ms - 50.0375).abs() < 1e-3);
}

#[test]
fn detour_delay_ratio() {
    let zones = zones_from_specs(&[zone("wind", 0.0, 0.0, EnergySource::Wind)]);
    let ases = [(AsId(1), at(0.0, 0.0)), (AsId(2), at(0.0, 15.0)), (AsId(3), at(0.0, 10.0))];
    let topo = from_as_links(zones, &ases, &[(AsId(1), AsId(3), P2C), (AsId(1), AsId(2), P2C), (AsId(2), AsId(3), P2C)]).unwrap();
    let hop = |a: u64, i: u16, e: u16| AsHop { as_id: AsId(a), ingress: InterfaceId(i), egress: InterfaceId(e) };
    let egress = |a: u64, to: u64| topo.ases[&AsId(a)].interfaces_to(AsId(to)).next().unwrap().id.0;
    let ingress = |a: u64, from: u64| topo.ases[&AsId(a)].interfaces_to(AsId(from)).next().unwrap().id.0;
    let direct = [hop(1, 0, egress(1, 3)), hop(3, ingress(3, 1), 0)];
    let detour = [hop(1, 0, egress(1, 2)), hop(2, ingress(2, 1), egress(2, 3)), hop(3, ingress(3, 2), 0)];
    let d = path_delay_ms(&topo, &direct).unwrap();
    let r = ratio(path_delay_ms(&topo, &detour).unwrap(), d).unwrap();
    assert!((r - 2.0).abs() < 1e-9, "{r}");
    assert_eq!(ratio(d, d), Some(1.0));
}

#[test]
fn near_full_retention_never_loses_to_bgp() {
    let topo = ciro_core::topology::gen_synthetic(4, 30, &Default::default()).unwrap();
    let run = Run::new(topo);
    let config = DisseminationConfig { retention_n: 64, max_rounds: 200, ..Default::default() };
    let provider = StaticProvider::from_topology(&run.topo);
    let mut sim = Simulation::new(&run.topo, &run.states, config, Execution::Sequential).unwrap();
    assert!(sim.run_until_stable(&provider).converged);
    let now = sim.last_round_time().unwrap();
    let ctx = EvalContext {
        topo: &run.topo,
        graph: run.topo.as_graph(),
        states: run.states.iter().map(|s| (s.asn, s)).collect(),
        sim: &sim,
        tables: &run.tables,
        now,
        cie: cie_at(&run.topo, &provider, now).unwrap(),
    };
    let table = ciro_core::eval::compute_pair_metrics(&ctx, Execution::Sequential);
    assert_eq!(table.omitted, 0);
    for m in &table.rows {
        // 0.5 mg/Gbit of quantization per transit hop on either side
        let slack = 0.5e-3 * (m.ciro_hops + m.bgp_hops) as f64;
        assert!(m.greenest_ciro_cidt <= m.greenest_bgp_cidt + slack, "{m:?}");
    }
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("ciro-eval-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn small(name: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { seed: 3, output_dir: scratch(name), ..Default::default() };
    cfg.topology.n_ases = 25;
    cfg
}

#[test]
fn report_stage_reproduces_the_pipeline_summary() {
    let cfg = small("report");
    let full = run_pipeline(&cfg).unwrap();
    let summary_path = cfg.output_dir.join("summary.json");
    let first = std::fs::read(&summary_path).unwrap();
    let again = run_stages(&cfg, &BTreeSet::from([Stage::Report])).unwrap();
    assert_eq!(again.summary, full.summary);
    assert_eq!(std::fs::read(&summary_path).unwrap(), first);
    for f in &full.files {
        let text = std::fs::read_to_string(f).unwrap();
        let seeded = text.starts_with("# seed=3") || text.contains("\"seed\": 3") || f.ends_with("topology.json");
        assert!(seeded, "{} lacks the seed", f.display());
    }
    std::fs::remove_dir_all(&cfg.output_dir).unwrap();
}

#[test]
fn json_topology_round_trips_through_the_pipeline() {
    let cfg = small("json-a");
    run_stages(&cfg, &BTreeSet::from([Stage::Topology, Stage::Metrics])).unwrap();
    let mut from_json = small("json-b");
    from_json.topology.source = TopologySource::Json;
    from_json.topology.json = Some(cfg.output_dir.join("topology.json"));
    run_stages(&from_json, &BTreeSet::from([Stage::Metrics])).unwrap();
    let a = std::fs::read(cfg.output_dir.join("pair_metrics.csv")).unwrap();
    let b = std::fs::read(from_json.output_dir.join("pair_metrics.csv")).unwrap();
    assert_eq!(a, b);
    std::fs::remove_dir_all(&cfg.output_dir).unwrap();
    std::fs::remove_dir_all(&from_json.output_dir).unwrap();
}

#[test]
fn missing_inputs_name_their_stage() {
    let missing = PathBuf::from("/nonexistent/ciro/input.csv");
    let mut cfg = small("missing");
    cfg.topology.source = TopologySource::Files;
    cfg.topology.files = Some(TopologyFiles {
        as_rel: missing.clone(),
        interfaces: missing.clone(),
        routers: missing.clone(),
        router_links: None,
        energy_mix: missing.clone(),
        centroids: missing.clone(),
    });
    assert_eq!(run_pipeline(&cfg).unwrap_err().stage, Stage::Topology);

    let mut cfg = small("missing");
    cfg.forecast.provider = ProviderKind::Csv;
    cfg.forecast.csv = Some(missing.clone());
    assert_eq!(run_pipeline(&cfg).unwrap_err().stage, Stage::Forecast);

    let mut cfg = small("missing");
    cfg.traffic.profiles = Some(missing);
    let e = run_pipeline(&cfg).unwrap_err();
    assert_eq!(e.stage, Stage::Traffic);
    assert!(e.to_string().starts_with("traffic stage: "));
    let _ = std::fs::remove_dir_all(&cfg.output_dir);
}

#[test]
fn pruned_core_run_aggregates_traffic() {
    let mut cfg = small("core");
    cfg.topology.n_ases = 80;
    cfg.topology.core_size = Some(20);
    cfg.beaconing.mode = Mode::Hierarchical;
    let out = run_pipeline(&cfg).unwrap();
    let s = out.summary.unwrap();
    let t = s.traffic.unwrap();
    assert!(t.aggregated_to_core);
    assert_eq!(s.pairs_evaluated + s.pairs_omitted, 20 * 19);
    let fp = s.footprint.unwrap();
    let moved = fp.uncovered_bytes_per_year
        + std::fs::read_to_string(cfg.output_dir.join("as_savings.csv"))
            .unwrap()
            .lines()
            .skip(2)
            .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
            .sum::<f64>();
    let expected = t.total_bytes_per_year - t.dropped_intra_core_bytes_per_year;
    assert!((moved - expected).abs() <= 1e-9 * expected, "{moved} vs {expected}");
    std::fs::remove_dir_all(&cfg.output_dir).unwrap();
}
