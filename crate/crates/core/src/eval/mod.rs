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
//! Evaluation pipeline: topology, forecasts, beaconing, BGP, traffic,
//! pair metrics and reports. Stages run in that order; each failure carries
//! the stage it happened in.

mod config;
mod metrics;
mod report;

pub use config::{
    ExperimentConfig, ForecastConfig, ProviderKind, Seeds, TopologyConfig, TopologyFiles, TopologySource, TrafficConfig,
};
pub use metrics::{
    carbon_footprint_savings, compute_pair_metrics, path_delay_ms, ratio, AsSavings, EvalContext, Footprint, PairMetrics,
    PairTable, DELAY_NOTE, SIGNAL_SPEED_M_PER_S,
};
pub use report::{
    emit_reports, header_fields, percentile, read_json, read_pair_table, read_savings, write_cdf, write_pair_table,
    write_savings, BeaconStats, Distribution, FootprintSummary, Seeded, SizeStats, Summary, TrafficStats, PAIR_CDFS,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::beaconing::{write_transcript_csv, DisseminationConfig, Simulation};
use crate::bgp::{propagate, RoutingTables};
use crate::exec::Execution;
use crate::forecast::{format_hour, CieProvider, CsvProvider, DiurnalProvider, ForecastDatabase, StaticProvider};
use crate::model::g_per_bit_to_mg_per_gbit;
use crate::ids::{truncate_to_hour, AsId, Timestamp, ZoneId, HOURS};
use crate::topology::{
    build_intra_state, gen_synthetic, ingest, load_as_rel, prune_to_core, IntraDomainState, NeighborRole, Topology,
};
use crate::traffic::{
    aggregate_to_core, http_matrix, popularity_table, read_profiles, synth_profiles, video_matrix, write_profiles,
    AsProfile, TrafficMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Config,
    Topology,
    Forecast,
    Beaconing,
    Bgp,
    Traffic,
    Metrics,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Topology, Stage::Forecast, Stage::Beaconing, Stage::Bgp, Stage::Traffic, Stage::Metrics, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Topology => "topology",
            Stage::Forecast => "forecast",
            Stage::Beaconing => "beaconing",
            Stage::Bgp => "bgp",
            Stage::Traffic => "traffic",
            Stage::Metrics => "metrics",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage} stage: {message}")]
pub struct EvalError {
    pub stage: Stage,
    pub message: String,
}

impl EvalError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        EvalError { stage, message: message.to_string() }
    }
}

/// File names under the output directory.
pub mod files {
    pub const CONFIG: &str = "config.toml";
    pub const TOPOLOGY: &str = "topology.json";
    pub const CIE_FORECASTS: &str = "cie_forecasts.csv";
    pub const CIDT_FORECASTS: &str = "cidt_forecasts.csv";
    pub const BEACON_SUMMARY: &str = "beacon_summary.json";
    pub const BEACON_TRANSCRIPT: &str = "beacon_transcript.csv";
    pub const BGP_ROUTES: &str = "bgp_routes.csv";
    pub const PROFILES: &str = "as_profiles.csv";
    pub const TRAFFIC_MATRIX: &str = "traffic_matrix.csv";
    pub const TRAFFIC_SUMMARY: &str = "traffic_summary.json";
    pub const PAIR_METRICS: &str = "pair_metrics.csv";
    pub const AS_SAVINGS: &str = "as_savings.csv";
    pub const SUMMARY: &str = "summary.json";
}

/// The evaluated topology and, when it was pruned to a core, the full one.
#[derive(Debug, Clone)]
pub struct BuiltTopology {
    pub topo: Topology,
    pub full: Option<Topology>,
}

fn read_file(path: &Path, stage: Stage) -> Result<Vec<u8>, EvalError> {
    fs::read(path).map_err(|e| EvalError::new(stage, format!("{}: {e}", path.display())))
}

fn rows<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<Vec<T>, EvalError> {
    let bytes = read_file(path, Stage::Topology)?;
    ingest::read_rows(bytes.as_slice()).map_err(|e| EvalError::new(Stage::Topology, format!("{}: {e}", path.display())))
}

/// ASes without providers become the core.
fn relabel_core(topo: &mut Topology) {
    for node in topo.ases.values_mut() {
        node.core = !node.interfaces.values().any(|i| i.role == NeighborRole::Provider);
    }
}

pub fn build_topology(cfg: &ExperimentConfig, seeds: &Seeds) -> Result<BuiltTopology, EvalError> {
    let err = |e: &dyn fmt::Display| EvalError::new(Stage::Topology, e);
    let tc = &cfg.topology;
    let full = match tc.source {
        TopologySource::Synthetic => gen_synthetic(seeds.topology, tc.n_ases, &tc.synth).map_err(|e| err(&e))?,
        TopologySource::Json => {
            let path = tc.json.as_ref().ok_or_else(|| err(&"topology.json is required"))?;
            let bytes = read_file(path, Stage::Topology)?;
            Topology::from_json(&String::from_utf8_lossy(&bytes)).map_err(|e| err(&e))?
        }
        TopologySource::Files => {
            let f = tc.files.as_ref().ok_or_else(|| err(&"topology.files is required"))?;
            let graph = load_as_rel(read_file(&f.as_rel, Stage::Topology)?.as_slice()).map_err(|e| err(&e))?;
            let zones = ingest::zones_from_rows(&rows(&f.energy_mix)?, &rows(&f.centroids)?).map_err(|e| err(&e))?;
            let links = match &f.router_links {
                Some(p) => rows(p)?,
                None => Vec::new(),
            };
            ingest::assemble(&graph, zones, &rows(&f.interfaces)?, &rows(&f.routers)?, &links).map_err(|e| err(&e))?
        }
    };
    let Some(k) = tc.core_size else { return Ok(BuiltTopology { topo: full, full: None }) };
    let keep = prune_to_core(&full.as_graph(), k).map_err(|e| err(&e))?;
    let mut topo = full.restrict_to(&keep);
    relabel_core(&mut topo);
    topo.validate().map_err(|e| err(&e))?;
    Ok(BuiltTopology { topo, full: Some(full) })
}

/// Intra-domain states in ascending AS order.
pub fn build_states(topo: &Topology, exec: Execution) -> Result<Vec<IntraDomainState>, EvalError> {
    let nodes: Vec<_> = topo.ases.values().collect();
    exec.try_map(&nodes, |n| {
        build_intra_state(n, &|c| topo.zone_of(c)).map_err(|e| EvalError::new(Stage::Topology, format!("AS {}: {e}", n.id)))
    })
}

pub fn build_provider(cfg: &ExperimentConfig, seeds: &Seeds, topo: &Topology) -> Result<Box<dyn CieProvider>, EvalError> {
    Ok(match cfg.forecast.provider {
        ProviderKind::Static => Box::new(StaticProvider::from_topology(topo)),
        ProviderKind::Diurnal => {
            Box::new(DiurnalProvider::from_topology(topo, cfg.forecast.diurnal.clone(), seeds.forecast))
        }
        ProviderKind::Csv => {
            let path = cfg.forecast.csv.as_ref().ok_or_else(|| EvalError::new(Stage::Forecast, "forecast.csv is required"))?;
            let bytes = read_file(path, Stage::Forecast)?;
            Box::new(
                CsvProvider::load(bytes.as_slice(), &topo.zones)
                    .map_err(|e| EvalError::new(Stage::Forecast, format!("{}: {e}", path.display())))?,
            )
        }
    })
}

/// CIE of every zone for the hour containing `now`.
pub fn cie_at(topo: &Topology, provider: &dyn CieProvider, now: Timestamp) -> Result<BTreeMap<ZoneId, f64>, EvalError> {
    (0..topo.zones.len())
        .map(|i| {
            let z = ZoneId(i as u32);
            let v = provider.day_ahead(z, truncate_to_hour(now)).map_err(|e| EvalError::new(Stage::Forecast, e))?;
            Ok((z, v[0]))
        })
        .collect()
}

/// Zone CIE forecasts and every AS's CIDT forecast database at `now`.
pub fn write_forecasts(
    dir: &Path,
    seed: u64,
    topo: &Topology,
    states: &[IntraDomainState],
    provider: &dyn CieProvider,
    now: Timestamp,
) -> Result<Vec<PathBuf>, EvalError> {
    let err = |e: &dyn fmt::Display| EvalError::new(Stage::Forecast, e);
    let base = truncate_to_hour(now);
    let mut zones = CsvProvider::default();
    for i in 0..topo.zones.len() {
        let z = ZoneId(i as u32);
        zones.insert(z, base, provider.day_ahead(z, base).map_err(|e| err(&e))?);
    }
    let cie_path = dir.join(files::CIE_FORECASTS);
    report::write_csv_file(&cie_path, seed, &[], Stage::Forecast, |w| zones.write(&topo.zones, w).map_err(|e| e.to_string()))?;

    let mut dbs = Vec::with_capacity(states.len());
    for s in states {
        let mut db = ForecastDatabase::new();
        db.run_tcie_tick(s, provider, now).map_err(|e| err(&format!("AS {}: {e}", s.asn)))?;
        dbs.push((s.asn, db));
    }
    let cidt_path = dir.join(files::CIDT_FORECASTS);
    let extra = [("base_hour", format_hour(base)), ("unit", "mg_per_gbit".to_string())];
    report::write_csv_file(&cidt_path, seed, &extra, Stage::Forecast, |w| {
        let mut c = csv::Writer::from_writer(w);
        let mut header = vec!["as_id".to_string(), "ingress".to_string(), "egress".to_string()];
        header.extend((0..HOURS).map(|h| format!("h{h}")));
        c.write_record(&header).map_err(|e| e.to_string())?;
        for (asn, db) in &dbs {
            for ((i, e), v) in db.records() {
                let mut rec = vec![asn.to_string(), i.to_string(), e.to_string()];
                rec.extend(v.values().iter().map(|x| g_per_bit_to_mg_per_gbit(*x).to_string()));
                c.write_record(&rec).map_err(|e| e.to_string())?;
            }
        }
        c.flush().map_err(|e| e.to_string())
    })?;
    Ok(vec![cie_path, cidt_path])
}

/// Runs dissemination until stable. The beaconing seed comes from the master seed.
pub fn run_beaconing<'a>(
    topo: &'a Topology,
    states: &'a [IntraDomainState],
    config: &DisseminationConfig,
    seeds: &Seeds,
    provider: &dyn CieProvider,
    exec: Execution,
) -> Result<(Simulation<'a>, BeaconStats), EvalError> {
    let config = DisseminationConfig { seed: seeds.beaconing, ..config.clone() };
    let mut sim = Simulation::new(topo, states, config, exec).map_err(|e| EvalError::new(Stage::Beaconing, e))?;
    let run = sim.run_until_stable(provider);
    let stats = BeaconStats {
        rounds: run.rounds,
        converged: run.converged,
        emitted: sim.emitted_total(),
        evaluated_at: sim.last_round_time().unwrap_or(sim.config().start_time),
        stored_beacons: topo.ases.keys().filter_map(|a| sim.store(*a)).map(|s| s.len()).sum(),
        forecast_errors: sim.forecast_errors(),
        message_bytes: SizeStats::from_histogram(sim.message_sizes()),
    };
    Ok((sim, stats))
}

pub fn run_bgp(topo: &Topology, exec: Execution) -> Result<RoutingTables, EvalError> {
    propagate(&topo.as_graph(), exec).map_err(|e| EvalError::new(Stage::Bgp, e))
}

#[derive(Debug, Clone)]
pub struct BuiltTraffic {
    pub profiles: Vec<AsProfile>,
    /// Volumes between the evaluated ASes.
    pub matrix: TrafficMatrix,
    pub stats: TrafficStats,
}

/// HTTP(S) gravity matrix plus video services over the full AS set, summed
/// onto the core when the topology was pruned.
pub fn build_traffic(cfg: &ExperimentConfig, seeds: &Seeds, built: &BuiltTopology) -> Result<BuiltTraffic, EvalError> {
    let err = |e: &dyn fmt::Display| EvalError::new(Stage::Traffic, e);
    let tc = &cfg.traffic;
    let base = built.full.as_ref().unwrap_or(&built.topo);
    let profiles = match &tc.profiles {
        Some(p) => read_profiles(read_file(p, Stage::Traffic)?.as_slice()).map_err(|e| err(&format!("{}: {e}", p.display())))?,
        None => synth_profiles(base, seeds.traffic),
    };
    let mut seen = BTreeSet::new();
    for p in &profiles {
        if !base.ases.contains_key(&p.as_id) || !seen.insert(p.as_id) {
            return Err(err(&format!("profile for AS {} is unknown or duplicated", p.as_id)));
        }
    }
    let popularity = popularity_table(&profiles, tc.zipf_slope, seeds.traffic).map_err(|e| err(&e))?;
    let (http, factor) = http_matrix(&profiles, &popularity, tc.d_http, tc.http_bytes_per_year).map_err(|e| err(&e))?;
    let mut video_services: Vec<&AsProfile> = profiles.iter().filter(|p| p.video).collect();
    video_services.sort_by_key(|p| (p.popularity_rank.unwrap_or(u32::MAX), p.as_id));
    let services: Vec<(AsId, f64)> = video_services.iter().zip(&tc.video_shares).map(|(p, s)| (p.as_id, *s)).collect();
    let video = video_matrix(&profiles, &services, tc.internet_bytes_per_year).map_err(|e| err(&e))?;
    let mut matrix = http.clone();
    matrix.merge(&video);
    let mut stats = TrafficStats {
        http_bytes_per_year: http.total(),
        http_scale_factor: factor,
        video_bytes_per_year: video.total(),
        total_bytes_per_year: matrix.total(),
        aggregated_to_core: false,
        dropped_intra_core_bytes_per_year: 0.0,
    };
    if built.full.is_some() {
        let graph = base.as_graph();
        let core: BTreeSet<AsId> = built.topo.ases.keys().copied().collect();
        let cones: BTreeMap<AsId, BTreeSet<AsId>> = core.iter().map(|c| (*c, graph.customer_cone(*c))).collect();
        let agg = aggregate_to_core(&matrix, &core, &cones).map_err(|e| err(&e))?;
        matrix = agg.matrix;
        stats.aggregated_to_core = true;
        stats.dropped_intra_core_bytes_per_year = agg.dropped_intra_core;
    }
    Ok(BuiltTraffic { profiles, matrix, stats })
}

fn io(stage: Stage, path: &Path) -> impl Fn(std::io::Error) -> EvalError + '_ {
    move |e| EvalError::new(stage, format!("{}: {e}", path.display()))
}

/// Files written by [`run_stages`], plus the summary when reports ran.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub files: Vec<PathBuf>,
    pub summary: Option<Summary>,
}

/// Runs what `wanted` needs and writes the outputs of the wanted stages
/// under the configured directory. A lone [`Stage::Report`] reads the
/// metric files of an earlier run from that directory.
pub fn run_stages(cfg: &ExperimentConfig, wanted: &BTreeSet<Stage>) -> Result<StageOutput, EvalError> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(io(Stage::Config, dir))?;
    let seeds = cfg.seeds();
    let exec = cfg.execution;
    let mut out = StageOutput { files: Vec::new(), summary: None };
    let want = |s: Stage| wanted.contains(&s);

    let cfg_path = dir.join(files::CONFIG);
    fs::write(&cfg_path, format!("# seed={}\n{}", cfg.seed, cfg.to_toml())).map_err(io(Stage::Config, &cfg_path))?;
    out.files.push(cfg_path);

    if wanted.iter().all(|s| *s == Stage::Report) {
        if want(Stage::Report) {
            let table = read_pair_table(&dir.join(files::PAIR_METRICS))?;
            let savings_path = dir.join(files::AS_SAVINGS);
            let savings = if savings_path.exists() { Some(read_savings(&savings_path)?) } else { None };
            let beacon = optional_json::<BeaconStats>(&dir.join(files::BEACON_SUMMARY))?;
            let traffic = optional_json::<TrafficStats>(&dir.join(files::TRAFFIC_SUMMARY))?;
            let (summary, written) = emit_reports(dir, cfg.seed, &table, savings.as_deref(), beacon, traffic)?;
            out.files.extend(written);
            out.summary = Some(summary);
        }
        return Ok(out);
    }

    let built = build_topology(cfg, &seeds)?;
    let topo = &built.topo;
    if want(Stage::Topology) {
        let p = dir.join(files::TOPOLOGY);
        fs::write(&p, topo.to_json()).map_err(io(Stage::Topology, &p))?;
        out.files.push(p);
    }
    let metrics = want(Stage::Metrics) || want(Stage::Report);
    let needs_sim = want(Stage::Beaconing) || metrics;
    if !(want(Stage::Forecast) || needs_sim || want(Stage::Bgp) || want(Stage::Traffic)) {
        return Ok(out);
    }
    let states = if want(Stage::Forecast) || needs_sim { build_states(topo, exec)? } else { Vec::new() };
    let provider = build_provider(cfg, &seeds, topo)?;
    if want(Stage::Forecast) {
        out.files.extend(write_forecasts(dir, cfg.seed, topo, &states, provider.as_ref(), cfg.beaconing.start_time)?);
    }

    let sim = if needs_sim {
        let (sim, stats) = run_beaconing(topo, &states, &cfg.beaconing, &seeds, provider.as_ref(), exec)?;
        if want(Stage::Beaconing) {
            let p = dir.join(files::BEACON_SUMMARY);
            report::write_json(&p, cfg.seed, &stats, Stage::Beaconing)?;
            out.files.push(p);
            if cfg.beaconing.record_transcript {
                let p = dir.join(files::BEACON_TRANSCRIPT);
                report::write_csv_file(&p, cfg.seed, &[], Stage::Beaconing, |w| {
                    write_transcript_csv(sim.transcript(), w).map_err(|e| e.to_string())
                })?;
                out.files.push(p);
            }
        }
        Some((sim, stats))
    } else {
        None
    };

    let tables = if want(Stage::Bgp) || metrics { Some(run_bgp(topo, exec)?) } else { None };
    if let (true, Some(t)) = (want(Stage::Bgp), &tables) {
        let p = dir.join(files::BGP_ROUTES);
        report::write_csv_file(&p, cfg.seed, &[], Stage::Bgp, |w| t.write_csv(w).map_err(|e| e.to_string()))?;
        out.files.push(p);
    }

    let traffic = if want(Stage::Traffic) || metrics { Some(build_traffic(cfg, &seeds, &built)?) } else { None };
    if let (true, Some(t)) = (want(Stage::Traffic), &traffic) {
        let p = dir.join(files::PROFILES);
        report::write_csv_file(&p, cfg.seed, &[], Stage::Traffic, |w| write_profiles(&t.profiles, w).map_err(|e| e.to_string()))?;
        out.files.push(p);
        let p = dir.join(files::TRAFFIC_MATRIX);
        report::write_csv_file(&p, cfg.seed, &[], Stage::Traffic, |w| t.matrix.write_csv(w).map_err(|e| e.to_string()))?;
        out.files.push(p);
        let p = dir.join(files::TRAFFIC_SUMMARY);
        report::write_json(&p, cfg.seed, &t.stats, Stage::Traffic)?;
        out.files.push(p);
    }

    if !metrics {
        return Ok(out);
    }
    let (sim, beacon_stats) = sim.expect("simulated");
    let tables = tables.expect("routed");
    let traffic = traffic.expect("built");
    let ctx = EvalContext {
        topo,
        graph: topo.as_graph(),
        states: states.iter().map(|s| (s.asn, s)).collect(),
        sim: &sim,
        tables: &tables,
        now: beacon_stats.evaluated_at,
        cie: cie_at(topo, provider.as_ref(), beacon_stats.evaluated_at)?,
    };
    let table = compute_pair_metrics(&ctx, exec);
    let footprint = carbon_footprint_savings(&table, &traffic.matrix)?;
    if want(Stage::Metrics) {
        let p = dir.join(files::PAIR_METRICS);
        write_pair_table(&p, cfg.seed, &table)?;
        out.files.push(p);
        let p = dir.join(files::AS_SAVINGS);
        write_savings(&p, cfg.seed, &footprint.per_as)?;
        out.files.push(p);
    }
    if want(Stage::Report) {
        let (summary, written) =
            emit_reports(dir, cfg.seed, &table, Some(&footprint.per_as), Some(beacon_stats), Some(traffic.stats))?;
        out.files.extend(written);
        out.summary = Some(summary);
    }
    Ok(out)
}

fn optional_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<Option<T>, EvalError> {
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(read_json::<T>(path, Stage::Report)?.body))
}

/// Every stage, writing all outputs.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<StageOutput, EvalError> {
    run_stages(cfg, &Stage::ALL.into_iter().collect())
}
