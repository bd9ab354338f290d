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
//! `ciro`: runs the evaluation pipeline or any single stage of it.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ciro_core::eval::{run_stages, ExperimentConfig, Stage, StageOutput};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ciro", version, about = "Carbon-intelligent inter-domain routing experiments")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    execution: Option<Exec>,
    /// Number of synthetic ASes.
    #[arg(long, global = true)]
    n_ases: Option<usize>,
    #[arg(long, global = true)]
    core_size: Option<usize>,
    #[arg(long, global = true)]
    provider: Option<String>,
    /// Flat or hierarchical dissemination.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Beacons kept per origin and interface.
    #[arg(long, global = true)]
    retention: Option<usize>,
    #[arg(long, global = true)]
    max_rounds: Option<usize>,
    /// Any config key, e.g. `--set beaconing.export=\"flood\"`. Values are
    /// parsed as TOML and fall back to strings.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Print the summary JSON to stdout when reports are produced.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Exec {
    Sequential,
    Parallel,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build (or load and prune) the topology and write topology.json.
    Topology,
    /// Write zone CIE forecasts and every AS's CIDT forecasts.
    Forecast,
    /// Run beacon dissemination and write its statistics.
    Beacon,
    /// Compute BGP routing tables.
    Bgp,
    /// Build AS profiles and the traffic matrix.
    Traffic,
    /// Compute pair metrics and per-AS footprint savings.
    Eval,
    /// Write CDFs and summary.json from the metric files in the output directory.
    Report,
    /// All stages.
    Pipeline,
}

impl Command {
    fn stages(self) -> BTreeSet<Stage> {
        match self {
            Command::Topology => [Stage::Topology].into(),
            Command::Forecast => [Stage::Forecast].into(),
            Command::Beacon => [Stage::Beaconing].into(),
            Command::Bgp => [Stage::Bgp].into(),
            Command::Traffic => [Stage::Traffic].into(),
            Command::Eval => [Stage::Metrics].into(),
            Command::Report => [Stage::Report].into(),
            Command::Pipeline => Stage::ALL.into_iter().collect(),
        }
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).with_context(|| format!("empty key in {key:?}"))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("{key}: {p} is not a table"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// File config, then named flags, then `--set` overrides.
fn load_config(opts: &Opts) -> Result<ExperimentConfig> {
    let mut table: toml::Table = match &opts.config {
        Some(p) => {
            let s = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            s.parse().with_context(|| format!("parsing {}", p.display()))?
        }
        None => toml::Table::new(),
    };
    let int = |v: u64| toml::Value::Integer(v as i64);
    let mut flags: Vec<(&str, toml::Value)> = Vec::new();
    if let Some(s) = opts.seed {
        flags.push(("seed", int(s)));
    }
    if let Some(d) = &opts.output_dir {
        flags.push(("output_dir", toml::Value::String(d.display().to_string())));
    }
    if let Some(e) = opts.execution {
        let name = match e {
            Exec::Sequential => "sequential",
            Exec::Parallel => "parallel",
        };
        flags.push(("execution", toml::Value::String(name.into())));
    }
    if let Some(n) = opts.n_ases {
        flags.push(("topology.n_ases", int(n as u64)));
    }
    if let Some(k) = opts.core_size {
        flags.push(("topology.core_size", int(k as u64)));
    }
    if let Some(p) = &opts.provider {
        flags.push(("forecast.provider", toml::Value::String(p.clone())));
    }
    if let Some(m) = &opts.mode {
        flags.push(("beaconing.mode", toml::Value::String(m.clone())));
    }
    if let Some(n) = opts.retention {
        flags.push(("beaconing.retention_n", int(n as u64)));
    }
    if let Some(n) = opts.max_rounds {
        flags.push(("beaconing.max_rounds", int(n as u64)));
    }
    for (k, v) in flags {
        set_path(&mut table, k, v)?;
    }
    for s in &opts.sets {
        let (k, v) = s.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {s:?}"))?;
        set_path(&mut table, k.trim(), parse_value(v.trim()))?;
    }
    Ok(ExperimentConfig::from_toml(&toml::to_string(&table)?)?)
}

fn print_outcome(out: &StageOutput, json: bool) -> Result<()> {
    for f in &out.files {
        eprintln!("wrote {}", f.display());
    }
    let Some(s) = &out.summary else { return Ok(()) };
    if json {
        println!("{}", serde_json::to_string_pretty(s)?);
        return Ok(());
    }
    let median = |name: &str| {
        s.distributions.get(name).and_then(|d| d.as_ref()).map_or("n/a".to_string(), |d| format!("{:.4}", d.p50))
    };
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.1}%", 100.0 * v));
    println!("pairs evaluated: {} (omitted {})", s.pairs_evaluated, s.pairs_omitted);
    println!("median CIDT greenest CIRo / BGP (g/Gbit): {} / {}", median("greenest_ciro_cidt"), median("greenest_bgp_cidt"));
    println!("median relative CIDT (CIRo/BGP): {}", median("relative_ratio"));
    println!("pairs with latency ratio <= 1: {}", pct(s.fraction_pairs_latency_ratio_at_most_one));
    if let Some(f) = &s.footprint {
        println!("sources with positive footprint reduction: {}", pct(f.fraction_sources_positive_reduction));
        println!(
            "annual footprint BGP {:.1} t, CIRo {:.1} t, savings {:.1} t ({})",
            f.total_bgp_t_per_year,
            f.total_ciro_t_per_year,
            f.total_savings_t_per_year,
            pct(f.relative_reduction)
        );
    }
    if let Some(b) = &s.beaconing {
        println!(
            "beaconing: {} rounds (converged: {}), {} messages, mean size {:.0} B",
            b.rounds, b.converged, b.emitted, b.message_bytes.mean
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli.opts)?;
    let start = Instant::now();
    let out = run_stages(&cfg, &cli.command.stages())?;
    print_outcome(&out, cli.opts.json)?;
    eprintln!("done in {:.1} s (seed {})", start.elapsed().as_secs_f64(), cfg.seed);
    Ok(())
}
