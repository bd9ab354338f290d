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
//! CDF files, percentile summaries and the CSV/JSON layouts of the
//! evaluation outputs. Every file starts with the run's seed: a `# seed=`
//! line for CSV, a `seed` field for JSON.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{AsSavings, PairMetrics, PairTable, DELAY_NOTE};
use super::{EvalError, Stage};
use crate::ids::AsId;

/// Linear interpolation between closest ranks over sorted values, `p` in
/// [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = (sorted.len() - 1) as f64 * p.clamp(0.0, 100.0) / 100.0;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub min: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
    pub mean: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p| percentile(&v, p);
        Some(Distribution {
            count: v.len(),
            min: *v.first()?,
            p5: q(5.0)?,
            p25: q(25.0)?,
            p50: q(50.0)?,
            p75: q(75.0)?,
            p95: q(95.0)?,
            max: *v.last()?,
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

/// Serialized beacon lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SizeStats {
    pub count: u64,
    pub total_bytes: u64,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

impl SizeStats {
    pub fn from_histogram(hist: &BTreeMap<usize, u64>) -> Self {
        let count: u64 = hist.values().sum();
        if count == 0 {
            return SizeStats::default();
        }
        let total: u64 = hist.iter().map(|(s, n)| *s as u64 * n).sum();
        // the value at sorted position i, without expanding the histogram
        let at = |i: u64| {
            let mut seen = 0;
            for (s, n) in hist {
                seen += n;
                if i < seen {
                    return *s as f64;
                }
            }
            unreachable!("position within count")
        };
        let q = |p: f64| {
            let pos = (count - 1) as f64 * p / 100.0;
            let (lo, hi) = (pos.floor() as u64, pos.ceil() as u64);
            at(lo) + (at(hi) - at(lo)) * (pos - lo as f64)
        };
        SizeStats {
            count,
            total_bytes: total,
            min: *hist.keys().next().expect("non-empty"),
            max: *hist.keys().next_back().expect("non-empty"),
            mean: total as f64 / count as f64,
            p50: q(50.0),
            p95: q(95.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeaconStats {
    pub rounds: usize,
    pub converged: bool,
    pub emitted: usize,
    pub evaluated_at: u64,
    pub stored_beacons: usize,
    pub forecast_errors: usize,
    pub message_bytes: SizeStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficStats {
    pub http_bytes_per_year: f64,
    pub http_scale_factor: f64,
    pub video_bytes_per_year: f64,
    pub total_bytes_per_year: f64,
    pub aggregated_to_core: bool,
    pub dropped_intra_core_bytes_per_year: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintSummary {
    pub sources: usize,
    pub fraction_sources_positive_reduction: Option<f64>,
    pub fraction_sources_reduction_at_least_half: Option<f64>,
    pub total_bgp_t_per_year: f64,
    pub total_ciro_t_per_year: f64,
    pub total_savings_t_per_year: f64,
    pub relative_reduction: Option<f64>,
    pub uncovered_bytes_per_year: f64,
}

impl FootprintSummary {
    pub fn of(per_as: &[AsSavings]) -> Self {
        let rel: Vec<f64> = per_as.iter().filter_map(|a| a.relative_reduction).collect();
        let frac = |f: &dyn Fn(f64) -> bool| {
            (!rel.is_empty()).then(|| rel.iter().filter(|r| f(**r)).count() as f64 / rel.len() as f64)
        };
        let bgp: f64 = per_as.iter().map(|a| a.bgp_g_per_year).sum();
        let ciro: f64 = per_as.iter().map(|a| a.ciro_g_per_year).sum();
        let savings: f64 = per_as.iter().map(|a| a.savings_g_per_year).sum();
        FootprintSummary {
            sources: rel.len(),
            fraction_sources_positive_reduction: frac(&|r| r > 0.0),
            fraction_sources_reduction_at_least_half: frac(&|r| r >= 0.5),
            total_bgp_t_per_year: bgp / 1e6,
            total_ciro_t_per_year: ciro / 1e6,
            total_savings_t_per_year: savings / 1e6,
            relative_reduction: (bgp > 0.0).then(|| savings / bgp),
            uncovered_bytes_per_year: per_as.iter().map(|a| a.outbound_bytes_per_year - a.covered_bytes_per_year).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub pairs_evaluated: usize,
    pub pairs_omitted: usize,
    pub distributions: BTreeMap<String, Option<Distribution>>,
    pub fraction_pairs_ratio_below_one: Option<f64>,
    pub fraction_pairs_latency_ratio_at_most_one: Option<f64>,
    pub fraction_pairs_latency_ratio_mean_at_most_one: Option<f64>,
    pub latency_note: String,
    pub footprint: Option<FootprintSummary>,
    pub beaconing: Option<BeaconStats>,
    pub traffic: Option<TrafficStats>,
}

/// JSON body with the seed in front.
#[derive(Debug, Serialize, Deserialize)]
pub struct Seeded<T> {
    pub seed: u64,
    #[serde(flatten)]
    pub body: T,
}

fn io_err(stage: Stage, path: &Path) -> impl Fn(std::io::Error) -> EvalError + '_ {
    move |e| EvalError::new(stage, format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, seed: u64, body: &T, stage: Stage) -> Result<(), EvalError> {
    let s = serde_json::to_string_pretty(&Seeded { seed, body }).map_err(|e| EvalError::new(stage, e))?;
    fs::write(path, s + "\n").map_err(io_err(stage, path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: Stage) -> Result<Seeded<T>, EvalError> {
    let s = fs::read_to_string(path).map_err(io_err(stage, path))?;
    serde_json::from_str(&s).map_err(|e| EvalError::new(stage, format!("{}: {e}", path.display())))
}

/// Writes a CSV file whose first line is `# seed=<seed>` plus `extra`
/// key=value pairs.
pub fn write_csv_file(
    path: &Path,
    seed: u64,
    extra: &[(&str, String)],
    stage: Stage,
    body: impl FnOnce(&mut dyn Write) -> Result<(), String>,
) -> Result<(), EvalError> {
    let f = fs::File::create(path).map_err(io_err(stage, path))?;
    let mut w = std::io::BufWriter::new(f);
    let mut line = format!("# seed={seed}");
    for (k, v) in extra {
        line.push_str(&format!(" {k}={v}"));
    }
    writeln!(w, "{line}").map_err(io_err(stage, path))?;
    body(&mut w).map_err(|e| EvalError::new(stage, format!("{}: {e}", path.display())))?;
    w.flush().map_err(io_err(stage, path))
}

/// Key=value pairs of the leading comment lines.
pub fn header_fields(input: impl Read) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for line in BufReader::new(input).lines().map_while(Result::ok) {
        let Some(rest) = line.strip_prefix('#') else { break };
        for tok in rest.split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                out.insert(k.to_string(), v.to_string());
            }
        }
    }
    out
}

fn csv_rows<T: for<'de> Deserialize<'de>>(input: impl Read) -> Result<Vec<T>, String> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| e.to_string())
}

fn serialize_rows<T: Serialize>(rows: &[T], out: &mut dyn Write, header: &[&str]) -> Result<(), String> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(header).map_err(|e| e.to_string())?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

const PAIR_COLUMNS: [&str; 19] = [
    "src",
    "dst",
    "greenest_ciro_cidt",
    "greenest_bgp_cidt",
    "mean_bgp_cidt",
    "mean_k_greenest_ciro_cidt",
    "abs_diff",
    "relative_ratio",
    "relative_ratio_mean",
    "propagation_delay_ciro_ms",
    "propagation_delay_bgp_ms",
    "mean_k_delay_ciro_ms",
    "mean_delay_bgp_ms",
    "latency_ratio",
    "latency_ratio_mean",
    "ciro_paths",
    "bgp_paths",
    "ciro_hops",
    "bgp_hops",
];

const SAVINGS_COLUMNS: [&str; 7] = [
    "as_id",
    "outbound_bytes_per_year",
    "covered_bytes_per_year",
    "bgp_g_per_year",
    "ciro_g_per_year",
    "savings_g_per_year",
    "relative_reduction",
];

pub fn write_pair_table(path: &Path, seed: u64, table: &PairTable) -> Result<(), EvalError> {
    let ases: Vec<String> = table.ases.iter().map(|a| a.to_string()).collect();
    let extra = [("omitted", table.omitted.to_string()), ("ases", ases.join(","))];
    write_csv_file(path, seed, &extra, Stage::Metrics, |w| serialize_rows(&table.rows, w, &PAIR_COLUMNS))
}

pub fn read_pair_table(path: &Path) -> Result<PairTable, EvalError> {
    let err = io_err(Stage::Report, path);
    let head = header_fields(fs::File::open(path).map_err(&err)?);
    let rows: Vec<PairMetrics> = csv_rows(fs::File::open(path).map_err(&err)?)
        .map_err(|e| EvalError::new(Stage::Report, format!("{}: {e}", path.display())))?;
    let omitted = head.get("omitted").and_then(|v| v.parse().ok()).unwrap_or(0);
    let mut ases: std::collections::BTreeSet<AsId> = rows.iter().flat_map(|r| [r.src, r.dst]).collect();
    if let Some(list) = head.get("ases") {
        ases.extend(list.split(',').filter_map(|a| a.parse().ok()).map(AsId));
    }
    Ok(PairTable { ases, rows, omitted })
}

pub fn write_savings(path: &Path, seed: u64, per_as: &[AsSavings]) -> Result<(), EvalError> {
    write_csv_file(path, seed, &[], Stage::Metrics, |w| serialize_rows(per_as, w, &SAVINGS_COLUMNS))
}

pub fn read_savings(path: &Path) -> Result<Vec<AsSavings>, EvalError> {
    let f = fs::File::open(path).map_err(io_err(Stage::Report, path))?;
    csv_rows(f).map_err(|e| EvalError::new(Stage::Report, format!("{}: {e}", path.display())))
}

/// Sorted `value,<fraction_column>` rows; fraction is the share of values
/// at or below the row.
pub fn write_cdf(path: &Path, seed: u64, values: &[f64], fraction_column: &str) -> Result<(), EvalError> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    write_csv_file(path, seed, &[], Stage::Report, |w| {
        let mut c = csv::Writer::from_writer(w);
        let err = |e: csv::Error| e.to_string();
        c.write_record(["value", fraction_column]).map_err(err)?;
        let n = v.len() as f64;
        for (i, x) in v.iter().enumerate() {
            c.write_record([x.to_string(), ((i + 1) as f64 / n).to_string()]).map_err(err)?;
        }
        c.flush().map_err(|e| e.to_string())
    })
}

type Column = (&'static str, fn(&PairMetrics) -> Option<f64>);

/// Per-pair metrics that get a CDF file.
pub const PAIR_CDFS: [Column; 11] = [
    ("greenest_ciro_cidt", |m| Some(m.greenest_ciro_cidt)),
    ("greenest_bgp_cidt", |m| Some(m.greenest_bgp_cidt)),
    ("mean_bgp_cidt", |m| Some(m.mean_bgp_cidt)),
    ("mean_k_greenest_ciro_cidt", |m| Some(m.mean_k_greenest_ciro_cidt)),
    ("abs_diff", |m| Some(m.abs_diff)),
    ("relative_ratio", |m| m.relative_ratio),
    ("relative_ratio_mean", |m| m.relative_ratio_mean),
    ("propagation_delay_ciro_ms", |m| Some(m.propagation_delay_ciro_ms)),
    ("propagation_delay_bgp_ms", |m| Some(m.propagation_delay_bgp_ms)),
    ("latency_ratio", |m| m.latency_ratio),
    ("latency_ratio_mean", |m| m.latency_ratio_mean),
];

pub const FOOTPRINT_CDF: &str = "relative_footprint_reduction";

fn fraction(values: &[f64], f: impl Fn(f64) -> bool) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().filter(|v| f(**v)).count() as f64 / values.len() as f64)
}

/// Writes one CDF file per metric plus `summary.json` into `dir`; returns
/// the summary and the written paths.
pub fn emit_reports(
    dir: &Path,
    seed: u64,
    table: &PairTable,
    savings: Option<&[AsSavings]>,
    beaconing: Option<BeaconStats>,
    traffic: Option<TrafficStats>,
) -> Result<(Summary, Vec<PathBuf>), EvalError> {
    fs::create_dir_all(dir).map_err(io_err(Stage::Report, dir))?;
    let mut files = Vec::new();
    let mut distributions = BTreeMap::new();
    let mut column = BTreeMap::new();
    for (name, get) in PAIR_CDFS {
        let values: Vec<f64> = table.rows.iter().filter_map(get).collect();
        let path = dir.join(format!("cdf_{name}.csv"));
        write_cdf(&path, seed, &values, "fraction_of_pairs")?;
        files.push(path);
        distributions.insert(name.to_string(), Distribution::of(&values));
        column.insert(name, values);
    }
    if let Some(per_as) = savings {
        let values: Vec<f64> = per_as.iter().filter_map(|a| a.relative_reduction).collect();
        let path = dir.join(format!("cdf_{FOOTPRINT_CDF}.csv"));
        write_cdf(&path, seed, &values, "fraction_of_ases")?;
        files.push(path);
        distributions.insert(FOOTPRINT_CDF.to_string(), Distribution::of(&values));
    }
    let summary = Summary {
        seed,
        pairs_evaluated: table.rows.len(),
        pairs_omitted: table.omitted,
        fraction_pairs_ratio_below_one: fraction(&column["relative_ratio"], |r| r < 1.0),
        fraction_pairs_latency_ratio_at_most_one: fraction(&column["latency_ratio"], |r| r <= 1.0),
        fraction_pairs_latency_ratio_mean_at_most_one: fraction(&column["latency_ratio_mean"], |r| r <= 1.0),
        distributions,
        latency_note: DELAY_NOTE.to_string(),
        footprint: savings.map(FootprintSummary::of),
        beaconing,
        traffic,
    };
    let path = dir.join("summary.json");
    let s = serde_json::to_string_pretty(&summary).map_err(|e| EvalError::new(Stage::Report, e))?;
    fs::write(&path, s + "\n").map_err(io_err(Stage::Report, &path))?;
    files.push(path);
    Ok((summary, files))
}
