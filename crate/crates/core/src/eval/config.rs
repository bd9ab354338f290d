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
//! Experiment configuration: TOML file with serde defaults.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beaconing::DisseminationConfig;
use crate::exec::Execution;
use crate::forecast::DiurnalParams;
use crate::topology::SynthParams;
use crate::traffic::{DEFAULT_D_HTTP, DEFAULT_HTTP_BYTES_PER_YEAR, DEFAULT_VIDEO_SHARES, DEFAULT_ZIPF_SLOPE};

use super::{EvalError, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stage draws its own seed from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub execution: Execution,
    pub topology: TopologyConfig,
    pub forecast: ForecastConfig,
    pub beaconing: DisseminationConfig,
    pub traffic: TrafficConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            execution: Execution::default(),
            topology: TopologyConfig::default(),
            forecast: ForecastConfig::default(),
            beaconing: DisseminationConfig::default(),
            traffic: TrafficConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologySource {
    #[default]
    Synthetic,
    /// CSV datasets (AS relationships, interfaces, routers, zones).
    Files,
    /// A topology JSON written by an earlier run.
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub source: TopologySource,
    /// Number of ASes generated for the synthetic source.
    pub n_ases: usize,
    /// Prune to this many highest-degree ASes and aggregate traffic onto them.
    pub core_size: Option<usize>,
    pub synth: SynthParams,
    pub files: Option<TopologyFiles>,
    pub json: Option<PathBuf>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            source: TopologySource::Synthetic,
            n_ases: 200,
            core_size: None,
            synth: SynthParams::default(),
            files: None,
            json: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFiles {
    /// `a|b|rel` lines.
    pub as_rel: PathBuf,
    pub interfaces: PathBuf,
    pub routers: PathBuf,
    pub router_links: Option<PathBuf>,
    pub energy_mix: PathBuf,
    pub centroids: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Annual averages from each zone's energy mix.
    #[default]
    Static,
    Diurnal,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub provider: ProviderKind,
    pub diurnal: DiurnalParams,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Profile CSV; synthesized from the topology when unset.
    pub profiles: Option<PathBuf>,
    pub zipf_slope: f64,
    pub d_http: f64,
    pub http_bytes_per_year: f64,
    /// Total Internet traffic the video shares refer to.
    pub internet_bytes_per_year: f64,
    /// Shares of the video services, most popular first.
    pub video_shares: Vec<f64>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            profiles: None,
            zipf_slope: DEFAULT_ZIPF_SLOPE,
            d_http: DEFAULT_D_HTTP,
            http_bytes_per_year: DEFAULT_HTTP_BYTES_PER_YEAR,
            internet_bytes_per_year: DEFAULT_HTTP_BYTES_PER_YEAR,
            video_shares: DEFAULT_VIDEO_SHARES.to_vec(),
        }
    }
}

/// Per-stage seeds drawn in a fixed order from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub topology: u64,
    pub forecast: u64,
    pub beaconing: u64,
    pub bgp: u64,
    pub traffic: u64,
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self, EvalError> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| EvalError::new(Stage::Config, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| EvalError::new(Stage::Config, format!("{}: {e}", path.display())))?;
        Self::from_toml(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn seeds(&self) -> Seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Seeds {
            topology: rng.random(),
            forecast: rng.random(),
            beaconing: rng.random(),
            bgp: rng.random(),
            traffic: rng.random(),
        }
    }

    /// Checks what can be checked without touching the inputs.
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::new(Stage::Config, m));
        match self.topology.source {
            TopologySource::Synthetic if self.topology.n_ases < 2 => {
                return bad(format!("n_ases must be at least 2, got {}", self.topology.n_ases))
            }
            TopologySource::Files if self.topology.files.is_none() => return bad("topology.files is required".into()),
            TopologySource::Json if self.topology.json.is_none() => return bad("topology.json is required".into()),
            _ => {}
        }
        if self.topology.core_size == Some(0) {
            return bad("core_size must be positive".into());
        }
        if self.forecast.provider == ProviderKind::Csv && self.forecast.csv.is_none() {
            return bad("forecast.csv is required for the csv provider".into());
        }
        self.beaconing.validate().map_err(|e| EvalError::new(Stage::Config, e))?;
        let t = &self.traffic;
        if !(t.zipf_slope > 0.0) || !(t.d_http >= 0.0) || !(t.http_bytes_per_year > 0.0) || !(t.internet_bytes_per_year >= 0.0) {
            return bad("traffic parameters must be positive".into());
        }
        if t.video_shares.iter().any(|s| !(*s >= 0.0)) || t.video_shares.iter().sum::<f64>() > 1.0 {
            return bad("video shares must be non-negative and sum to at most 1".into());
        }
        Ok(())
    }
}
