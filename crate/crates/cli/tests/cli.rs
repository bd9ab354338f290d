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

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("ciro-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn ciro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ciro")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_then_report() {
    let dir = scratch("pipeline");
    let out = ciro(&["pipeline", "--n-ases", "20", "--seed", "4", "-o", path(&dir), "--json"]);
    let summary = json(&out);
    assert_eq!(summary["seed"], 4);
    assert!(summary["pairs_evaluated"].as_u64().unwrap() > 0);
    for f in ["pair_metrics.csv", "as_savings.csv", "bgp_routes.csv", "cdf_relative_ratio.csv", "config.toml"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let again = json(&ciro(&["report", "-o", path(&dir), "--seed", "4", "--json"]));
    assert_eq!(again, summary);
}

#[test]
fn flags_override_the_config_file() {
    let dir = scratch("layers");
    let cfg = dir.join("exp.toml");
    std::fs::write(&cfg, "seed = 5\n[topology]\nn_ases = 15\n").unwrap();
    let out = ciro(&["topology", "-c", path(&cfg), "--seed", "6", "-o", path(&dir), "--set", "topology.n_ases=12"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let topo: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("topology.json")).unwrap()).unwrap();
    assert_eq!(topo["ases"].as_object().unwrap().len(), 12);
    let written = std::fs::read_to_string(dir.join("config.toml")).unwrap();
    assert!(written.contains("seed = 6"), "{written}");
}

#[test]
fn unknown_key_fails_in_the_config_stage() {
    let dir = scratch("bad");
    let out = ciro(&["topology", "-o", path(&dir), "--set", "nope=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config stage"));
}
