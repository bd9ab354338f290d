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
//! Per-AS forecast database of day-ahead hourly CIDT per directed interface
//! pair, refreshed every hour (T_CIE) and on intra-domain path changes
//! (T_path).

mod provider;

use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};
use std::sync::Arc;

use rustc_hash::FxHasher;

pub use provider::{format_hour, parse_hour, CieProvider, CsvProvider, DiurnalParams, DiurnalProvider, StaticProvider};

use crate::exec::Execution;
use crate::ids::{truncate_to_hour, InterfaceId, Timestamp, ZoneId, HOURS};
use crate::model::{Device, ModelError};
use crate::topology::{IntraDomainState, LinearCidt};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForecastError {
    #[error("CIE provider failed for zone {zone}: {reason}")]
    Provider { zone: ZoneId, reason: String },
    #[error("no forecast record for {0} -> {1}")]
    NotFound(InterfaceId, InterfaceId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("forecast CSV: {0}")]
    Csv(String),
    #[error("invalid forecast vector: {0}")]
    InvalidVector(String),
}

/// 24 hourly CIDT values in g/bit; `values[0]` belongs to `base_hour`.
#[derive(Debug, Clone, PartialEq)]
pub struct CidtForecastVector {
    values: [f64; HOURS],
    base_hour: Timestamp,
}

impl CidtForecastVector {
    pub fn new(values: [f64; HOURS], base_hour: Timestamp) -> Result<Self, ForecastError> {
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(ForecastError::InvalidVector(format!("value {v} is not a nonnegative number")));
        }
        Ok(CidtForecastVector { values, base_hour: truncate_to_hour(base_hour) })
    }

    pub fn values(&self) -> &[f64; HOURS] {
        &self.values
    }

    pub fn base_hour(&self) -> Timestamp {
        self.base_hour
    }
}

/// Content hash of a device path, used to detect intra-domain rerouting.
fn fingerprint(devices: &[Device]) -> u64 {
    let mut h = FxHasher::default();
    for d in devices {
        d.kind.hash(&mut h);
        for x in [d.site.coord.lat, d.site.coord.lon, d.pue, d.spec.p_max_kw, d.spec.p_idle_kw, d.spec.c_max_bps] {
            x.to_bits().hash(&mut h);
        }
        d.site.zone.hash(&mut h);
        d.spec.known.hash(&mut h);
        for r in &d.redundants {
            for x in [r.site.coord.lat, r.site.coord.lon, r.pue, r.spec.p_max_kw, r.spec.p_idle_kw, r.spec.c_max_bps] {
                x.to_bits().hash(&mut h);
            }
            r.site.zone.hash(&mut h);
        }
    }
    h.finish()
}

/// Directed interface pairs of an AS with the fingerprint of their path.
fn pair_fingerprints(state: &IntraDomainState) -> BTreeMap<(InterfaceId, InterfaceId), u64> {
    let mut by_router: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for (k, rl) in &state.router_paths {
        by_router.insert(*k, fingerprint(&rl.devices));
    }
    let mut out = BTreeMap::new();
    for (&i, &ri) in &state.border_router_of {
        for (&e, &re) in &state.border_router_of {
            if i != e {
                let fp = by_router.get(&(ri.min(re), ri.max(re))).copied().unwrap_or(0);
                // direction matters for the stored record but not for the path set
                out.insert((i, e), fp);
            }
        }
    }
    out
}

/// One AS's forecast database.
#[derive(Debug, Clone, Default)]
pub struct ForecastDatabase {
    records: BTreeMap<(InterfaceId, InterfaceId), Arc<CidtForecastVector>>,
    last_tcie: Option<Timestamp>,
    last_tpath: Option<Timestamp>,
    cie_cache: BTreeMap<ZoneId, [f64; HOURS]>,
    path_fps: BTreeMap<(InterfaceId, InterfaceId), u64>,
    revision: u64,
}

fn evaluate(form: &LinearCidt, cie: &BTreeMap<ZoneId, [f64; HOURS]>, base: Timestamp) -> Result<CidtForecastVector, ForecastError> {
    let mut values = [0.0; HOURS];
    for (h, slot) in values.iter_mut().enumerate() {
        *slot = form.eval(|z| cie.get(&z).map(|v| v[h]))?;
    }
    CidtForecastVector::new(values, base)
}

impl ForecastDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Bumped on every tick that may change records.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn last_tcie(&self) -> Option<Timestamp> {
        self.last_tcie
    }

    pub fn last_tpath(&self) -> Option<Timestamp> {
        self.last_tpath
    }

    /// Base hour of the current records (the last T_CIE tick hour).
    pub fn base_hour(&self) -> Option<Timestamp> {
        self.last_tcie
    }

    pub fn pairs(&self) -> impl Iterator<Item = (InterfaceId, InterfaceId)> + '_ {
        self.records.keys().copied()
    }

    pub fn records(&self) -> impl Iterator<Item = ((InterfaceId, InterfaceId), &Arc<CidtForecastVector>)> + '_ {
        self.records.iter().map(|(k, v)| (*k, v))
    }

    pub fn query(&self, ingress: InterfaceId, egress: InterfaceId) -> Result<Arc<CidtForecastVector>, ForecastError> {
        self.records.get(&(ingress, egress)).cloned().ok_or(ForecastError::NotFound(ingress, egress))
    }

    /// Whether an hourly T_CIE refresh is due at `now`.
    pub fn tcie_due(&self, now: Timestamp) -> bool {
        self.last_tcie.is_none_or(|t| truncate_to_hour(now) > t)
    }

    /// T_CIE tick: fetch CIE forecasts for every zone the AS's devices sit in
    /// and recompute all directed pairs. On error the database is unchanged.
    pub fn run_tcie_tick(
        &mut self,
        state: &IntraDomainState,
        provider: &dyn CieProvider,
        now: Timestamp,
    ) -> Result<(), ForecastError> {
        let base = truncate_to_hour(now);
        let zones: BTreeSet<ZoneId> = state.cidt_forms.values().flat_map(|f| f.zones()).collect();
        let mut cie = BTreeMap::new();
        for z in zones {
            cie.insert(z, provider.day_ahead(z, base)?);
        }
        let mut by_router: BTreeMap<(u32, u32), Arc<CidtForecastVector>> = BTreeMap::new();
        for (k, form) in &state.cidt_forms {
            by_router.insert(*k, Arc::new(evaluate(form, &cie, base)?));
        }
        let mut records = BTreeMap::new();
        for (&i, &ri) in &state.border_router_of {
            for (&e, &re) in &state.border_router_of {
                if i == e {
                    continue;
                }
                let v = by_router.get(&(ri.min(re), ri.max(re))).ok_or({
                    ForecastError::Model(ModelError::EmptyPathSet)
                })?;
                records.insert((i, e), Arc::clone(v));
            }
        }
        self.records = records;
        self.cie_cache = cie;
        self.path_fps = pair_fingerprints(state);
        self.last_tcie = Some(base);
        self.revision += 1;
        Ok(())
    }

    /// T_path tick: recompute only pairs whose path set differs from the one
    /// seen at the previous tick, reusing the CIE vectors cached at the last
    /// T_CIE tick. Zones the new paths enter for the first time are fetched
    /// from `provider` for the cached base hour. Returns the recomputed pairs.
    pub fn run_tpath_tick(
        &mut self,
        state: &IntraDomainState,
        provider: &dyn CieProvider,
        now: Timestamp,
    ) -> Result<Vec<(InterfaceId, InterfaceId)>, ForecastError> {
        let Some(base) = self.last_tcie else {
            self.last_tpath = Some(now);
            return Ok(Vec::new());
        };
        let fps = pair_fingerprints(state);
        let changed: Vec<(InterfaceId, InterfaceId)> =
            fps.iter().filter(|(k, fp)| self.path_fps.get(k) != Some(fp)).map(|(k, _)| *k).collect();
        let mut cache = self.cie_cache.clone();
        let mut fresh = Vec::with_capacity(changed.len());
        for &(i, e) in &changed {
            let form = state.cidt_form(i, e).ok_or(ForecastError::Model(ModelError::EmptyPathSet))?;
            for z in form.zones() {
                if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(z) {
                    e.insert(provider.day_ahead(z, base)?);
                }
            }
            fresh.push(((i, e), Arc::new(evaluate(form, &cache, base)?)));
        }
        for (k, v) in fresh {
            self.records.insert(k, v);
        }
        self.records.retain(|k, _| fps.contains_key(k));
        self.cie_cache = cache;
        self.path_fps = fps;
        self.last_tpath = Some(now);
        self.revision += 1;
        Ok(changed)
    }

    /// Dump in the 26-column layout `ingress,egress,h0..h23`, preceded by a
    /// `# base_hour=` comment line.
    pub fn write_csv(&self, out: impl Write) -> Result<(), ForecastError> {
        let err = |e: std::io::Error| ForecastError::Csv(e.to_string());
        let mut out = std::io::BufWriter::new(out);
        if let Some(b) = self.last_tcie {
            writeln!(out, "# base_hour={}", format_hour(b)).map_err(err)?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["ingress".to_string(), "egress".to_string()];
        header.extend((0..HOURS).map(|h| format!("h{h}")));
        w.write_record(&header).map_err(|e| ForecastError::Csv(e.to_string()))?;
        for ((i, e), v) in &self.records {
            let mut rec = vec![i.0.to_string(), e.0.to_string()];
            rec.extend(v.values.iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(|e| ForecastError::Csv(e.to_string()))?;
        }
        w.flush().map_err(err)
    }

    /// Loads a dump written by [`write_csv`](Self::write_csv). The result has
    /// no cached CIE, so only a T_CIE tick can refresh it.
    pub fn read_csv(input: impl BufRead) -> Result<Self, ForecastError> {
        let mut base = None;
        let mut body = String::new();
        for line in input.lines() {
            let line = line.map_err(|e| ForecastError::Csv(e.to_string()))?;
            if let Some(rest) = line.strip_prefix("# base_hour=") {
                base = Some(parse_hour(rest)?);
            } else if !line.starts_with('#') {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let base = base.ok_or_else(|| ForecastError::Csv("missing base_hour line".into()))?;
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let mut records = BTreeMap::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| ForecastError::Csv(e.to_string()))?;
            let bad = || ForecastError::Csv(format!("record {}: malformed", n + 1));
            if rec.len() != 2 + HOURS {
                return Err(bad());
            }
            let i = InterfaceId(rec[0].parse().map_err(|_| bad())?);
            let e = InterfaceId(rec[1].parse().map_err(|_| bad())?);
            let mut values = [0.0; HOURS];
            for (h, v) in values.iter_mut().enumerate() {
                *v = rec[2 + h].parse().map_err(|_| bad())?;
            }
            if i == e || records.insert((i, e), Arc::new(CidtForecastVector::new(values, base)?)).is_some() {
                return Err(bad());
            }
        }
        Ok(ForecastDatabase { records, last_tcie: Some(base), ..Default::default() })
    }
}

/// Runs a T_CIE tick for every AS. Any failure aborts and leaves all
/// databases unchanged.
pub fn run_tcie_all(
    states: &[IntraDomainState],
    dbs: &mut [ForecastDatabase],
    provider: &dyn CieProvider,
    now: Timestamp,
    exec: Execution,
) -> Result<(), ForecastError> {
    assert_eq!(states.len(), dbs.len(), "one database per AS");
    let current: &[ForecastDatabase] = dbs;
    let idx: Vec<usize> = (0..states.len()).collect();
    let fresh = exec.try_map(&idx, |&i| {
        let mut db = current[i].clone();
        db.run_tcie_tick(&states[i], provider, now).map(|_| db)
    })?;
    for (slot, db) in dbs.iter_mut().zip(fresh) {
        *slot = db;
    }
    Ok(())
}
