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
//! Sources of day-ahead hourly CIE forecasts.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ids::{truncate_to_hour, Timestamp, ZoneId, HOURS, HOUR_SECS};
use crate::topology::{Topology, Zone};

use super::ForecastError;

/// Day-ahead hourly CIE (g/kWh) for a location, starting at `base_hour`.
pub trait CieProvider: Sync {
    fn day_ahead(&self, zone: ZoneId, base_hour: Timestamp) -> Result<[f64; HOURS], ForecastError>;
}

/// Annual averages: the same value for every hour.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticProvider {
    pub cie: BTreeMap<ZoneId, f64>,
}

impl StaticProvider {
    pub fn from_topology(topo: &Topology) -> Self {
        StaticProvider { cie: topo.zone_cie().into_iter().map(|(z, c)| (z, c.grams_per_kwh())).collect() }
    }
}

impl CieProvider for StaticProvider {
    fn day_ahead(&self, zone: ZoneId, _base_hour: Timestamp) -> Result<[f64; HOURS], ForecastError> {
        let v = *self.cie.get(&zone).ok_or(ForecastError::Provider { zone, reason: "unknown zone".into() })?;
        Ok([v; HOURS])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiurnalParams {
    /// Relative swing of the daily sinusoid around the annual mean.
    pub amplitude: f64,
    /// Relative amplitude of uniform hourly noise.
    pub noise: f64,
    /// Local hour of the daily minimum.
    pub trough_hour: f64,
}

impl Default for DiurnalParams {
    fn default() -> Self {
        DiurnalParams { amplitude: 0.25, noise: 0.05, trough_hour: 13.0 }
    }
}

/// Annual mean modulated by a sinusoid in local solar time plus seeded noise.
/// The value for an absolute hour depends only on (seed, zone, hour), so
/// overlapping windows agree.
#[derive(Debug, Clone, PartialEq)]
pub struct DiurnalProvider {
    pub mean: BTreeMap<ZoneId, f64>,
    pub longitude: BTreeMap<ZoneId, f64>,
    pub params: DiurnalParams,
    pub seed: u64,
}

impl DiurnalProvider {
    pub fn from_topology(topo: &Topology, params: DiurnalParams, seed: u64) -> Self {
        let mean = StaticProvider::from_topology(topo).cie;
        let longitude = topo.zones.iter().enumerate().map(|(i, z)| (ZoneId(i as u32), z.centroid.lon)).collect();
        DiurnalProvider { mean, longitude, params, seed }
    }

    pub fn value(&self, zone: ZoneId, hour_ts: Timestamp) -> Option<f64> {
        let mean = *self.mean.get(&zone)?;
        let lon = self.longitude.get(&zone).copied().unwrap_or(0.0);
        let utc_hour = (hour_ts / HOUR_SECS % 24) as f64;
        let local = utc_hour + lon / 15.0;
        let phase = 2.0 * std::f64::consts::PI * (local - self.params.trough_hour) / 24.0;
        let mix = self.seed ^ (u64::from(zone.0) << 40) ^ (hour_ts / HOUR_SECS).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(mix);
        let noise = if self.params.noise > 0.0 { rng.random_range(-1.0..=1.0) * self.params.noise } else { 0.0 };
        Some((mean * (1.0 - self.params.amplitude * phase.cos() + noise)).max(0.0))
    }
}

impl CieProvider for DiurnalProvider {
    fn day_ahead(&self, zone: ZoneId, base_hour: Timestamp) -> Result<[f64; HOURS], ForecastError> {
        let mut out = [0.0; HOURS];
        for (h, slot) in out.iter_mut().enumerate() {
            *slot = self
                .value(zone, base_hour + h as u64 * HOUR_SECS)
                .ok_or(ForecastError::Provider { zone, reason: "unknown zone".into() })?;
        }
        Ok(out)
    }
}

/// Forecasts read from CSV rows `location_id,base_hour_iso8601,v0,...,v23`.
/// Each requested hour is served by the newest row covering it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvProvider {
    rows: BTreeMap<ZoneId, BTreeMap<Timestamp, [f64; HOURS]>>,
}

pub fn parse_hour(s: &str) -> Result<Timestamp, ForecastError> {
    let t = DateTime::parse_from_rfc3339(s.trim()).map_err(|e| ForecastError::Csv(format!("bad timestamp {s:?}: {e}")))?;
    let secs = u64::try_from(t.timestamp()).map_err(|_| ForecastError::Csv(format!("timestamp before 1970: {s}")))?;
    Ok(truncate_to_hour(secs))
}

pub fn format_hour(ts: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp(ts as i64, 0)
        .expect("timestamp in range")
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

impl CsvProvider {
    /// `location_id` may be a zone name or a numeric zone index.
    pub fn load(reader: impl Read, zones: &[Zone]) -> Result<Self, ForecastError> {
        let by_name: BTreeMap<&str, ZoneId> =
            zones.iter().enumerate().map(|(i, z)| (z.name.as_str(), ZoneId(i as u32))).collect();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut out = CsvProvider::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| ForecastError::Csv(e.to_string()))?;
            if i == 0 && rec.get(0) == Some("location_id") {
                continue;
            }
            if rec.len() != 2 + HOURS {
                return Err(ForecastError::Csv(format!("row {}: expected {} fields, got {}", i + 1, 2 + HOURS, rec.len())));
            }
            let loc = &rec[0];
            let zone = match by_name.get(loc) {
                Some(z) => *z,
                None => ZoneId(loc.parse().map_err(|_| ForecastError::Csv(format!("unknown location {loc}")))?),
            };
            let base = parse_hour(&rec[1])?;
            let mut values = [0.0; HOURS];
            for (h, v) in values.iter_mut().enumerate() {
                *v = rec[2 + h].parse::<f64>().map_err(|_| ForecastError::Csv(format!("row {}: bad value", i + 1)))?;
                if !(*v >= 0.0) || !(*v).is_finite() {
                    return Err(ForecastError::Csv(format!("row {}: negative or non-finite CIE", i + 1)));
                }
            }
            out.rows.entry(zone).or_default().insert(base, values);
        }
        Ok(out)
    }

    pub fn insert(&mut self, zone: ZoneId, base_hour: Timestamp, values: [f64; HOURS]) {
        self.rows.entry(zone).or_default().insert(truncate_to_hour(base_hour), values);
    }

    pub fn write(&self, zones: &[Zone], out: impl Write) -> Result<(), ForecastError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| ForecastError::Csv(e.to_string());
        let mut header = vec!["location_id".to_string(), "base_hour_iso8601".to_string()];
        header.extend((0..HOURS).map(|h| format!("h{h}")));
        w.write_record(&header).map_err(err)?;
        for (zone, rows) in &self.rows {
            let name = zones.get(zone.0 as usize).map(|z| z.name.clone()).unwrap_or_else(|| zone.0.to_string());
            for (base, values) in rows {
                let mut rec = vec![name.clone(), format_hour(*base)];
                rec.extend(values.iter().map(|v| v.to_string()));
                w.write_record(&rec).map_err(err)?;
            }
        }
        w.flush().map_err(|e| ForecastError::Csv(e.to_string()))
    }
}

impl CieProvider for CsvProvider {
    fn day_ahead(&self, zone: ZoneId, base_hour: Timestamp) -> Result<[f64; HOURS], ForecastError> {
        let rows = self.rows.get(&zone).ok_or(ForecastError::Provider { zone, reason: "no rows".into() })?;
        let mut out = [0.0; HOURS];
        for (h, slot) in out.iter_mut().enumerate() {
            let at = base_hour + h as u64 * HOUR_SECS;
            let (base, values) = rows
                .range(..=at)
                .next_back()
                .filter(|(b, _)| (at - **b) / HOUR_SECS < HOURS as u64)
                .ok_or(ForecastError::Provider { zone, reason: format!("no forecast covers {}", format_hour(at)) })?;
            *slot = values[((at - base) / HOUR_SECS) as usize];
        }
        Ok(out)
    }
}
