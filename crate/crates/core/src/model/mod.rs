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
//! Carbon intensity of data transmission (CIDT).
//!
//! A device's CIDT splits into a marginal part, driven by the energy it spends
//! per forwarded bit, and an amortized part, which charges each bit for the idle
//! power of the device (and of its redundant standbys) during the bit's
//! processing time `1 / C_max`. Both are scaled by the facility PUE and by the
//! carbon intensity of electricity (CIE) at the device's site.
//!
//! Units: power in kW, capacity in bit/s, energy intensity in kWh/bit,
//! CIE in g/kWh, CIDT in g/bit.

mod tables;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use tables::{
    reference_tables, reference_tables_json, source_carbon_intensity, typical_energy_intensity,
    DeviceKind, EnergySource, ReferenceTables,
};

use crate::ids::{InterfaceId, ZoneId};
use crate::topology::GeoCoord;

/// PUE used when a site does not publish one.
pub const DEFAULT_PUE: f64 = 2.0;

/// 1 J/Gbit expressed in kWh/bit.
pub const KWH_PER_BIT_PER_J_PER_GBIT: f64 = 1.0 / (3.6e6 * 1e9);

/// 1 g/bit expressed in mg/Gbit.
pub const MG_PER_GBIT_PER_G_PER_BIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid device spec: {0}")]
    InvalidSpec(String),
    #[error("PUE must be >= 1, got {0}")]
    InvalidPue(f64),
    #[error("expected {expected} CIE values for redundant devices, got {got}")]
    RedundantCountMismatch { expected: usize, got: usize },
    #[error("no CIE available for zone {0}")]
    UnresolvedLocation(ZoneId),
    #[error("empty intra-domain path set")]
    EmptyPathSet,
    #[error("intra-domain path without devices")]
    EmptyPath,
    #[error("path set mixes interface pairs ({0},{1}) and ({2},{3})")]
    MixedInterfacePair(InterfaceId, InterfaceId, InterfaceId, InterfaceId),
    #[error("path weight must be positive, got {0}")]
    InvalidWeight(f64),
    #[error("invalid energy mix: {0}")]
    InvalidMix(String),
    #[error("invalid CIE value {0}")]
    InvalidCie(f64),
}

/// Carbon intensity of electricity in gCO2/kWh.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CieValue(f64);

impl CieValue {
    pub const ZERO: CieValue = CieValue(0.0);

    pub fn new(grams_co2_per_kwh: f64) -> Result<Self, ModelError> {
        if !grams_co2_per_kwh.is_finite() || grams_co2_per_kwh < 0.0 {
            return Err(ModelError::InvalidCie(grams_co2_per_kwh));
        }
        Ok(CieValue(grams_co2_per_kwh))
    }

    pub fn grams_per_kwh(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub p_max_kw: f64,
    pub p_idle_kw: f64,
    pub c_max_bps: f64,
    /// `false` when the vendor figures are unavailable and the typical
    /// intensity of the device kind stands in for them.
    pub known: bool,
}

impl DeviceSpec {
    pub fn new(p_max_kw: f64, p_idle_kw: f64, c_max_bps: f64) -> Result<Self, ModelError> {
        let spec = DeviceSpec { p_max_kw, p_idle_kw, c_max_bps, known: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn unknown() -> Self {
        DeviceSpec { p_max_kw: 0.0, p_idle_kw: 0.0, c_max_bps: 1.0, known: false }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.known {
            return Ok(());
        }
        if !(self.c_max_bps > 0.0) || !self.c_max_bps.is_finite() {
            return Err(ModelError::InvalidSpec(format!("c_max must be > 0, got {}", self.c_max_bps)));
        }
        if !(self.p_idle_kw >= 0.0 && self.p_idle_kw <= self.p_max_kw) || !self.p_max_kw.is_finite() {
            return Err(ModelError::InvalidSpec(format!(
                "need 0 <= p_idle <= p_max, got p_idle={} p_max={}",
                self.p_idle_kw, self.p_max_kw
            )));
        }
        Ok(())
    }
}

/// Where a device sits: coordinates plus the electricity zone supplying it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub coord: GeoCoord,
    pub zone: ZoneId,
}

/// A standby device that draws idle power but forwards nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundantDevice {
    pub spec: DeviceSpec,
    pub site: Site,
    pub pue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub kind: DeviceKind,
    pub spec: DeviceSpec,
    pub site: Site,
    pub pue: f64,
    pub redundants: Vec<RedundantDevice>,
}

impl Device {
    /// Device with unknown spec, default PUE and one identical co-located standby.
    pub fn typical(kind: DeviceKind, site: Site) -> Self {
        Device {
            kind,
            spec: DeviceSpec::unknown(),
            site,
            pue: DEFAULT_PUE,
            redundants: vec![RedundantDevice { spec: DeviceSpec::unknown(), site, pue: DEFAULT_PUE }],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.spec.validate()?;
        if !(self.pue >= 1.0) {
            return Err(ModelError::InvalidPue(self.pue));
        }
        for r in &self.redundants {
            r.spec.validate()?;
            if !(r.pue >= 1.0) {
                return Err(ModelError::InvalidPue(r.pue));
            }
        }
        Ok(())
    }

    /// Idle energy a redundant device charges per bit, in kWh/bit. The
    /// processing time is always that of the primary device.
    fn redundant_idle_eidt(&self, redundant: &RedundantDevice) -> f64 {
        if self.spec.known && redundant.spec.known {
            redundant.spec.p_idle_kw / (3600.0 * self.spec.c_max_bps)
        } else {
            typical_eidt(self.kind)
        }
    }
}

/// Typical intensity of `kind` converted to kWh/bit.
pub fn typical_eidt(kind: DeviceKind) -> f64 {
    typical_energy_intensity(kind) * KWH_PER_BIT_PER_J_PER_GBIT
}

/// Marginal energy intensity `(P_max - P_idle) / (3600 * C_max)` in kWh/bit.
pub fn marginal_eidt(spec: &DeviceSpec) -> Result<f64, ModelError> {
    if !(spec.c_max_bps > 0.0) {
        return Err(ModelError::InvalidSpec(format!("c_max must be > 0, got {}", spec.c_max_bps)));
    }
    spec.validate()?;
    Ok((spec.p_max_kw - spec.p_idle_kw) / (3600.0 * spec.c_max_bps))
}

/// Amortized idle energy intensity `P_idle / (3600 * C_max)` in kWh/bit.
pub fn idle_eidt(spec: &DeviceSpec) -> Result<f64, ModelError> {
    spec.validate()?;
    Ok(spec.p_idle_kw / (3600.0 * spec.c_max_bps))
}

pub fn device_marginal_cidt(device: &Device, cie: CieValue) -> Result<f64, ModelError> {
    let eidt = if device.spec.known { marginal_eidt(&device.spec)? } else { typical_eidt(device.kind) };
    Ok(device.pue * eidt * cie.0)
}

pub fn device_amortized_cidt(
    device: &Device,
    cie_primary: CieValue,
    cie_redundants: &[CieValue],
) -> Result<f64, ModelError> {
    if cie_redundants.len() != device.redundants.len() {
        return Err(ModelError::RedundantCountMismatch {
            expected: device.redundants.len(),
            got: cie_redundants.len(),
        });
    }
    // Unknown specs fold the whole P_max/C_max ratio into the marginal term.
    let primary = if device.spec.known { device.pue * idle_eidt(&device.spec)? * cie_primary.0 } else { 0.0 };
    let standby: f64 = device
        .redundants
        .iter()
        .zip(cie_redundants)
        .map(|(r, cie)| r.pue * device.redundant_idle_eidt(r) * cie.0)
        .sum();
    Ok(primary + standby)
}

/// Resolves the CIE at a site.
pub trait CieLookup {
    fn cie_at(&self, site: &Site) -> Option<CieValue>;
}

impl<F> CieLookup for F
where
    F: Fn(&Site) -> Option<CieValue>,
{
    fn cie_at(&self, site: &Site) -> Option<CieValue> {
        self(site)
    }
}

/// Per-zone CIE table.
impl CieLookup for BTreeMap<ZoneId, CieValue> {
    fn cie_at(&self, site: &Site) -> Option<CieValue> {
        self.get(&site.zone).copied()
    }
}

fn resolve(lookup: &impl CieLookup, site: &Site) -> Result<CieValue, ModelError> {
    lookup.cie_at(site).ok_or(ModelError::UnresolvedLocation(site.zone))
}

/// Marginal plus amortized CIDT of one device, in g/bit.
pub fn device_cidt(device: &Device, lookup: &impl CieLookup) -> Result<f64, ModelError> {
    let cie = resolve(lookup, &device.site)?;
    let standby = device
        .redundants
        .iter()
        .map(|r| resolve(lookup, &r.site))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(device_marginal_cidt(device, cie)? + device_amortized_cidt(device, cie, &standby)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraDomainPath {
    pub devices: Vec<Device>,
    pub ingress: InterfaceId,
    pub egress: InterfaceId,
    pub weight: f64,
}

impl IntraDomainPath {
    pub fn new(devices: Vec<Device>, ingress: InterfaceId, egress: InterfaceId) -> Self {
        IntraDomainPath { devices, ingress, egress, weight: 1.0 }
    }

    /// The same devices traversed from egress to ingress.
    pub fn reversed(&self) -> Self {
        IntraDomainPath {
            devices: self.devices.iter().rev().cloned().collect(),
            ingress: self.egress,
            egress: self.ingress,
            weight: self.weight,
        }
    }
}

pub fn path_cidt(path: &IntraDomainPath, lookup: &impl CieLookup) -> Result<f64, ModelError> {
    if path.devices.is_empty() {
        return Err(ModelError::EmptyPath);
    }
    path.devices.iter().map(|d| device_cidt(d, lookup)).sum()
}

fn check_path_set(paths: &[IntraDomainPath]) -> Result<(), ModelError> {
    let first = paths.first().ok_or(ModelError::EmptyPathSet)?;
    for p in paths {
        if (p.ingress, p.egress) != (first.ingress, first.egress) {
            return Err(ModelError::MixedInterfacePair(first.ingress, first.egress, p.ingress, p.egress));
        }
        if !(p.weight > 0.0) || !p.weight.is_finite() {
            return Err(ModelError::InvalidWeight(p.weight));
        }
    }
    Ok(())
}

/// CIDT of one AS hop: the weight-normalized mean over the active
/// intra-domain paths between one ingress/egress pair.
pub fn hop_cidt(paths: &[IntraDomainPath], lookup: &impl CieLookup) -> Result<f64, ModelError> {
    check_path_set(paths)?;
    let total_weight: f64 = paths.iter().map(|p| p.weight).sum();
    let mut acc = 0.0;
    for p in paths {
        acc += p.weight * path_cidt(p, lookup)?;
    }
    Ok(acc / total_weight)
}

/// Single-expression hop CIDT:
/// `1/(3600 W) * sum_P w_P * sum_D (eta_D * P_max/C_max * CIE_D + sum_R eta_R * P_idle,R/C_max * CIE_R)`,
/// with typical intensities standing in for unknown ratios. Independent of the
/// marginal/amortized decomposition used by [`hop_cidt`].
pub fn hop_cidt_closed_form(paths: &[IntraDomainPath], lookup: &impl CieLookup) -> Result<f64, ModelError> {
    check_path_set(paths)?;
    let mut numerator = 0.0;
    let mut total_weight = 0.0;
    for p in paths {
        if p.devices.is_empty() {
            return Err(ModelError::EmptyPath);
        }
        total_weight += p.weight;
        let mut sum = 0.0;
        for d in &p.devices {
            d.validate()?;
            // per-device ratio expressed in kW/bps so that the common 1/3600 applies
            let ratio = if d.spec.known {
                d.spec.p_max_kw / d.spec.c_max_bps
            } else {
                3600.0 * typical_eidt(d.kind)
            };
            sum += d.pue * ratio * resolve(lookup, &d.site)?.0;
            for r in &d.redundants {
                let ratio = if d.spec.known && r.spec.known {
                    r.spec.p_idle_kw / d.spec.c_max_bps
                } else {
                    3600.0 * typical_eidt(d.kind)
                };
                sum += r.pue * ratio * resolve(lookup, &r.site)?.0;
            }
        }
        numerator += p.weight * sum;
    }
    Ok(numerator / (3600.0 * total_weight))
}

/// Share of each generation technology in a zone's electricity production.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<EnergySource, f64>", into = "BTreeMap<EnergySource, f64>")]
pub struct EnergyMix {
    shares: BTreeMap<EnergySource, f64>,
}

impl EnergyMix {
    pub fn new(shares: impl IntoIterator<Item = (EnergySource, f64)>) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for (source, share) in shares {
            if !(0.0..=1.0).contains(&share) {
                return Err(ModelError::InvalidMix(format!("{} share {share} outside [0,1]", source.name())));
            }
            if map.insert(source, share).is_some() {
                return Err(ModelError::InvalidMix(format!("duplicate source {}", source.name())));
            }
        }
        if !map.values().any(|&s| s > 0.0) {
            return Err(ModelError::InvalidMix("no nonzero share".into()));
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidMix(format!("shares sum to {total}, expected 1")));
        }
        Ok(EnergyMix { shares: map })
    }

    pub fn shares(&self) -> &BTreeMap<EnergySource, f64> {
        &self.shares
    }

    pub fn share(&self, source: EnergySource) -> f64 {
        self.shares.get(&source).copied().unwrap_or(0.0)
    }
}

impl TryFrom<BTreeMap<EnergySource, f64>> for EnergyMix {
    type Error = ModelError;
    fn try_from(value: BTreeMap<EnergySource, f64>) -> Result<Self, Self::Error> {
        EnergyMix::new(value)
    }
}

impl From<EnergyMix> for BTreeMap<EnergySource, f64> {
    fn from(value: EnergyMix) -> Self {
        value.shares
    }
}

/// Annual-average CIE implied by a generation mix.
pub fn cie_from_mix(mix: &EnergyMix) -> CieValue {
    CieValue(mix.shares.iter().map(|(s, share)| share * source_carbon_intensity(*s)).sum())
}

pub fn g_per_bit_to_mg_per_gbit(v: f64) -> f64 {
    v * MG_PER_GBIT_PER_G_PER_BIT
}
