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
//! Embedded reference tables: typical device energy intensities and median
//! life-cycle carbon intensities of generation technologies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    CoreRouter,
    WdmSwitch,
    Transponder,
    Muxponder,
    Amplifier,
    Regenerator,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 6] = [
        DeviceKind::CoreRouter,
        DeviceKind::WdmSwitch,
        DeviceKind::Transponder,
        DeviceKind::Muxponder,
        DeviceKind::Amplifier,
        DeviceKind::Regenerator,
    ];
}

/// Typical energy intensity in J/Gbit (equivalently W/Gbps).
pub fn typical_energy_intensity(kind: DeviceKind) -> f64 {
    match kind {
        DeviceKind::CoreRouter => 10.0,
        DeviceKind::WdmSwitch => 0.05,
        DeviceKind::Transponder | DeviceKind::Muxponder => 1.5,
        DeviceKind::Amplifier => 0.03,
        DeviceKind::Regenerator => 3.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergySource {
    Coal,
    NaturalGas,
    Biomass,
    Solar,
    Geothermal,
    Nuclear,
    Wind,
    Hydro,
}

impl EnergySource {
    pub const ALL: [EnergySource; 8] = [
        EnergySource::Coal,
        EnergySource::NaturalGas,
        EnergySource::Biomass,
        EnergySource::Solar,
        EnergySource::Geothermal,
        EnergySource::Nuclear,
        EnergySource::Wind,
        EnergySource::Hydro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnergySource::Coal => "coal",
            EnergySource::NaturalGas => "natural_gas",
            EnergySource::Biomass => "biomass",
            EnergySource::Solar => "solar",
            EnergySource::Geothermal => "geothermal",
            EnergySource::Nuclear => "nuclear",
            EnergySource::Wind => "wind",
            EnergySource::Hydro => "hydro",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let n = name.trim().to_ascii_lowercase();
        let n = match n.as_str() {
            "gas" => "natural_gas",
            "hydroelectric" => "hydro",
            other => other,
        };
        Self::ALL.into_iter().find(|s| s.name() == n)
    }
}

/// Median life-cycle emissions in gCO2/kWh.
pub fn source_carbon_intensity(source: EnergySource) -> f64 {
    match source {
        EnergySource::Coal => 1001.0,
        EnergySource::NaturalGas => 469.0,
        EnergySource::Biomass => 230.0,
        EnergySource::Solar => 46.0,
        EnergySource::Geothermal => 45.0,
        EnergySource::Nuclear => 16.0,
        EnergySource::Wind => 12.0,
        EnergySource::Hydro => 4.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTables {
    pub device_energy_intensity_j_per_gbit: BTreeMap<DeviceKind, f64>,
    pub source_carbon_intensity_g_per_kwh: BTreeMap<EnergySource, f64>,
}

pub fn reference_tables() -> ReferenceTables {
    ReferenceTables {
        device_energy_intensity_j_per_gbit: DeviceKind::ALL
            .into_iter()
            .map(|k| (k, typical_energy_intensity(k)))
            .collect(),
        source_carbon_intensity_g_per_kwh: EnergySource::ALL
            .into_iter()
            .map(|s| (s, source_carbon_intensity(s)))
            .collect(),
    }
}

/// The tables as pretty JSON; `data/reference_tables.json` is this output.
pub fn reference_tables_json() -> String {
    serde_json::to_string_pretty(&reference_tables()).expect("tables serialize") + "\n"
}
