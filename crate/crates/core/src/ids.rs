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
//! Identifiers and time helpers shared by every module.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Seconds in one hour.
pub const HOUR_SECS: u64 = 3600;

/// Number of hourly slots in a day-ahead forecast.
pub const HOURS: usize = 24;

/// Autonomous system number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AsId(pub u64);

impl fmt::Display for AsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Interface identifier, unique within one AS. `0` is reserved for "no interface"
/// (the ingress of an originating AS).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterfaceId(pub u16);

impl InterfaceId {
    pub const NONE: InterfaceId = InterfaceId(0);

    pub fn is_none(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for InterfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Electricity zone (country or bidding zone) a location belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(pub u32);

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unix timestamp in seconds.
pub type Timestamp = u64;

/// Index of the wall-clock hour containing `ts` (hours since the epoch).
pub fn hour_of(ts: Timestamp) -> u64 {
    ts / HOUR_SECS
}

/// Truncates a timestamp to the start of its hour.
pub fn truncate_to_hour(ts: Timestamp) -> Timestamp {
    hour_of(ts) * HOUR_SECS
}
