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
//! Synthetic inter-AS traffic matrix (HTTP(S) gravity model plus video
//! services) and its aggregation onto a core topology. Volumes are bytes per
//! year.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ids::AsId;
use crate::topology::Topology;

/// 82 EB per month, as bytes per year.
pub const DEFAULT_HTTP_BYTES_PER_YEAR: f64 = 82e18 * 12.0;

pub const DEFAULT_ZIPF_SLOPE: f64 = 1.2;

/// Response-to-request volume ratio of HTTP(S); log10 d = 1.
pub const DEFAULT_D_HTTP: f64 = 10.0;

/// Shares of total Internet traffic of the three largest video services.
pub const DEFAULT_VIDEO_SHARES: [f64; 3] = [0.15, 0.114, 0.037];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrafficError {
    #[error("popular set of {popular} exceeds {n} destinations")]
    PopularSetTooLarge { popular: usize, n: usize },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("relative matrix is all zero; cannot scale")]
    ZeroMatrix,
    #[error("video destinations have zero aggregate size")]
    ZeroSize,
    #[error("AS {0} lies in no core customer cone")]
    Orphan(AsId),
    #[error("csv: {0}")]
    Csv(String),
}

fn csv_err(e: impl std::fmt::Display) -> TrafficError {
    TrafficError::Csv(e.to_string())
}

/// Directed volumes; the diagonal is always zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficMatrix {
    volume: BTreeMap<(AsId, AsId), f64>,
}

impl TrafficMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `bytes` from `src` to `dst`; self traffic is dropped.
    pub fn add(&mut self, src: AsId, dst: AsId, bytes: f64) {
        if src != dst && bytes != 0.0 {
            *self.volume.entry((src, dst)).or_insert(0.0) += bytes;
        }
    }

    pub fn get(&self, src: AsId, dst: AsId) -> f64 {
        self.volume.get(&(src, dst)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((AsId, AsId), f64)> + '_ {
        self.volume.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }

    /// Compensated sum of all volumes.
    pub fn total(&self) -> f64 {
        neumaier(self.volume.values().copied())
    }

    pub fn outbound(&self, src: AsId) -> f64 {
        neumaier(self.volume.range((src, AsId(0))..=(src, AsId(u64::MAX))).map(|(_, v)| *v))
    }

    pub fn merge(&mut self, other: &TrafficMatrix) {
        for ((s, d), v) in other.iter() {
            self.add(s, d, v);
        }
    }

    fn scale(&mut self, f: f64) {
        for v in self.volume.values_mut() {
            *v *= f;
        }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), TrafficError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["src", "dst", "bytes_per_year"]).map_err(csv_err)?;
        for ((s, d), v) in self.iter() {
            w.write_record([s.to_string(), d.to_string(), v.to_string()]).map_err(csv_err)?;
        }
        w.flush().map_err(csv_err)
    }

    pub fn read_csv(input: impl Read) -> Result<Self, TrafficError> {
        let mut m = TrafficMatrix::new();
        for rec in csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input).deserialize::<(u64, u64, f64)>() {
            let (s, d, v) = rec.map_err(csv_err)?;
            if !(v >= 0.0) || s == d {
                return Err(TrafficError::Csv(format!("bad row {s},{d},{v}")));
            }
            m.add(AsId(s), AsId(d), v);
        }
        Ok(m)
    }
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        c += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsProfile {
    pub as_id: AsId,
    /// Number of IP addresses.
    pub size: f64,
    /// Tier-1 transit AS without end users.
    pub no_users: bool,
    /// Content network whose users request nothing.
    pub cdn_no_requests: bool,
    /// Hosts one of the large video services.
    pub video: bool,
    /// 1 = most popular destination.
    pub popularity_rank: Option<u32>,
}

impl AsProfile {
    fn requester_size(&self) -> f64 {
        if self.no_users || self.cdn_no_requests { 0.0 } else { self.size }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    as_id: u64,
    size: f64,
    flags: String,
    rank: Option<u32>,
}

/// Rows `as_id,size,flags,rank`; flags are `|`-separated from `no_users`,
/// `cdn_no_requests` and `video`.
pub fn read_profiles(input: impl Read) -> Result<Vec<AsProfile>, TrafficError> {
    let mut out = Vec::new();
    for row in csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input).deserialize::<ProfileRow>() {
        let row = row.map_err(csv_err)?;
        if !(row.size >= 0.0) {
            return Err(TrafficError::Csv(format!("AS {}: negative size", row.as_id)));
        }
        let flags: BTreeSet<&str> = row.flags.split('|').map(str::trim).filter(|f| !f.is_empty()).collect();
        if let Some(f) = flags.iter().find(|f| !["no_users", "cdn_no_requests", "video"].contains(f)) {
            return Err(TrafficError::Csv(format!("AS {}: unknown flag {f}", row.as_id)));
        }
        out.push(AsProfile {
            as_id: AsId(row.as_id),
            size: row.size,
            no_users: flags.contains("no_users"),
            cdn_no_requests: flags.contains("cdn_no_requests"),
            video: flags.contains("video"),
            popularity_rank: row.rank,
        });
    }
    Ok(out)
}

pub fn write_profiles(profiles: &[AsProfile], out: impl Write) -> Result<(), TrafficError> {
    let mut w = csv::Writer::from_writer(out);
    for p in profiles {
        let flags: Vec<&str> = [(p.no_users, "no_users"), (p.cdn_no_requests, "cdn_no_requests"), (p.video, "video")]
            .into_iter()
            .filter_map(|(on, f)| on.then_some(f))
            .collect();
        w.serialize(ProfileRow { as_id: p.as_id.0, size: p.size, flags: flags.join("|"), rank: p.popularity_rank })
            .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Seeded profiles for a synthetic topology. Core ASes carry no users; sizes
/// are log-uniform between 2^10 and 2^24 addresses; about a tenth of the
/// other ASes are ranked popular and the top three host video services.
pub fn synth_profiles(topo: &Topology, seed: u64) -> Vec<AsProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7472_6166_6669_6321);
    let mut profiles: Vec<AsProfile> = topo
        .ases
        .values()
        .map(|n| AsProfile {
            as_id: n.id,
            size: 2f64.powf(rng.random_range(10.0..24.0)).round(),
            no_users: n.core,
            cdn_no_requests: false,
            video: false,
            popularity_rank: None,
        })
        .collect();
    let mut edge: Vec<usize> = (0..profiles.len()).filter(|&i| !profiles[i].no_users).collect();
    edge.shuffle(&mut rng);
    let popular = (edge.len() / 10).max(edge.len().min(3));
    for (rank, &i) in edge.iter().take(popular).enumerate() {
        profiles[i].popularity_rank = Some(rank as u32 + 1);
        if rank < DEFAULT_VIDEO_SHARES.len() {
            profiles[i].video = true;
            profiles[i].cdn_no_requests = true;
        }
    }
    profiles
}

/// Zipf weights `rank^-slope`, normalized. The largest values go to
/// `popular` (positions, in rank order); the rest are shuffled over the
/// other positions.
pub fn zipf_popularity(n: usize, slope: f64, seed: u64, popular: &[usize]) -> Result<Vec<f64>, TrafficError> {
    if n == 0 || !(slope > 0.0) {
        return Err(TrafficError::Param(format!("need n >= 1 and slope > 0, got n={n}, slope={slope}")));
    }
    if popular.len() > n {
        return Err(TrafficError::PopularSetTooLarge { popular: popular.len(), n });
    }
    let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-slope)).collect();
    let norm = neumaier(weights.iter().copied());
    let mut out = vec![f64::NAN; n];
    for (k, &pos) in popular.iter().enumerate() {
        out[pos] = weights[k] / norm;
    }
    let mut rest: Vec<usize> = (0..n).filter(|i| !popular.contains(i)).collect();
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (k, pos) in rest.into_iter().enumerate() {
        out[pos] = weights[popular.len() + k] / norm;
    }
    Ok(out)
}

/// Per-source destination popularity: every source gets its own Zipf vector
/// over all other ASes, seeded from `seed` and the source.
pub fn popularity_table(profiles: &[AsProfile], slope: f64, seed: u64) -> Result<BTreeMap<AsId, BTreeMap<AsId, f64>>, TrafficError> {
    let mut ranked: Vec<&AsProfile> = profiles.iter().filter(|p| p.popularity_rank.is_some()).collect();
    ranked.sort_by_key(|p| (p.popularity_rank, p.as_id));
    let mut out = BTreeMap::new();
    for src in profiles {
        let dests: Vec<AsId> = profiles.iter().map(|p| p.as_id).filter(|a| *a != src.as_id).collect();
        if dests.is_empty() {
            continue;
        }
        let pos: BTreeMap<AsId, usize> = dests.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let popular: Vec<usize> = ranked.iter().filter_map(|p| pos.get(&p.as_id).copied()).collect();
        let p = zipf_popularity(dests.len(), slope, seed ^ src.as_id.0.wrapping_mul(0x9e37_79b9_7f4a_7c15), &popular)?;
        out.insert(src.as_id, dests.into_iter().zip(p).collect());
    }
    Ok(out)
}

/// Gravity model `T(i,j) = S_i p_i(j) + d S_j p_j(i)` (requests of i's users
/// plus responses to j's users), scaled so the sum is `total_bytes`.
/// ASes without requesting users count as size 0 on the request side.
/// Returns the matrix and the scale factor.
pub fn http_matrix(
    profiles: &[AsProfile],
    popularity: &BTreeMap<AsId, BTreeMap<AsId, f64>>,
    d_http: f64,
    total_bytes: f64,
) -> Result<(TrafficMatrix, f64), TrafficError> {
    if !(d_http >= 0.0) || !(total_bytes > 0.0) {
        return Err(TrafficError::Param(format!("d_http={d_http}, total={total_bytes}")));
    }
    let size: BTreeMap<AsId, f64> = profiles.iter().map(|p| (p.as_id, p.requester_size())).collect();
    let p = |i: AsId, j: AsId| popularity.get(&i).and_then(|m| m.get(&j)).copied().unwrap_or(0.0);
    let mut m = TrafficMatrix::new();
    for a in profiles {
        for b in profiles {
            if a.as_id != b.as_id {
                let t = size[&a.as_id] * p(a.as_id, b.as_id) + d_http * size[&b.as_id] * p(b.as_id, a.as_id);
                m.add(a.as_id, b.as_id, t);
            }
        }
    }
    let rel = m.total();
    if !(rel > 0.0) {
        return Err(TrafficError::ZeroMatrix);
    }
    let factor = total_bytes / rel;
    m.scale(factor);
    pin_total(&mut m, total_bytes);
    Ok((m, factor))
}

/// Moves the last rounding residue of a scaled matrix onto its largest entry
/// so that [`TrafficMatrix::total`] equals `target`.
fn pin_total(m: &mut TrafficMatrix, target: f64) {
    for _ in 0..16 {
        let residue = target - m.total();
        if residue == 0.0 {
            return;
        }
        let Some(v) = m.volume.values_mut().max_by(|a, b| a.total_cmp(b)) else { return };
        let before = *v;
        *v += residue;
        if *v == before {
            // residue below the entry's resolution; nudge by one ulp
            *v = if residue > 0.0 { before.next_up() } else { before.next_down() };
        }
    }
}

/// Each video service sends `share * total_bytes` to all ASes with users,
/// in proportion to their size, and receives nothing.
pub fn video_matrix(profiles: &[AsProfile], services: &[(AsId, f64)], total_bytes: f64) -> Result<TrafficMatrix, TrafficError> {
    let mut m = TrafficMatrix::new();
    for &(svc, share) in services {
        let dests: Vec<(AsId, f64)> =
            profiles.iter().filter(|p| p.as_id != svc && !p.no_users).map(|p| (p.as_id, p.size)).collect();
        let sum = neumaier(dests.iter().map(|d| d.1));
        if !(sum > 0.0) {
            return Err(TrafficError::ZeroSize);
        }
        for (d, s) in dests {
            m.add(svc, d, share * total_bytes * s / sum);
        }
    }
    Ok(m)
}

/// Core matrix plus the volume that fell on the diagonal and was dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    pub matrix: TrafficMatrix,
    pub dropped_intra_core: f64,
}

/// Sums traffic between the customer cones of core ASes. An AS in several
/// cones splits its traffic evenly among them.
pub fn aggregate_to_core(
    full: &TrafficMatrix,
    core: &BTreeSet<AsId>,
    cones: &BTreeMap<AsId, BTreeSet<AsId>>,
) -> Result<Aggregated, TrafficError> {
    let mut owners: BTreeMap<AsId, Vec<AsId>> = BTreeMap::new();
    for c in core {
        owners.entry(*c).or_default().push(*c);
        for a in cones.get(c).into_iter().flatten() {
            if a != c {
                owners.entry(*a).or_default().push(*c);
            }
        }
    }
    let mut matrix = TrafficMatrix::new();
    let mut dropped = Vec::new();
    for ((s, d), v) in full.iter() {
        let os = owners.get(&s).ok_or(TrafficError::Orphan(s))?;
        let od = owners.get(&d).ok_or(TrafficError::Orphan(d))?;
        let part = v / (os.len() * od.len()) as f64;
        for a in os {
            for b in od {
                if a == b {
                    dropped.push(part);
                } else {
                    matrix.add(*a, *b, part);
                }
            }
        }
    }
    Ok(Aggregated { matrix, dropped_intra_core: neumaier(dropped.into_iter()) })
}
