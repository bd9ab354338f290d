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
//! Routing messages carrying CIDT extensions, and their octet format.
//!
//! All integers are big-endian.
//!
//! ```text
//! header:  magic u32 = 0x43495230 ("CIR0") | version u8 = 1 | timestamp u64
//!          | origin_as u64 | entry_count u16
//! entry:   as_id u64 | ingress u16 | egress u16 | ext_kind u8
//!          ext_kind 0: nothing
//!          ext_kind 1: 48 octets
//!          ext_kind 2: key_count u16, then key_count x (interface u16 | 48 octets)
//! ```
//!
//! A CIDT octet is mg/Gbit rounded half-up and saturated at 255. Zero doubles
//! as "no information" for slots outside the forecast window.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::forecast::ForecastDatabase;
use crate::ids::{hour_of, AsId, InterfaceId, Timestamp, HOURS};

pub const MAGIC: u32 = 0x4349_5230;
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 23;
pub const VECTOR_LEN: usize = 2 * HOURS;

const G_PER_BIT_TO_MG_PER_GBIT: f64 = 1e12;

static CLAMPED: AtomicU64 = AtomicU64::new(0);

/// Number of values saturated at 255 since process start.
pub fn clamp_count() -> u64 {
    CLAMPED.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WireError {
    #[error("negative CIDT {0}")]
    Negative(f64),
    #[error("bad magic {0:#010x}")]
    BadMagic(u32),
    #[error("unknown version {0}")]
    UnknownVersion(u8),
    #[error("truncated: needed {needed} octets at offset {offset}")]
    Truncated { needed: usize, offset: usize },
    #[error("unknown extension kind {0}")]
    BadExtKind(u8),
    #[error("{0} trailing octets")]
    TrailingBytes(usize),
    #[error("map extension without keys")]
    EmptyMap,
    #[error("duplicate map key {0}")]
    DuplicateKey(InterfaceId),
    #[error("too many {0} for a u16 count")]
    Overflow(&'static str),
    #[error("no forecast record for {0} -> {1}")]
    MissingRecord(InterfaceId, InterfaceId),
    #[error("message timestamp {ts} lies after now {now}")]
    FutureTimestamp { ts: Timestamp, now: Timestamp },
}

/// g/bit to one octet of mg/Gbit, half-up, saturating at 255.
pub fn encode_cidt(g_per_bit: f64) -> Result<u8, WireError> {
    if g_per_bit < 0.0 || g_per_bit.is_nan() {
        return Err(WireError::Negative(g_per_bit));
    }
    // non-negative, so truncation is floor
    let mg = g_per_bit * G_PER_BIT_TO_MG_PER_GBIT + 0.5;
    if mg >= 256.0 {
        CLAMPED.fetch_add(1, Ordering::Relaxed);
        return Ok(255);
    }
    Ok(mg as u8)
}

pub fn decode_cidt(octet: u8) -> f64 {
    f64::from(octet) / G_PER_BIT_TO_MG_PER_GBIT
}

/// Moves values `k` slots to the right, zero-filling the front; values pushed
/// past the end are dropped.
pub fn align_shift(v: &[f64; HOURS], k: u64) -> [f64; HOURS] {
    let mut out = [0.0; HOURS];
    if k < HOURS as u64 {
        let k = k as usize;
        out[k..].copy_from_slice(&v[..HOURS - k]);
    }
    out
}

/// Index of the current hour within a segment's 24-slot window, or `None`
/// once the window has expired (or `now` precedes the segment).
pub fn current_hour_index(segment_ts: Timestamp, now: Timestamp) -> Option<usize> {
    let (h_now, h_seg) = (hour_of(now), hour_of(segment_ts));
    if h_now < h_seg {
        return None;
    }
    let k = h_now - h_seg;
    (k < HOURS as u64).then_some(k as usize)
}

/// 48 octets: forward (ingress to egress) hours 0..24, then backward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CidtWireVector(pub [u8; VECTOR_LEN]);

impl CidtWireVector {
    pub fn forward(&self) -> &[u8] {
        &self.0[..HOURS]
    }

    pub fn backward(&self) -> &[u8] {
        &self.0[HOURS..]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CidtExtension {
    Flat(CidtWireVector),
    /// Hierarchical form: one vector per relevant interface, each between
    /// that interface and the entry's egress.
    Map(BTreeMap<InterfaceId, CidtWireVector>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsEntry {
    pub as_id: AsId,
    pub ingress: InterfaceId,
    pub egress: InterfaceId,
    pub extension: Option<CidtExtension>,
}

impl AsEntry {
    /// The vector describing this entry's own ingress/egress segment.
    pub fn segment_vector(&self) -> Option<&CidtWireVector> {
        match self.extension.as_ref()? {
            CidtExtension::Flat(v) => Some(v),
            CidtExtension::Map(m) => m.get(&self.ingress),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingMessage {
    pub origin_as: AsId,
    pub timestamp: Timestamp,
    pub entries: Vec<AsEntry>,
}

impl RoutingMessage {
    pub fn new(origin_as: AsId, timestamp: Timestamp) -> Self {
        RoutingMessage { origin_as, timestamp, entries: Vec::new() }
    }

    /// Copy of the message with one more entry.
    pub fn extended(&self, entry: AsEntry) -> Self {
        let mut m = self.clone();
        m.entries.push(entry);
        m
    }

    pub fn last_as(&self) -> Option<AsId> {
        self.entries.last().map(|e| e.as_id)
    }

    pub fn contains_as(&self, asn: AsId) -> bool {
        self.entries.iter().any(|e| e.as_id == asn)
    }
}

/// Shifts a database vector onto a message's time grid: slot `i` of the
/// result is absolute hour `hour(msg_ts) + i`, zero where the database has no
/// value for that hour.
fn align_to_message(values: &[f64; HOURS], db_base_hour: Timestamp, msg_ts: Timestamp) -> [f64; HOURS] {
    let (db_h, msg_h) = (hour_of(db_base_hour), hour_of(msg_ts));
    if db_h >= msg_h {
        return align_shift(values, db_h - msg_h);
    }
    let k = (msg_h - db_h) as usize;
    let mut out = [0.0; HOURS];
    if k < HOURS {
        out[..HOURS - k].copy_from_slice(&values[k..]);
    }
    out
}

/// Forward and backward forecasts between two interfaces, aligned to the
/// message timestamp and encoded.
pub fn build_vector(
    db: &ForecastDatabase,
    ingress: InterfaceId,
    egress: InterfaceId,
    msg_ts: Timestamp,
    now: Timestamp,
) -> Result<CidtWireVector, WireError> {
    if now < msg_ts {
        return Err(WireError::FutureTimestamp { ts: msg_ts, now });
    }
    let fwd = db.query(ingress, egress).map_err(|_| WireError::MissingRecord(ingress, egress))?;
    let bwd = db.query(egress, ingress).map_err(|_| WireError::MissingRecord(egress, ingress))?;
    let mut out = [0u8; VECTOR_LEN];
    for (half, v) in [fwd, bwd].iter().enumerate() {
        let aligned = align_to_message(v.values(), v.base_hour(), msg_ts);
        for (i, x) in aligned.iter().enumerate() {
            out[half * HOURS + i] = encode_cidt(*x)?;
        }
    }
    Ok(CidtWireVector(out))
}

/// Flat extension for one AS hop. The database normally holds vectors based
/// at `hour(now)`, in which case this is `align_shift` by
/// `hour(now) - hour(msg_ts)`.
pub fn build_extension(
    db: &ForecastDatabase,
    ingress: InterfaceId,
    egress: InterfaceId,
    msg_ts: Timestamp,
    now: Timestamp,
) -> Result<CidtExtension, WireError> {
    build_vector(db, ingress, egress, msg_ts, now).map(CidtExtension::Flat)
}

fn put_u16(out: &mut Vec<u8>, v: usize, what: &'static str) -> Result<(), WireError> {
    let v = u16::try_from(v).map_err(|_| WireError::Overflow(what))?;
    out.extend_from_slice(&v.to_be_bytes());
    Ok(())
}

pub fn serialize(msg: &RoutingMessage) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::with_capacity(HEADER_LEN + msg.entries.len() * (15 + VECTOR_LEN));
    out.extend_from_slice(&MAGIC.to_be_bytes());
    out.push(VERSION);
    out.extend_from_slice(&msg.timestamp.to_be_bytes());
    out.extend_from_slice(&msg.origin_as.0.to_be_bytes());
    put_u16(&mut out, msg.entries.len(), "entries")?;
    for e in &msg.entries {
        out.extend_from_slice(&e.as_id.0.to_be_bytes());
        out.extend_from_slice(&e.ingress.0.to_be_bytes());
        out.extend_from_slice(&e.egress.0.to_be_bytes());
        match &e.extension {
            None => out.push(0),
            Some(CidtExtension::Flat(v)) => {
                out.push(1);
                out.extend_from_slice(&v.0);
            }
            Some(CidtExtension::Map(m)) => {
                if m.is_empty() {
                    return Err(WireError::EmptyMap);
                }
                out.push(2);
                put_u16(&mut out, m.len(), "map keys")?;
                for (k, v) in m {
                    out.extend_from_slice(&k.0.to_be_bytes());
                    out.extend_from_slice(&v.0);
                }
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Truncated { needed: n, offset: self.pos });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 octets")))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 octets")))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 octets")))
    }

    fn vector(&mut self) -> Result<CidtWireVector, WireError> {
        Ok(CidtWireVector(self.take(VECTOR_LEN)?.try_into().expect("48 octets")))
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<RoutingMessage, WireError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let magic = c.u32()?;
    if magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    let version = c.u8()?;
    if version != VERSION {
        return Err(WireError::UnknownVersion(version));
    }
    let timestamp = c.u64()?;
    let origin_as = AsId(c.u64()?);
    let count = c.u16()?;
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let as_id = AsId(c.u64()?);
        let ingress = InterfaceId(c.u16()?);
        let egress = InterfaceId(c.u16()?);
        let extension = match c.u8()? {
            0 => None,
            1 => Some(CidtExtension::Flat(c.vector()?)),
            2 => {
                let keys = c.u16()?;
                if keys == 0 {
                    return Err(WireError::EmptyMap);
                }
                let mut m = BTreeMap::new();
                for _ in 0..keys {
                    let k = InterfaceId(c.u16()?);
                    if m.insert(k, c.vector()?).is_some() {
                        return Err(WireError::DuplicateKey(k));
                    }
                }
                Some(CidtExtension::Map(m))
            }
            other => return Err(WireError::BadExtKind(other)),
        };
        entries.push(AsEntry { as_id, ingress, egress, extension });
    }
    if c.pos != bytes.len() {
        return Err(WireError::TrailingBytes(bytes.len() - c.pos));
    }
    Ok(RoutingMessage { origin_as, timestamp, entries })
}

/// FNV-1a over the serialized message; used as the final deterministic
/// tiebreak when ranking messages.
pub fn message_hash(msg: &RoutingMessage) -> u64 {
    let bytes = serialize(msg).unwrap_or_default();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
