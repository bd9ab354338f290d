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

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exec::Execution;
use crate::forecast::{CieProvider, ForecastDatabase};
use crate::ids::{hour_of, AsId, InterfaceId, Timestamp, HOURS};
use crate::topology::{AsNode, Interface, IntraDomainState, NeighborRole, Topology};
use crate::wire::{build_extension, build_vector, current_hour_index, CidtExtension, AsEntry};

use super::{
    hours_to_secs, relevant_interfaces, select_pcbs, Beacon, BeaconError, BeaconRole, BeaconStore,
    DisseminationConfig, ExportPolicy, Mode, Optimize, Pcb, SegmentKind,
};

/// One emitted beacon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptRow {
    pub round: usize,
    pub sender: u64,
    pub egress: u16,
    pub origin: u64,
    pub hop_count: usize,
    pub coverage_ratio: f64,
    /// Empty once the forecast window has expired.
    pub current_hour_cidt_mg_per_gbit: Option<u32>,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub now: Timestamp,
    pub fired: usize,
    pub emitted: usize,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rounds: usize,
    pub converged: bool,
    pub emitted: usize,
}

#[derive(Debug, Clone)]
struct AsRuntime {
    asn: AsId,
    db: Option<ForecastDatabase>,
    store: BeaconStore,
    period_secs: u64,
    next_fire: Timestamp,
    forecast_errors: usize,
    /// Extension tables kept across firings while the database revision holds.
    ext_tables: Vec<ExtTable>,
    ext_revision: Option<u64>,
}

type ExtTable = ((SegmentKind, u64), Vec<Option<Option<CidtExtension>>>);

struct Fired {
    outs: Vec<Outgoing>,
    rows: Vec<TranscriptRow>,
    /// FNV over this firing's transcript rows.
    digest: u64,
}

struct Outgoing {
    to: usize,
    beacon: Beacon,
}

struct Ctx<'a> {
    topo: &'a Topology,
    states: &'a [IntraDomainState],
    config: &'a DisseminationConfig,
    index: &'a BTreeMap<AsId, usize>,
    core: &'a BTreeSet<AsId>,
    origins: &'a BTreeSet<AsId>,
    provider: &'a dyn CieProvider,
    round: usize,
    now: Timestamp,
}

pub struct Simulation<'a> {
    topo: &'a Topology,
    states: &'a [IntraDomainState],
    config: DisseminationConfig,
    index: BTreeMap<AsId, usize>,
    core: BTreeSet<AsId>,
    origins: BTreeSet<AsId>,
    ases: Vec<AsRuntime>,
    round: usize,
    exec: Execution,
    transcript: Vec<TranscriptRow>,
    digest: u64,
    store_digest: u64,
    emitted_total: usize,
    /// Serialized length -> number of emitted beacons.
    sizes: BTreeMap<usize, u64>,
    last_now: Option<Timestamp>,
    settled: Vec<bool>,
}

const FNV_BASIS: u64 = 0xcbf2_9ce4_8422_2325;

fn fnv(h: &mut u64, bytes: &[u8]) {
    for b in bytes {
        *h ^= u64::from(*b);
        *h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
}

fn row_digest(h: &mut u64, r: &TranscriptRow) {
    for w in [
        r.round as u64,
        r.sender,
        u64::from(r.egress),
        r.origin,
        r.hop_count as u64,
        r.coverage_ratio.to_bits(),
        r.current_hour_cidt_mg_per_gbit.map_or(u64::MAX, u64::from),
        r.bytes as u64,
    ] {
        *h = (*h ^ w).wrapping_mul(0x0000_0100_0000_01b3).rotate_left(29);
    }
}

impl<'a> Simulation<'a> {
    /// `states` holds one intra-domain state per AS in ascending AS order.
    pub fn new(
        topo: &'a Topology,
        states: &'a [IntraDomainState],
        config: DisseminationConfig,
        exec: Execution,
    ) -> Result<Self, BeaconError> {
        config.validate()?;
        if states.len() != topo.ases.len() {
            return Err(BeaconError::State(AsId(0)));
        }
        for (s, asn) in states.iter().zip(topo.ases.keys()) {
            if s.asn != *asn {
                return Err(BeaconError::State(*asn));
            }
        }
        let core: BTreeSet<AsId> = topo.ases.values().filter(|n| n.core).map(|n| n.id).collect();
        if config.mode == Mode::Hierarchical && core.is_empty() {
            return Err(BeaconError::NoCore);
        }
        let index: BTreeMap<AsId, usize> = topo.ases.keys().enumerate().map(|(i, a)| (*a, i)).collect();
        let origins: BTreeSet<AsId> = match &config.origins {
            Some(list) => list.iter().copied().filter(|a| index.contains_key(a)).collect(),
            None => index.keys().copied().collect(),
        };

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xbeac_0000);
        let mut order: Vec<AsId> = index.keys().copied().collect();
        order.shuffle(&mut rng);
        let participating = (config.participation * order.len() as f64).round() as usize;
        let with_db: BTreeSet<AsId> = order[..participating].iter().copied().collect();
        let ases = index
            .keys()
            .map(|&asn| {
                let period = config.period_hours + config.period_spread_hours * rng.random::<f64>();
                let period_secs = hours_to_secs(period);
                let phase = if config.staggered { rng.random_range(0..period_secs) } else { 0 };
                AsRuntime {
                    asn,
                    db: with_db.contains(&asn).then(ForecastDatabase::new),
                    store: BeaconStore::default(),
                    period_secs,
                    next_fire: config.start_time + phase,
                    forecast_errors: 0,
                    ext_tables: Vec::new(),
                    ext_revision: None,
                }
            })
            .collect();
        Ok(Simulation {
            topo,
            states,
            config,
            core,
            origins,
            ases,
            round: 0,
            exec,
            transcript: Vec::new(),
            digest: FNV_BASIS,
            store_digest: 0,
            emitted_total: 0,
            sizes: BTreeMap::new(),
            last_now: None,
            settled: vec![false; index.len()],
            index,
        })
    }

    pub fn config(&self) -> &DisseminationConfig {
        &self.config
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Time of the next round: the earliest pending firing.
    pub fn now(&self) -> Timestamp {
        self.ases.iter().map(|a| a.next_fire).min().unwrap_or(self.config.start_time)
    }

    /// Time of the last completed round.
    pub fn last_round_time(&self) -> Option<Timestamp> {
        self.last_now
    }

    pub fn store(&self, asn: AsId) -> Option<&BeaconStore> {
        self.index.get(&asn).map(|&i| &self.ases[i].store)
    }

    pub fn beacons(&self, asn: AsId, kind: SegmentKind, origin: AsId) -> &[Beacon] {
        self.store(asn).map(|s| s.get(kind, origin)).unwrap_or(&[])
    }

    pub fn database(&self, asn: AsId) -> Option<&ForecastDatabase> {
        self.index.get(&asn).and_then(|&i| self.ases[i].db.as_ref())
    }

    pub fn participates(&self, asn: AsId) -> bool {
        self.database(asn).is_some()
    }

    /// Switches the forecasting module of one AS on or off.
    pub fn set_participation(&mut self, asn: AsId, on: bool) {
        if let Some(&i) = self.index.get(&asn) {
            let a = &mut self.ases[i];
            if on != a.db.is_some() {
                a.db = on.then(ForecastDatabase::new);
                a.ext_tables.clear();
                a.ext_revision = None;
            }
        }
    }

    pub fn forecast_errors(&self) -> usize {
        self.ases.iter().map(|a| a.forecast_errors).sum()
    }

    pub fn transcript(&self) -> &[TranscriptRow] {
        &self.transcript
    }

    /// Running hash over every emitted transcript row.
    pub fn transcript_digest(&self) -> u64 {
        self.digest
    }

    pub fn emitted_total(&self) -> usize {
        self.emitted_total
    }

    /// Histogram of serialized message lengths over all emitted beacons.
    pub fn message_sizes(&self) -> &BTreeMap<usize, u64> {
        &self.sizes
    }

    pub fn run_round(&mut self, provider: &dyn CieProvider) -> RoundReport {
        let now = self.now();
        let round = self.round;
        let ctx = Ctx {
            topo: self.topo,
            states: self.states,
            config: &self.config,
            index: &self.index,
            core: &self.core,
            origins: &self.origins,
            provider,
            round,
            now,
        };
        let results = self.exec.map_mut(&mut self.ases, |a| fire(a, &ctx, now));
        let fired_mask: Vec<bool> = results.iter().map(Option::is_some).collect();
        let fired = fired_mask.iter().filter(|f| **f).count();
        let mut counts = vec![0usize; self.ases.len()];
        for o in results.iter().flatten().flat_map(|r| &r.outs) {
            counts[o.to] += 1;
        }
        let mut inboxes: Vec<Vec<Beacon>> = counts.into_iter().map(Vec::with_capacity).collect();
        let mut emitted = 0;
        for out in results.into_iter().flatten() {
            emitted += out.outs.len();
            for o in out.outs {
                *self.sizes.entry(o.beacon.pcb.wire_len()).or_insert(0) += 1;
                inboxes[o.to].push(o.beacon);
            }
            fnv(&mut self.digest, &out.digest.to_be_bytes());
            self.transcript.extend(out.rows);
        }
        let capacity = |a: &AsRuntime| self.config.retention_n * self.topo.ases[&a.asn].interfaces.len().max(1);
        let caps: Vec<usize> = self.ases.iter().map(capacity).collect();
        let optimize = self.config.optimize;
        let mut work: Vec<(&mut AsRuntime, Vec<Beacon>, usize)> =
            self.ases.iter_mut().zip(inboxes).zip(caps).map(|((a, i), c)| (a, i, c)).collect();
        self.exec.map_mut(&mut work, |(a, inbox, cap)| {
            let batch = std::mem::take(inbox);
            if !batch.is_empty() {
                a.store.insert_all(batch, *cap, optimize, now);
            }
        });
        let digest = self
            .ases
            .iter()
            .fold(0u64, |h, a| h.rotate_left(5) ^ a.store.path_digest().wrapping_mul(a.asn.0 | 1));
        let changed = digest != self.store_digest;
        self.store_digest = digest;
        if changed {
            self.settled.iter_mut().for_each(|s| *s = false);
        } else {
            for (s, f) in self.settled.iter_mut().zip(fired_mask) {
                *s |= f;
            }
        }
        self.last_now = Some(now);
        self.round += 1;
        self.emitted_total += emitted;
        RoundReport { round, now, fired, emitted, changed }
    }

    /// Runs rounds until every AS has fired on stores whose path sets no
    /// longer change, or `max_rounds` have passed.
    pub fn run_until_stable(&mut self, provider: &dyn CieProvider) -> RunSummary {
        let mut emitted = 0;
        let start = self.round;
        while self.round - start < self.config.max_rounds {
            emitted += self.run_round(provider).emitted;
            if self.settled.iter().all(|s| *s) {
                return RunSummary { rounds: self.round - start, converged: true, emitted };
            }
        }
        RunSummary { rounds: self.round - start, converged: false, emitted }
    }
}

struct Firing<'c, 'a> {
    ctx: &'c Ctx<'a>,
    node: &'a AsNode,
    db: Option<&'c ForecastDatabase>,
    /// Interfaces in id order; slot `k + 1` in the tables below.
    slots: Vec<InterfaceId>,
    /// Per (kind, timestamp hour): extensions by `ingress slot * n + egress slot`.
    tables: Vec<ExtTable>,
    outs: Vec<Outgoing>,
    rows: Vec<TranscriptRow>,
    digest: u64,
}

impl Firing<'_, '_> {
    fn slot(&self, intf: InterfaceId) -> usize {
        if intf.is_none() {
            0
        } else {
            self.slots.binary_search(&intf).map_or(0, |k| k + 1)
        }
    }

    fn table(&mut self, kind: SegmentKind, ts: Timestamp) -> usize {
        let key = (kind, hour_of(ts));
        match self.tables.iter().position(|(k, _)| *k == key) {
            Some(t) => t,
            None => {
                let n = self.slots.len();
                self.tables.push((key, vec![None; (n + 1) * n]));
                self.tables.len() - 1
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn ext_ref(
        &mut self,
        kind: SegmentKind,
        role: BeaconRole,
        in_slot: usize,
        out_slot: usize,
        ingress: InterfaceId,
        egress: InterfaceId,
        ts: Timestamp,
    ) -> Option<&CidtExtension> {
        self.db?;
        let t = self.table(kind, ts);
        self.cell(t, kind, role, in_slot, out_slot, ingress, egress, ts)
    }

    /// Extension in table `t` (see [`Firing::table`]), built on first use.
    #[allow(clippy::too_many_arguments)]
    fn cell(
        &mut self,
        t: usize,
        kind: SegmentKind,
        role: BeaconRole,
        in_slot: usize,
        out_slot: usize,
        ingress: InterfaceId,
        egress: InterfaceId,
        ts: Timestamp,
    ) -> Option<&CidtExtension> {
        let db = self.db?;
        let cell = in_slot * self.slots.len() + out_slot;
        let ctx = self.ctx;
        let node = self.node;
        self.tables[t].1[cell]
            .get_or_insert_with(|| {
                if ctx.config.mode == Mode::Flat || kind == SegmentKind::Core {
                    if ingress.is_none() {
                        return None;
                    }
                    return build_extension(db, ingress, egress, ts, ctx.now).ok();
                }
                let keys = relevant_interfaces(node, role, ingress, egress, |a| ctx.core.contains(&a));
                let mut map = BTreeMap::new();
                for k in keys {
                    map.insert(k, build_vector(db, k, egress, ts, ctx.now).ok()?);
                }
                (!map.is_empty()).then_some(CidtExtension::Map(map))
            })
            .as_ref()
    }

    #[allow(clippy::too_many_arguments)]
    fn extension(
        &mut self,
        kind: SegmentKind,
        role: BeaconRole,
        in_slot: usize,
        out_slot: usize,
        ingress: InterfaceId,
        egress: InterfaceId,
        ts: Timestamp,
    ) -> Option<CidtExtension> {
        self.ext_ref(kind, role, in_slot, out_slot, ingress, egress, ts).cloned()
    }

    /// Backward octet of this AS's own segment at slot `idx`; 0 without data.
    #[allow(clippy::too_many_arguments)]
    fn own_octet(
        &mut self,
        t: usize,
        kind: SegmentKind,
        role: BeaconRole,
        in_slot: usize,
        out_slot: usize,
        ingress: InterfaceId,
        egress: InterfaceId,
        ts: Timestamp,
        idx: usize,
    ) -> u32 {
        self.cell(t, kind, role, in_slot, out_slot, ingress, egress, ts).and_then(|x| segment_octet(x, ingress, idx)).unwrap_or(0)
    }

    fn send(&mut self, intf: &Interface, egress: InterfaceId, pcb: Arc<Pcb>) {
        let Some(&to) = self.ctx.index.get(&intf.neighbor) else { return };
        let row = TranscriptRow {
            round: self.ctx.round,
            sender: self.node.id.0,
            egress: egress.0,
            origin: pcb.origin.0,
            hop_count: pcb.hops(),
            coverage_ratio: pcb.coverage(),
            current_hour_cidt_mg_per_gbit: pcb.cost_mg(self.ctx.now),
            bytes: pcb.wire_len(),
        };
        row_digest(&mut self.digest, &row);
        if self.ctx.config.record_transcript {
            self.rows.push(row);
        }
        let beacon = Beacon { pcb, ingress: intf.neighbor_interface, received_at: self.ctx.now };
        self.outs.push(Outgoing { to, beacon });
    }
}

/// Whether a beacon of `kind` may leave on `out`; `from_customer` says it
/// was originated here or learned from a customer.
fn exportable(ctx: &Ctx, node: &AsNode, kind: SegmentKind, from_customer: bool, out: &Interface) -> bool {
    match (ctx.config.mode, kind) {
        (Mode::Hierarchical, SegmentKind::Core) => node.core && ctx.core.contains(&out.neighbor),
        (Mode::Hierarchical, SegmentKind::IntraIsd) => out.role == NeighborRole::Customer && !ctx.core.contains(&out.neighbor),
        (Mode::Flat, _) => match ctx.config.export {
            ExportPolicy::Flood => true,
            ExportPolicy::ValleyFree => from_customer || out.role == NeighborRole::Customer,
        },
    }
}

/// Stored beacons of one group sharing ingress and timestamp hour, and with
/// it the own-segment cost toward any egress.
struct Lane {
    ingress: InterfaceId,
    in_slot: usize,
    from_customer: bool,
    table: usize,
    ts: Timestamp,
    idx: usize,
    /// (upstream cost, hops, path digest, group position), ascending.
    items: Vec<(u32, usize, u64, usize)>,
}

fn lanes(f: &mut Firing, kind: SegmentKind, group: &[&Beacon], now: Timestamp) -> Vec<Lane> {
    let mut out: Vec<Lane> = Vec::new();
    for (c, b) in group.iter().enumerate() {
        let Some(idx) = current_hour_index(b.pcb.timestamp, now) else { continue };
        let table = f.table(kind, b.pcb.timestamp);
        let item = (b.pcb.cost_at_index(idx), b.pcb.hops(), b.pcb.path_digest(), c);
        match out.iter_mut().find(|l| l.ingress == b.ingress && l.table == table) {
            Some(l) => l.items.push(item),
            None => out.push(Lane {
                ingress: b.ingress,
                in_slot: f.slot(b.ingress),
                from_customer: f.node.interfaces.get(&b.ingress).is_some_and(|x| x.role == NeighborRole::Customer),
                table,
                ts: b.pcb.timestamp,
                idx,
                items: vec![item],
            }),
        }
    }
    for l in &mut out {
        l.items.sort_unstable();
    }
    out
}

fn fire(a: &mut AsRuntime, ctx: &Ctx, now: Timestamp) -> Option<Fired> {
    if a.next_fire > now {
        return None;
    }
    while a.next_fire <= now {
        a.next_fire += a.period_secs;
    }
    let i = ctx.index[&a.asn];
    let state = &ctx.states[i];
    if let Some(db) = a.db.as_mut() {
        if db.tcie_due(now) && db.run_tcie_tick(state, ctx.provider, now).is_err() {
            a.forecast_errors += 1;
        }
    }
    a.store.evict_expired(now);
    let revision = a.db.as_ref().map(ForecastDatabase::revision);
    if revision != a.ext_revision {
        a.ext_tables.clear();
        a.ext_revision = revision;
    }
    let live_from = hour_of(now).saturating_sub(HOURS as u64 - 1);
    a.ext_tables.retain(|((_, h), _)| *h >= live_from);
    let node = &ctx.topo.ases[&a.asn];
    let egresses: Vec<InterfaceId> = node.interfaces.keys().copied().collect();
    let mut f = Firing { ctx, node, db: a.db.as_ref(), slots: egresses.clone(), tables: std::mem::take(&mut a.ext_tables), outs: Vec::new(), rows: Vec::new(), digest: FNV_BASIS };

    if ctx.origins.contains(&a.asn) {
        let kinds: &[SegmentKind] = match ctx.config.mode {
            Mode::Flat => &[SegmentKind::Core],
            Mode::Hierarchical if node.core => &[SegmentKind::Core, SegmentKind::IntraIsd],
            Mode::Hierarchical => &[],
        };
        for &kind in kinds {
            for (es, &e) in egresses.iter().enumerate() {
                let out = &node.interfaces[&e];
                if !exportable(ctx, node, kind, true, out) {
                    continue;
                }
                let ext = match kind {
                    SegmentKind::Core => None,
                    SegmentKind::IntraIsd => f.extension(kind, BeaconRole::IntraIsdOrigin, 0, es, InterfaceId::NONE, e, now),
                };
                let pcb = Pcb::originate(a.asn, e, now, kind, ext);
                f.send(out, e, pcb);
            }
        }
    }

    let role_of = |kind: SegmentKind| match kind {
        SegmentKind::Core => BeaconRole::CoreBeacon,
        SegmentKind::IntraIsd => BeaconRole::IntraIsdPropagate,
    };
    let n = ctx.config.retention_n;
    let groups: Vec<((SegmentKind, AsId), Vec<&Beacon>)> = match ctx.config.optimize {
        Optimize::Green => a.store.groups().map(|(k, g)| (k, g.iter().collect())).collect(),
        Optimize::None => {
            a.store.groups().map(|((kind, origin), _)| ((kind, origin), select_pcbs(&a.store, kind, origin))).collect()
        }
    };
    let mut cands = Vec::new();
    let mut chosen = Vec::new();
    let mut heap = BinaryHeap::new();
    let green = ctx.config.optimize == Optimize::Green;
    for ((kind, _origin), group) in groups {
        let role = role_of(kind);
        let lanes = if green { lanes(&mut f, kind, group.as_slice(), now) } else { Vec::new() };
        let from_customer: Vec<bool> = if green {
            Vec::new()
        } else {
            group.iter().map(|b| node.interfaces.get(&b.ingress).is_some_and(|x| x.role == NeighborRole::Customer)).collect()
        };
        for (es, &e) in egresses.iter().enumerate() {
            let out = &node.interfaces[&e];
            let (neighbor, up_ok, down_ok) =
                (out.neighbor, exportable(ctx, node, kind, false, out), exportable(ctx, node, kind, true, out));
            if !down_ok {
                continue;
            }
            chosen.clear();
            if green {
                // k-way merge over lanes; each lane shares one own-segment cost
                heap.clear();
                let mut own = vec![0u32; lanes.len()];
                for (l, lane) in lanes.iter().enumerate() {
                    if lane.ingress == e || !(up_ok || lane.from_customer) {
                        continue;
                    }
                    own[l] = f.own_octet(lane.table, kind, role, lane.in_slot, es, lane.ingress, e, lane.ts, lane.idx);
                    let (cum, hops, digest, _) = lane.items[0];
                    heap.push(Reverse((cum + own[l], hops, digest, l, 0usize)));
                }
                while chosen.len() < n {
                    let Some(Reverse((_, _, _, l, p))) = heap.pop() else { break };
                    let items = &lanes[l].items;
                    let c = items[p].3;
                    if !group[c].pcb.contains_as(neighbor) {
                        chosen.push(c);
                    }
                    if let Some(&(cum, hops, digest, _)) = items.get(p + 1) {
                        heap.push(Reverse((cum + own[l], hops, digest, l, p + 1)));
                    }
                }
            } else {
                cands.clear();
                cands.extend((0..group.len()).filter(|&c| {
                    let b = group[c];
                    b.ingress != e && (up_ok || from_customer[c]) && !b.pcb.contains_as(neighbor)
                }));
                chosen.extend(cands.iter().copied().take(n));
            }
            for &c in &chosen {
                let b = group[c];
                let in_slot = f.slot(b.ingress);
                let extension = f.extension(kind, role, in_slot, es, b.ingress, e, b.pcb.timestamp);
                let entry = AsEntry { as_id: a.asn, ingress: b.ingress, egress: e, extension };
                let child = b.pcb.extend(entry);
                f.send(out, e, child);
            }
        }
    }
    a.ext_tables = f.tables;
    Some(Fired { outs: f.outs, rows: f.rows, digest: f.digest })
}

fn segment_octet(ext: &CidtExtension, ingress: InterfaceId, idx: usize) -> Option<u32> {
    let v = match ext {
        CidtExtension::Flat(v) => v,
        CidtExtension::Map(m) => m.get(&ingress)?,
    };
    Some(u32::from(v.backward()[idx]))
}

pub fn write_transcript_csv(rows: &[TranscriptRow], out: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "round",
            "sender",
            "egress",
            "origin",
            "hop_count",
            "coverage_ratio",
            "current_hour_cidt_mg_per_gbit",
            "bytes",
        ])?;
    }
    w.flush()?;
    Ok(())
}
