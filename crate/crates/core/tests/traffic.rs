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
//! Traffic matrices against direct recomputation.

use std::collections::{BTreeMap, BTreeSet};

use ciro_core::ids::AsId;
use ciro_core::topology::gen_synthetic;
use ciro_core::traffic::{
    aggregate_to_core, http_matrix, popularity_table, read_profiles, synth_profiles, video_matrix, write_profiles,
    zipf_popularity, AsProfile, TrafficMatrix,
};
use proptest::prelude::*;

fn profiles() -> impl Strategy<Value = Vec<AsProfile>> {
    proptest::collection::vec((1.0f64..1e7, 0u8..8, proptest::option::of(1u32..20)), 2..14).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (size, flags, rank))| AsProfile {
                as_id: AsId(i as u64 + 1),
                size: size.round(),
                no_users: flags == 0,
                cdn_no_requests: flags == 1,
                video: flags == 2,
                popularity_rank: rank,
            })
            .collect()
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn zipf_vector_is_a_permuted_power_law(n in 1usize..300, slope in 0.3f64..3.0, seed in any::<u64>(), k in 0usize..5) {
        let popular: Vec<usize> = (0..k.min(n)).map(|i| (i * 7) % n).collect::<BTreeSet<_>>().into_iter().collect();
        let p = zipf_popularity(n, slope, seed, &popular).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let norm: f64 = (1..=n).map(|r| (r as f64).powf(-slope)).sum();
        for (rank, &pos) in popular.iter().enumerate() {
            prop_assert!(rel_close(p[pos], ((rank + 1) as f64).powf(-slope) / norm, 1e-12));
        }
        let mut sorted = p.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        for (r, v) in sorted.iter().enumerate() {
            prop_assert!(rel_close(*v, ((r + 1) as f64).powf(-slope) / norm, 1e-12));
        }
    }

    #[test]
    fn http_matrix_follows_the_gravity_formula(ps in profiles(), d in 0.0f64..20.0, seed in any::<u64>()) {
        let pop = popularity_table(&ps, 1.2, seed).unwrap();
        for row in pop.values() {
            prop_assert!((row.values().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let total = 82e18 * 12.0;
        let size = |p: &AsProfile| if p.no_users || p.cdn_no_requests { 0.0 } else { p.size };
        let mut want = BTreeMap::new();
        for a in &ps {
            for b in ps.iter().filter(|b| b.as_id != a.as_id) {
                let t = size(a) * pop[&a.as_id][&b.as_id] + d * size(b) * pop[&b.as_id][&a.as_id];
                want.insert((a.as_id, b.as_id), t);
            }
        }
        let rel: f64 = want.values().sum();
        prop_assume!(rel > 0.0);
        let (m, factor) = http_matrix(&ps, &pop, d, total).unwrap();
        prop_assert_eq!(m.total(), total);
        prop_assert!(rel_close(factor, total / rel, 1e-12));
        for ((s, t), v) in &want {
            prop_assert!((m.get(*s, *t) - v * factor).abs() <= 1e-9 * total, "{}->{}", s, t);
        }
    }

    #[test]
    fn video_services_split_their_share_by_size(ps in profiles(), shares in proptest::collection::vec(0.01f64..0.3, 1..4)) {
        let services: Vec<(AsId, f64)> = ps.iter().map(|p| p.as_id).zip(shares).collect();
        let total = 1e21;
        let Ok(m) = video_matrix(&ps, &services, total) else {
            // only legal when some service has no user AS to serve
            prop_assert!(services.iter().any(|(s, _)| ps.iter().all(|p| p.as_id == *s || p.no_users)));
            return Ok(());
        };
        for &(svc, share) in &services {
            prop_assert!(rel_close(m.outbound(svc), share * total, 1e-12));
            let users: f64 = ps.iter().filter(|p| p.as_id != svc && !p.no_users).map(|p| p.size).sum();
            for p in ps.iter().filter(|p| p.as_id != svc) {
                let want = if p.no_users { 0.0 } else { share * total * p.size / users };
                prop_assert!(rel_close(m.get(svc, p.as_id), want, 1e-12));
            }
        }
    }

    #[test]
    fn aggregation_conserves_volume(
        n in 3usize..30,
        entries in proptest::collection::vec((0usize..30, 0usize..30, 1.0f64..1e15), 1..80),
        owners in proptest::collection::vec(proptest::collection::btree_set(0usize..3, 1..3), 30),
    ) {
        let core: BTreeSet<AsId> = (1..=3).map(AsId).collect();
        let mut cones: BTreeMap<AsId, BTreeSet<AsId>> = BTreeMap::new();
        for a in 4..=n as u64 {
            for c in &owners[a as usize] {
                cones.entry(AsId(*c as u64 + 1)).or_default().insert(AsId(a));
            }
        }
        let mut full = TrafficMatrix::new();
        for (s, d, v) in entries {
            let (s, d) = (AsId((s % n) as u64 + 1), AsId((d % n) as u64 + 1));
            if s != d {
                full.add(s, d, v);
            }
        }
        let agg = aggregate_to_core(&full, &core, &cones).unwrap();
        prop_assert!(rel_close(agg.matrix.total() + agg.dropped_intra_core, full.total(), 1e-12));
        prop_assert!(agg.matrix.iter().all(|((s, d), _)| core.contains(&s) && core.contains(&d) && s != d));
    }
}

#[test]
fn profiles_and_matrices_survive_csv() {
    let topo = gen_synthetic(2, 40, &Default::default()).unwrap();
    let ps = synth_profiles(&topo, 9);
    let mut buf = Vec::new();
    write_profiles(&ps, &mut buf).unwrap();
    assert_eq!(read_profiles(buf.as_slice()).unwrap(), ps);

    let pop = popularity_table(&ps, 1.2, 9).unwrap();
    let (m, _) = http_matrix(&ps, &pop, 10.0, 1e20).unwrap();
    let mut buf = b"# seed=9\n".to_vec();
    m.write_csv(&mut buf).unwrap();
    assert_eq!(TrafficMatrix::read_csv(buf.as_slice()).unwrap(), m);
}

#[test]
fn unknown_profile_flag_is_rejected() {
    let csv = "as_id,size,flags,rank\n1,10,no_users|tier9,\n";
    assert!(read_profiles(csv.as_bytes()).is_err());
}
