// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use ndarray::{Array1, Array2};
use physteer::actstore::{mean_pool, read_dump, split_indices, write_dump, ActivationStore, LayerData, Split};
use physteer::evalkit::{directional_purity, subspace_angle};
use physteer::probekit::{find_pez, stratified_folds, Probe};
use physteer::steer::{Cav, CavScope};
use proptest::prelude::*;

use common::{f32_tensor, gaussian_matrix, metas};

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dim)
}

fn nonzero(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    vector(dim).prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
}

fn probe_from(w: Array1<f64>, b: f64) -> Probe {
    Probe {
        weights: w,
        intercept: b,
        pca: None,
        reduced_weights: None,
        reduced_intercept: 0.0,
        flip_corrected: false,
        iterations: 0,
        converged: true,
        gradient_norm: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_pool_is_linear(seed in 0u64..1000, a in -5.0f64..5.0, b in -5.0f64..5.0, n in 1usize..20) {
        let x = gaussian_matrix(n, 8, seed);
        let y = gaussian_matrix(n, 8, seed + 1);
        let lhs = mean_pool((&x * a + &y * b).view()).unwrap();
        let rhs = mean_pool(x.view()).unwrap() * a + mean_pool(y.view()).unwrap() * b;
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()) * 10.0);
        }
    }

    #[test]
    fn split_counts_stay_within_one_of_target(per in 5usize..30, seed in 0u64..500) {
        let videos = metas(per, Split::Train);
        let splits = split_indices(&videos, [0.6, 0.2, 0.2], seed).unwrap();
        prop_assert_eq!(&splits, &split_indices(&videos, [0.6, 0.2, 0.2], seed).unwrap());
        for stratum in videos.chunks(per) {
            let first = videos.iter().position(|v| v.id == stratum[0].id).unwrap();
            let mine = &splits[first..first + per];
            for (s, f) in [(Split::Train, 0.6), (Split::Val, 0.2), (Split::Test, 0.2)] {
                let c = mine.iter().filter(|&&x| x == s).count() as f64;
                prop_assert!((c - f * per as f64).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn folds_balance_each_class(y in prop::collection::vec(0u8..2, 20..80), k in 2usize..6, seed in 0u64..100) {
        let pos = y.iter().filter(|&&v| v == 1).count();
        prop_assume!(pos >= k && y.len() - pos >= k);
        let folds = stratified_folds(&y, k, seed).unwrap();
        let mut sizes = vec![0usize; k];
        for f in &folds {
            sizes[*f] += 1;
        }
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for class in [0u8, 1] {
            let mut per = vec![0usize; k];
            for (i, f) in folds.iter().enumerate() {
                if y[i] == class {
                    per[*f] += 1;
                }
            }
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn pez_ignores_input_order_and_common_shifts(
        ticks in prop::collection::vec(0u32..64, 1..12),
        shift in 0u32..16,
        rotate in 0usize..12,
        k in 1usize..5,
    ) {
        // dyadic accuracies keep the threshold arithmetic exact
        let acc: Vec<(i32, f64)> = ticks.iter().enumerate().map(|(l, &t)| (l as i32, t as f64 / 128.0)).collect();
        let eps = 0.0625;
        let base = find_pez(&acc, eps, k).unwrap();
        let mut rotated = acc.clone();
        rotated.rotate_left(rotate % acc.len());
        rotated.reverse();
        let r = find_pez(&rotated, eps, k).unwrap();
        prop_assert_eq!(&r.pez_layers, &base.pez_layers);
        prop_assert_eq!(&r.top_k, &base.top_k);
        let shifted: Vec<(i32, f64)> = acc.iter().map(|&(l, a)| (l, a + shift as f64 / 128.0)).collect();
        let s = find_pez(&shifted, eps, k).unwrap();
        prop_assert_eq!(&s.pez_layers, &base.pez_layers);
        prop_assert_eq!(&s.top_k, &base.top_k);
        let best = acc.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        for &(l, a) in &acc {
            prop_assert_eq!(base.pez_layers.contains(&l), a >= best - eps);
        }
        prop_assert_eq!(base.top_k.len(), k.min(base.pez_layers.len()));
    }

    #[test]
    fn flip_check_is_idempotent(seed in 0u64..1000, b in -1.0f64..1.0) {
        let x = gaussian_matrix(30, 4, seed);
        let y: Vec<u8> = (0..30).map(|i| u8::from(x[[i, 0]] > 0.0)).collect();
        let w = common::random_unit(4, seed + 7);
        let mut once = probe_from(w, b);
        let acc = once.flip_check(x.view(), &y);
        prop_assert!(acc >= 0.5);
        let mut twice = once.clone();
        prop_assert_eq!(twice.flip_check(x.view(), &y), acc);
        prop_assert_eq!(&twice.weights, &once.weights);
        prop_assert_eq!(twice.flip_corrected, once.flip_corrected);
    }

    #[test]
    fn cav_direction_ignores_positive_scale(w in nonzero(6), s in 0.01f64..100.0) {
        let w = Array1::from(w);
        let a = Cav::new(0, w.clone(), CavScope::All).unwrap();
        let b = Cav::new(0, &w * s, CavScope::All).unwrap();
        for (x, y) in a.direction().iter().zip(b.direction().iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((b.weight_norm - s * a.weight_norm).abs() <= 1e-9 * b.weight_norm);
    }

    #[test]
    fn angles_are_bounded_and_symmetric(u in nonzero(5), v in nonzero(5), s in -50.0f64..50.0) {
        prop_assume!(s.abs() > 1e-3);
        let (u, v) = (common::unit(Array1::from(u)), common::unit(Array1::from(v)));
        let a = subspace_angle(u.view(), v.view()).unwrap();
        prop_assert!((0.0..=90.0).contains(&a));
        prop_assert_eq!(a, subspace_angle(v.view(), u.view()).unwrap());
        // any non-zero rescaling, including a sign flip, names the same line;
        // arccos near 1 amplifies rounding to ~1e-6°
        let scaled = subspace_angle(common::unit(&u * s).view(), v.view()).unwrap();
        prop_assert!((scaled - a).abs() < 1e-5);
    }

    #[test]
    fn steering_logit_grows_linearly(w in nonzero(6), f in vector(6), b in -3.0f64..3.0, a1 in -20.0f64..20.0, a2 in -20.0f64..20.0) {
        let w = Array1::from(w);
        let f = Array1::from(f);
        let probe = probe_from(w.clone(), b);
        let cav = Cav::new(0, w.clone(), CavScope::All).unwrap();
        let norm = w.dot(&w).sqrt();
        let logit = |alpha: f64| probe.logit((&f + &(cav.direction() * alpha)).view());
        prop_assert!((logit(a1) - probe.logit(f.view()) - a1 * norm).abs() < 1e-9 * (1.0 + norm * 30.0));
        if a1 < a2 {
            prop_assert!(logit(a1) < logit(a2));
            prop_assert!(probe.probability((&f + &(cav.direction() * a1)).view())
                <= probe.probability((&f + &(cav.direction() * a2)).view()));
        }
    }

    #[test]
    fn purity_lies_in_the_unit_interval(f in vector(5), g in vector(5), v in nonzero(5)) {
        let v = Array1::from(v);
        let v = &v / v.dot(&v).sqrt();
        let p = directional_purity(Array1::from(f).view(), Array1::from(g).view(), v.view()).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&p.value));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dumps_round_trip_bit_exactly(seed in 0u64..10_000, tokens in 1usize..5, dim in 1usize..9, keep in any::<bool>()) {
        let videos = metas(1, Split::Val);
        let nv = videos.len();
        let t = f32_tensor(nv, tokens, dim, seed);
        // the stored pooled rows are f32, so only f32-exact means round-trip
        let pooled: Array2<f64> = t.mean_axis(ndarray::Axis(1)).unwrap().mapv(|v| v as f32 as f64);
        let data = LayerData {
            pooled,
            tokens: keep.then_some(t),
        };
        let store = ActivationStore::builder("m", 2, tokens, dim, videos)
            .layer(-1, data.clone())
            .layer(1, data)
            .build()
            .unwrap();
        let dir = tempfile::TempDir::new().unwrap();
        write_dump(&store, dir.path()).unwrap();
        let back = read_dump(dir.path()).unwrap();
        for l in [-1, 1] {
            let a: Vec<u64> = store.pooled(l).unwrap().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.pooled(l).unwrap().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(store.tokens(l).unwrap(), back.tokens(l).unwrap());
        }
        prop_assert_eq!(back.videos(), store.videos());
    }
}
