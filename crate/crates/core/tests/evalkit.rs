// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use ndarray::{array, Array1, Array2};
use physteer::actstore::{ActivationStore, Block, LayerData, Split};
use physteer::evalkit::{
    directional_purity, flip_rate, orthogonality_report, pairwise_angles, project2d, random_unit_vectors,
    representation_drift, subspace_angle,
};
use physteer::probekit::{train_probe, Basis, PcaPolicy, ProbeConfig, SweepConfig};
use physteer::steer::{make_block_cavs, make_cav, Cav, CavScope};

use common::oracle::planted;
use common::{gaussian_matrix, metas, random_unit};

/// `E[arccos |u·v|]` in degrees for independent uniform unit vectors in
/// `dim` dimensions, by midpoint integration over the density of one
/// coordinate, `∝ (1 − t²)^((dim − 3) / 2)` on `[0, 1]`.
fn expected_random_angle(dim: usize) -> f64 {
    let steps = 200_000;
    let h = 1.0 / steps as f64;
    let p = (dim as f64 - 3.0) / 2.0;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..steps {
        let t = (i as f64 + 0.5) * h;
        let w = (1.0 - t * t).powf(p);
        num += w * t.acos();
        den += w;
    }
    (num / den).to_degrees()
}

#[test]
fn flip_rate_counts_changed_predictions() {
    assert_eq!(flip_rate(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap(), 0.0);
    assert_eq!(flip_rate(&[0; 72], &[1; 72]).unwrap(), 1.0);
    assert_eq!(flip_rate(&[0, 1, 1, 0], &[1, 1, 0, 0]).unwrap(), 0.5);
    assert!(flip_rate(&[0, 1], &[0]).is_err());
}

#[test]
fn purity_and_drift_examples() {
    let v = random_unit(16, 1);
    let f = gaussian_matrix(1, 16, 2).row(0).to_owned();
    let p = directional_purity(f.view(), (&f + &(&v * 3.0)).view(), v.view()).unwrap();
    assert!((p.value - 1.0).abs() < 1e-12 && p.defined);
    let p = directional_purity(f.view(), (&f - &(&v * 3.0)).view(), v.view()).unwrap();
    assert!((p.value + 1.0).abs() < 1e-12);
    let zero = directional_purity(f.view(), f.view(), v.view()).unwrap();
    assert_eq!((zero.value, zero.defined), (0.0, false));
    assert_eq!(representation_drift(f.view(), f.view()).unwrap(), 0.0);
    assert!((representation_drift(f.view(), (&f + &(&v * -7.0)).view()).unwrap() - 7.0).abs() < 1e-12);

    let g = gaussian_matrix(1, 16, 3).row(0).to_owned();
    let mut s = 0.0;
    for i in 0..16 {
        s += (g[i] - f[i]) * (g[i] - f[i]);
    }
    assert!((representation_drift(f.view(), g.view()).unwrap() - s.sqrt()).abs() < 1e-12);

    let orth = array![1.0, 0.0];
    let p = directional_purity(array![0.0, 0.0].view(), array![0.0, 2.0].view(), orth.view()).unwrap();
    assert_eq!(p.value, 0.0);
}

#[test]
fn angles_are_bounded_symmetric_and_sign_blind() {
    let u = random_unit(8, 4);
    let v = random_unit(8, 5);
    let a = subspace_angle(u.view(), v.view()).unwrap();
    assert_eq!(a, subspace_angle(v.view(), u.view()).unwrap());
    assert!((0.0..=90.0).contains(&a));
    assert_eq!(subspace_angle(u.view(), u.view()).unwrap(), 0.0);
    assert_eq!(subspace_angle(u.view(), (-&u).view()).unwrap(), 0.0);
    let e0 = array![1.0, 0.0, 0.0];
    let e2 = array![0.0, 0.0, 1.0];
    assert_eq!(subspace_angle(e0.view(), e2.view()).unwrap(), 90.0);
    let named = vec![
        ("a".to_string(), u.view()),
        ("b".to_string(), v.view()),
        ("c".to_string(), u.view()),
    ];
    let pairs = pairwise_angles(&named).unwrap();
    assert_eq!(pairs.len(), 3);
    assert_eq!(pairs[1].degrees, 0.0);
}

#[test]
fn random_directions_follow_the_analytic_angle_distribution() {
    let expected = expected_random_angle(64);
    // the absolute-value angle concentrates below 90° at this dimension
    assert!((84.0..84.6).contains(&expected), "{expected}");
    let physics = random_unit(64, 99);
    let r = orthogonality_report(physics.view(), None, &[], 4000, 3).unwrap();
    let se = r.physics_random.std / (4000f64).sqrt();
    assert!(
        (r.physics_random.mean - expected).abs() < 4.0 * se,
        "{} vs {expected}",
        r.physics_random.mean
    );
    assert!(r.physics_random.min >= 0.0 && r.physics_random.max <= 90.0);
}

#[test]
fn random_vectors_are_seeded_units() {
    let a = random_unit_vectors(64, 10, 5);
    assert_eq!(a, random_unit_vectors(64, 10, 5));
    assert_ne!(a, random_unit_vectors(64, 10, 6));
    for v in &a {
        assert!((v.dot(v) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn steering_along_the_cav_raises_the_logit_linearly() {
    let (x, y) = planted(80, 6, 1, 7);
    let probe = train_probe(x.view(), &y, &ProbeConfig::default(), Basis::Auto, None).unwrap();
    let cav = make_cav(&probe, 0, CavScope::All).unwrap();
    let norm = probe.weights.dot(&probe.weights).sqrt();
    assert!((cav.weight_norm - norm).abs() < 1e-12);
    let f = x.row(0);
    for alpha in [-20.0, -1.0, 0.5, 15.0] {
        let steered = &f + &(cav.direction() * alpha);
        let got = probe.logit(steered.view());
        assert!((got - (probe.logit(f) + alpha * norm)).abs() < 1e-9);
    }
}

#[test]
fn cav_points_toward_the_impossible_class_mean() {
    let (x, y) = planted(200, 10, 3, 8);
    let probe = train_probe(x.view(), &y, &ProbeConfig::default(), Basis::Auto, None).unwrap();
    let cav = make_cav(&probe, 0, CavScope::All).unwrap();
    let class_mean = |label: u8| {
        let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        let mut m = Array1::<f64>::zeros(10);
        for &i in &rows {
            m += &x.row(i);
        }
        m / rows.len() as f64
    };
    assert!(class_mean(1).dot(cav.direction()) > class_mean(0).dot(cav.direction()));
}

#[test]
fn identical_block_data_gives_parallel_block_cavs() {
    let mut videos = metas(10, Split::Train);
    for (i, v) in videos.iter_mut().enumerate() {
        if i % 5 == 4 {
            v.split = Split::Val;
        }
    }
    // each block's 20 rows repeat the same feature rows
    let per_block = gaussian_matrix(20, 6, 1);
    let mut x = Array2::zeros((60, 6));
    for b in 0..3 {
        for r in 0..20 {
            let mut row = per_block.row(r).to_owned();
            row[0] += if videos[b * 20 + r].plausibility.label() == 1 {
                2.0
            } else {
                -2.0
            };
            x.row_mut(b * 20 + r).assign(&row);
        }
    }
    let store = ActivationStore::builder("m", 1, 1, 6, videos)
        .layer(0, LayerData::pooled_only(x))
        .build()
        .unwrap();
    let cfg = SweepConfig {
        probe: ProbeConfig {
            pca: PcaPolicy::Never,
            ..ProbeConfig::default()
        },
        ..SweepConfig::default()
    };
    let cavs = make_block_cavs(&store, 0, &cfg).unwrap();
    assert_eq!(cavs.iter().map(|c| c.0).collect::<Vec<_>>(), Block::ALL.to_vec());
    let named: Vec<(String, _)> = cavs
        .iter()
        .map(|(b, c)| (b.to_string(), c.direction().view()))
        .collect();
    for pair in pairwise_angles(&named).unwrap() {
        assert!(pair.degrees < 1e-5, "{pair:?}");
    }
}

#[test]
fn projection_of_one_dimensional_data_uses_the_first_axis() {
    let videos = metas(2, Split::Test);
    let refs: Vec<_> = videos.iter().collect();
    let u = random_unit(5, 3);
    let base = Array2::from_shape_fn((12, 5), |(i, j)| 1.0 + (i as f64 - 5.5) * u[j]);
    let v = random_unit(5, 4);
    let steered = &base + &(&v * 2.0);
    let (pca, rows) = project2d(&refs, base.view(), steered.view()).unwrap();
    assert!((pca.explained_variance_ratio()[0] - 1.0).abs() < 1e-10);
    for (i, r) in rows.iter().enumerate() {
        assert!(r.y.abs() < 1e-9);
        let z = pca.transform_row(steered.row(i));
        assert!((r.steered_x - z[0]).abs() < 1e-12 && (r.steered_y - z[1]).abs() < 1e-12);
        // the arrow is the projected steering vector
        let arrow = [r.steered_x - r.x, r.steered_y - r.y];
        let proj = pca.basis.dot(&(&v * 2.0));
        assert!((arrow[0] - proj[0]).abs() < 1e-9 && (arrow[1] - proj[1]).abs() < 1e-9);
    }
    assert!(project2d(&refs[..3], base.view(), steered.view()).is_err());
}

#[test]
fn cav_rejects_zero_and_normalises() {
    assert!(Cav::new(0, Array1::zeros(4), CavScope::All).is_err());
    let c = Cav::new(2, array![3.0, 4.0], CavScope::Block(Block::O2)).unwrap();
    assert_eq!(c.direction(), &array![0.6, 0.8]);
    assert_eq!(c.weight_norm, 5.0);
}
