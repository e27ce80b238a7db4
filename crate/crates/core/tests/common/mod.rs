// SPDX-License-Identifier: MIT OR Apache-2.0
#![allow(dead_code)]

pub mod oracle;

use ndarray::{Array1, Array2, Array3};
use physteer::actstore::{Block, Motion, Plausibility, Split, VideoMeta};
use physteer::config::RunConfig;
use physteer::util::rng_for;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Small end-to-end config: 60 videos, 4 encoder layers.
pub fn small_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        seed,
        pairs_per_block: 10,
        ..RunConfig::default()
    };
    cfg.encoder.layers = 4;
    cfg.sweep.random_draws = 200;
    cfg
}

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_for(seed, "test-matrix");
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    })
}

/// Gaussian entries rounded to f32, so they survive a dump round trip.
pub fn f32_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    gaussian_matrix(rows, cols, seed).mapv(|v| v as f32 as f64)
}

pub fn f32_tensor(a: usize, b: usize, c: usize, seed: u64) -> Array3<f64> {
    let m = f32_matrix(a * b, c, seed);
    m.into_shape_with_order((a, b, c)).unwrap()
}

pub fn unit(v: Array1<f64>) -> Array1<f64> {
    let n = v.dot(&v).sqrt();
    v / n
}

pub fn random_unit(dim: usize, seed: u64) -> Array1<f64> {
    let m = gaussian_matrix(1, dim, seed);
    unit(m.row(0).to_owned())
}

pub fn random_labels(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = rng_for(seed, "test-labels");
    (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect()
}

/// `per_stratum` videos for each (plausibility, block), all in `split`.
pub fn metas(per_stratum: usize, split: Split) -> Vec<VideoMeta> {
    let mut out = Vec::new();
    for block in Block::ALL {
        for plaus in [Plausibility::Possible, Plausibility::Impossible] {
            for i in 0..per_stratum {
                out.push(VideoMeta {
                    id: format!("{block}-{}-{i}", plaus.label()),
                    plausibility: plaus,
                    block,
                    motion: if i % 2 == 0 { Motion::Left } else { Motion::Right },
                    split,
                });
            }
        }
    }
    out
}
