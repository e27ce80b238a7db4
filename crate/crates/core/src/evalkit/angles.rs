// SPDX-License-Identifier: MIT OR Apache-2.0

use ndarray::{Array1, ArrayView1};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::metrics::subspace_angle;
use crate::error::{Error, Result};
use crate::util::{mean, rng_for, sample_std};

pub const DEFAULT_RANDOM_DRAWS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    pub a: String,
    pub b: String,
    pub degrees: f64,
}

/// Angles between every unordered pair of distinct named directions.
pub fn pairwise_angles(named: &[(String, ArrayView1<f64>)]) -> Result<Vec<AnglePair>> {
    let mut out = Vec::new();
    for i in 0..named.len() {
        for j in i + 1..named.len() {
            out.push(AnglePair {
                a: named[i].0.clone(),
                b: named[j].0.clone(),
                degrees: subspace_angle(named[i].1, named[j].1)?,
            });
        }
    }
    Ok(out)
}

/// Seeded unit vectors with isotropic direction.
pub fn random_unit_vectors(dim: usize, count: usize, seed: u64) -> Vec<Array1<f64>> {
    let mut rng = rng_for(seed, "random-directions");
    (0..count)
        .map(|_| loop {
            let v = Array1::from_shape_simple_fn(dim, || {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            let n = v.dot(&v).sqrt();
            if n > 0.0 {
                break v / n;
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomBaseline {
    pub draws: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub physics_motion: Option<f64>,
    pub physics_random: RandomBaseline,
    /// Pairwise angles between per-block CAVs.
    pub block_pairs: Vec<AnglePair>,
    /// Angle of each block CAV against the global physics CAV.
    pub physics_blocks: Vec<AnglePair>,
}

/// Angles of the physics direction against motion, random directions and
/// per-block directions.
pub fn orthogonality_report(
    physics: ArrayView1<f64>,
    motion: Option<ArrayView1<f64>>,
    blocks: &[(String, ArrayView1<f64>)],
    n_random: usize,
    seed: u64,
) -> Result<OrthogonalityReport> {
    if n_random == 0 {
        return Err(Error::Config("need at least one random draw".into()));
    }
    let physics_motion = motion.map(|m| subspace_angle(physics, m)).transpose()?;
    let angles: Vec<f64> = random_unit_vectors(physics.len(), n_random, seed)
        .iter()
        .map(|r| subspace_angle(physics, r.view()))
        .collect::<Result<_>>()?;
    let physics_random = RandomBaseline {
        draws: n_random,
        mean: mean(&angles),
        std: sample_std(&angles),
        min: angles.iter().copied().fold(f64::INFINITY, f64::min),
        max: angles.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let physics_blocks = blocks
        .iter()
        .map(|(name, v)| {
            Ok(AnglePair {
                a: "physics".into(),
                b: name.clone(),
                degrees: subspace_angle(physics, *v)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(OrthogonalityReport {
        physics_motion,
        physics_random,
        block_pairs: pairwise_angles(blocks)?,
        physics_blocks,
    })
}
