// SPDX-License-Identifier: MIT OR Apache-2.0

//! Iterative orthogonal probing: fit a probe, project its direction out of
//! the features, and repeat.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::cv::cross_validate;
use super::probe::{train_probe, Basis, ProbeConfig};
use crate::error::{Error, Result};

/// Margin above the majority rate that still counts as chance.
pub const CHANCE_MARGIN: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthoStep {
    /// 1-based; iteration `i` probes data with `i − 1` directions removed.
    pub iteration: usize,
    pub accuracy: f64,
    /// Unit direction removed after this step, absent for a degenerate step.
    #[serde(skip)]
    pub direction: Option<Array1<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthoReport {
    pub steps: Vec<OrthoStep>,
    pub majority_rate: f64,
    /// First iteration whose accuracy is within the chance margin.
    pub chance_iteration: Option<usize>,
    /// Why the loop ended before `max_iters`, if it did.
    pub stopped_early: Option<String>,
}

impl OrthoReport {
    pub fn directions(&self) -> Vec<&Array1<f64>> {
        self.steps.iter().filter_map(|s| s.direction.as_ref()).collect()
    }
}

fn is_degenerate(x: &Array2<f64>, scale: f64) -> bool {
    let mean = match x.mean_axis(Axis(0)) {
        Some(m) => m,
        None => return true,
    };
    let spread = (x - &mean).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    spread <= 1e-9 * scale.max(1e-300)
}

pub fn iterative_orthogonal_probes(
    x: ArrayView2<f64>,
    y: &[u8],
    max_iters: usize,
    folds: usize,
    seed: u64,
    cfg: &ProbeConfig,
) -> Result<OrthoReport> {
    let (n, d) = x.dim();
    if max_iters > d + 1 {
        return Err(Error::Config(format!(
            "max_iters {max_iters} exceeds D + 1 = {}",
            d + 1
        )));
    }
    if y.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} rows", y.len())));
    }
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let majority_rate = pos.max(n as f64 - pos) / n as f64;
    let mean0 = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(d));
    let scale = (&x - &mean0).iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut cur = x.to_owned();
    let mut dirs: Vec<Array1<f64>> = Vec::new();
    let mut steps = Vec::new();
    let mut stopped_early = None;
    for iteration in 1..=max_iters {
        if is_degenerate(&cur, scale) {
            steps.push(OrthoStep {
                iteration,
                accuracy: majority_rate,
                direction: None,
            });
            stopped_early = Some(format!("projected data has no variance left at iteration {iteration}"));
            break;
        }
        let cv = cross_validate(cur.view(), y, folds, seed, cfg)?;
        let probe = train_probe(cur.view(), y, cfg, Basis::Auto, None)?;
        let mut v = probe.weights.clone();
        for u in &dirs {
            let c = v.dot(u);
            v.scaled_add(-c, u);
        }
        let norm = v.dot(&v).sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            steps.push(OrthoStep {
                iteration,
                accuracy: cv.mean,
                direction: None,
            });
            stopped_early = Some(format!("probe direction vanished at iteration {iteration}"));
            break;
        }
        v /= norm;
        let proj = cur.dot(&v);
        for (mut row, p) in cur.rows_mut().into_iter().zip(proj.iter()) {
            row.scaled_add(-p, &v);
        }
        steps.push(OrthoStep {
            iteration,
            accuracy: cv.mean,
            direction: Some(v.clone()),
        });
        dirs.push(v);
    }
    let chance_iteration = steps
        .iter()
        .find(|s| s.accuracy <= majority_rate + CHANCE_MARGIN)
        .map(|s| s.iteration);
    Ok(OrthoReport {
        steps,
        majority_rate,
        chance_iteration,
        stopped_early,
    })
}
