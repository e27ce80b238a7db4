// SPDX-License-Identifier: MIT OR Apache-2.0

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::probe::{train_probe, Basis, ProbeConfig};
use crate::error::{Error, Result};
use crate::util::{mean, rng_for, sample_std};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub std: f64,
    pub per_fold: Vec<f64>,
}

/// Fold index per sample. Each class is shuffled and dealt round-robin, the
/// deal continuing from where the previous class stopped so fold sizes stay
/// within one of each other.
pub fn stratified_folds(y: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    let mut assignment = vec![0; y.len()];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < folds {
            return Err(Error::Invalid(format!(
                "class {class} has {} member(s), fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng_for(seed, &format!("cv/class{class}")));
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Stratified k-fold accuracy.
///
/// Each fold fits with [`Basis::Auto`] on its own training rows. The
/// held-out fold is used only for scoring, so no flip check runs here.
pub fn cross_validate(x: ArrayView2<f64>, y: &[u8], folds: usize, seed: u64, cfg: &ProbeConfig) -> Result<CvSummary> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!("{} labels for {} rows", y.len(), x.nrows())));
    }
    let assignment = stratified_folds(y, folds, seed)?;
    let per_fold = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
            let xt = x.select(Axis(0), &train);
            let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let xh = x.select(Axis(0), &test);
            let yh: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            let probe = train_probe(xt.view(), &yt, cfg, Basis::Auto, None)?;
            Ok(probe.accuracy(xh.view(), &yh))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CvSummary {
        mean: mean(&per_fold),
        std: sample_std(&per_fold),
        per_fold,
    })
}
