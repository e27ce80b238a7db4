// SPDX-License-Identifier: MIT OR Apache-2.0

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::logistic::{fit_logistic, probability};
use super::pca::{fit_pca, PcaModel};
use crate::error::{Error, Result};

/// When to reduce features with PCA before fitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaPolicy {
    /// PCA to `k` components when there are fewer than `2·D` samples.
    Auto {
        k: usize,
    },
    Always {
        k: usize,
    },
    Never,
}

impl PcaPolicy {
    /// Number of components to use for `n` samples in `d` dimensions, if any.
    /// `k` is capped at `min(n − 1, d)`.
    pub fn components(&self, n: usize, d: usize) -> Option<usize> {
        let k = match *self {
            PcaPolicy::Auto { k } if n < 2 * d => k,
            PcaPolicy::Always { k } => k,
            _ => return None,
        };
        Some(k.min(n.saturating_sub(1)).min(d))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub pca: PcaPolicy,
    pub flip_check: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            c: 1.0,
            max_iter: 1000,
            tol: 1e-6,
            pca: PcaPolicy::Auto { k: 64 },
            flip_check: true,
        }
    }
}

/// Which PCA basis a fit uses.
#[derive(Clone, Copy, Debug)]
pub enum Basis<'a> {
    /// Decide from the config's policy and fit PCA on the training rows.
    Auto,
    /// Use a basis fitted elsewhere.
    Fixed(&'a PcaModel),
    /// Fit in the full space.
    Full,
}

/// Linear probe. `weights` and `intercept` live in the input space even
/// when the fit ran in PCA coordinates.
#[derive(Clone, Debug)]
pub struct Probe {
    pub weights: Array1<f64>,
    pub intercept: f64,
    pub pca: Option<PcaModel>,
    /// Weights in PCA coordinates, when PCA was used.
    pub reduced_weights: Option<Array1<f64>>,
    pub reduced_intercept: f64,
    pub flip_corrected: bool,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

fn check_inputs(x: ArrayView2<f64>, y: &[u8]) -> Result<()> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} rows", y.len())));
    }
    if n < 4 {
        return Err(Error::Invalid(format!("probe needs at least 4 samples, got {n}")));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Invalid("labels must be 0 or 1".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::Invalid("probe needs both classes".into()));
    }
    if let Some(((r, c), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("probe features row {r} column {c}"),
        });
    }
    Ok(())
}

impl Probe {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: ArrayView1<f64>) -> f64 {
        self.weights.dot(&x) + self.intercept
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }

    /// Decision function evaluated in PCA coordinates.
    pub fn reduced_logits(&self, x: ArrayView2<f64>) -> Option<Array1<f64>> {
        let (pca, w) = (self.pca.as_ref()?, self.reduced_weights.as_ref()?);
        Some(pca.transform(x).dot(w) + self.reduced_intercept)
    }

    /// `P(label = 1)`.
    pub fn probability(&self, x: ArrayView1<f64>) -> f64 {
        probability(self.logit(x))
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<u8> {
        self.logits(x).iter().map(|&z| u8::from(z > 0.0)).collect()
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, y: &[u8]) -> f64 {
        accuracy(&self.predict(x), y)
    }

    /// Negates the decision function.
    pub fn negate(&mut self) {
        self.weights.mapv_inplace(|v| -v);
        self.intercept = -self.intercept;
        if let Some(w) = self.reduced_weights.as_mut() {
            w.mapv_inplace(|v| -v);
        }
        self.reduced_intercept = -self.reduced_intercept;
        self.flip_corrected = !self.flip_corrected;
    }

    /// Negates the probe if its accuracy on `(x, y)` is below one half.
    /// Returns the accuracy after the check.
    pub fn flip_check(&mut self, x: ArrayView2<f64>, y: &[u8]) -> f64 {
        let acc = self.accuracy(x, y);
        if acc < 0.5 {
            self.negate();
            self.accuracy(x, y)
        } else {
            acc
        }
    }
}

pub fn accuracy(pred: &[u8], y: &[u8]) -> f64 {
    let hits = pred.iter().zip(y).filter(|(a, b)| a == b).count();
    hits as f64 / y.len() as f64
}

/// Fits a probe on `(x, y)`. When `validation` is given and the config asks
/// for it, the probe is negated if its accuracy there is below one half.
pub fn train_probe(
    x: ArrayView2<f64>,
    y: &[u8],
    cfg: &ProbeConfig,
    basis: Basis<'_>,
    validation: Option<(ArrayView2<f64>, &[u8])>,
) -> Result<Probe> {
    check_inputs(x, y)?;
    let (n, d) = x.dim();
    let pca = match basis {
        Basis::Full => None,
        Basis::Fixed(p) => {
            if p.dim() != d {
                return Err(Error::Dimension(format!("PCA basis dim {} vs features {d}", p.dim())));
            }
            Some(p.clone())
        }
        Basis::Auto => match cfg.pca.components(n, d) {
            Some(k) => Some(fit_pca(x, k)?),
            None => None,
        },
    };
    let mut probe = match pca {
        Some(pca) => {
            let z = pca.transform(x);
            let fit = fit_logistic(z.view(), y, cfg.c, cfg.max_iter, cfg.tol)?;
            let weights = pca.basis.t().dot(&fit.weights);
            let intercept = fit.intercept - weights.dot(&pca.mean);
            Probe {
                weights,
                intercept,
                pca: Some(pca),
                reduced_weights: Some(fit.weights),
                reduced_intercept: fit.intercept,
                flip_corrected: false,
                iterations: fit.iterations,
                converged: fit.converged,
                gradient_norm: fit.gradient_norm,
            }
        }
        None => {
            let fit = fit_logistic(x, y, cfg.c, cfg.max_iter, cfg.tol)?;
            Probe {
                weights: fit.weights,
                intercept: fit.intercept,
                pca: None,
                reduced_weights: None,
                reduced_intercept: 0.0,
                flip_corrected: false,
                iterations: fit.iterations,
                converged: fit.converged,
                gradient_norm: fit.gradient_norm,
            }
        }
    };
    if cfg.flip_check {
        if let Some((xv, yv)) = validation {
            if xv.ncols() != d || xv.nrows() != yv.len() {
                return Err(Error::Dimension("validation set shape".into()));
            }
            if !yv.is_empty() {
                probe.flip_check(xv, yv);
            }
        }
    }
    Ok(probe)
}
