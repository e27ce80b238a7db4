// SPDX-License-Identifier: MIT OR Apache-2.0

//! L2-regularised logistic regression with an unpenalised intercept.
//!
//! Objective over parameters `(w, b)` with labels mapped to `ỹ ∈ {−1, +1}`:
//!
//! ```text
//! ½‖w‖² + C · Σᵢ log(1 + exp(−ỹᵢ (w·xᵢ + b)))
//! ```
//!
//! Minimised by damped Newton steps with Armijo backtracking until the
//! gradient norm drops below the tolerance.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn probability(logit: f64) -> f64 {
    sigmoid(logit)
}

/// The probe objective. Parameter vectors hold `w` followed by `b`.
pub struct LogisticObjective<'a> {
    x: ArrayView2<'a, f64>,
    signs: Vec<f64>,
    c: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: &[u8], c: f64) -> Self {
        let signs = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
        LogisticObjective { x, signs, c }
    }

    pub fn dim(&self) -> usize {
        self.x.ncols() + 1
    }

    fn margins(&self, params: ArrayView1<f64>) -> Array1<f64> {
        let d = self.x.ncols();
        let w = params.slice(ndarray::s![..d]);
        let b = params[d];
        let mut m = self.x.dot(&w);
        for (mi, s) in m.iter_mut().zip(&self.signs) {
            *mi = s * (*mi + b);
        }
        m
    }

    pub fn value(&self, params: ArrayView1<f64>) -> f64 {
        let d = self.x.ncols();
        let reg = 0.5 * params.slice(ndarray::s![..d]).iter().map(|v| v * v).sum::<f64>();
        let loss: f64 = self.margins(params).iter().map(|&m| softplus(-m)).sum();
        reg + self.c * loss
    }

    pub fn gradient(&self, params: ArrayView1<f64>) -> Array1<f64> {
        let d = self.x.ncols();
        let m = self.margins(params);
        // dL/dz_i for z_i = w·x_i + b
        let coef: Array1<f64> = m
            .iter()
            .zip(&self.signs)
            .map(|(&mi, &s)| -self.c * s * sigmoid(-mi))
            .collect();
        let mut g = Array1::<f64>::zeros(d + 1);
        g.slice_mut(ndarray::s![..d])
            .assign(&(self.x.t().dot(&coef) + params.slice(ndarray::s![..d])));
        g[d] = coef.sum();
        g
    }

    fn hessian(&self, params: ArrayView1<f64>) -> DMatrix<f64> {
        let (n, d) = self.x.dim();
        let m = self.margins(params);
        // rows scaled by sqrt(C p (1 − p)), with a trailing column for b
        let mut xs = Array2::<f64>::zeros((n, d + 1));
        for r in 0..n {
            let p = sigmoid(m[r]);
            let s = (self.c * p * (1.0 - p)).sqrt();
            let mut row = xs.row_mut(r);
            for j in 0..d {
                row[j] = s * self.x[[r, j]];
            }
            row[d] = s;
        }
        let mut h = xs.t().dot(&xs);
        for i in 0..d {
            h[[i, i]] += 1.0;
        }
        DMatrix::from_fn(d + 1, d + 1, |i, j| h[[i, j]])
    }
}

#[derive(Clone, Debug)]
pub struct LogisticFit {
    pub weights: Array1<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

pub fn fit_logistic(x: ArrayView2<f64>, y: &[u8], c: f64, max_iter: usize, tol: f64) -> Result<LogisticFit> {
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} rows", y.len())));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("C must be positive, got {c}")));
    }
    let obj = LogisticObjective::new(x, y, c);
    let mut params = Array1::<f64>::zeros(d + 1);
    let mut value = obj.value(params.view());
    let mut grad = obj.gradient(params.view());
    let mut gnorm = grad.dot(&grad).sqrt();
    let mut iterations = 0;
    while gnorm > tol && iterations < max_iter {
        iterations += 1;
        let h = obj.hessian(params.view());
        let g = DVector::from_iterator(d + 1, grad.iter().copied());
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            // gradient step as a fallback; the Hessian is positive definite
            // in exact arithmetic
            None => g.clone(),
        };
        let dir = Array1::from_iter(step.iter().map(|v| -v));
        let slope = grad.dot(&dir);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &params + &(&dir * t);
            let v = obj.value(trial.view());
            if v <= value + 1e-4 * t * slope {
                params = trial;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        grad = obj.gradient(params.view());
        gnorm = grad.dot(&grad).sqrt();
        if !accepted {
            break;
        }
    }
    Ok(LogisticFit {
        weights: params.slice(ndarray::s![..d]).to_owned(),
        intercept: params[d],
        iterations,
        gradient_norm: gnorm,
        converged: gnorm <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn converges_to_tolerance() {
        let x = array![[0.0, 1.0], [1.0, 0.5], [2.0, -0.2], [3.0, 0.1], [0.5, 0.4], [2.5, -1.0]];
        let y = [0, 0, 1, 1, 1, 0];
        let fit = fit_logistic(x.view(), &y, 1.0, 1000, 1e-6).unwrap();
        assert!(fit.converged, "grad norm {}", fit.gradient_norm);
    }

    #[test]
    fn rejects_bad_c() {
        let x = array![[0.0], [1.0]];
        assert!(fit_logistic(x.view(), &[0, 1], 0.0, 10, 1e-6).is_err());
    }
}
