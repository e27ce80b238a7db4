// SPDX-License-Identifier: MIT OR Apache-2.0

//! Brute-force reference computations, independent of the crate's numerics.
#![allow(clippy::needless_range_loop)]

use ndarray::{Array1, Array2, ArrayView2};
use physteer::probekit::LogisticObjective;

/// Sample covariance formed explicitly with loops.
pub fn covariance(x: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += x[[i, j]];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut c = Array2::zeros((d, d));
    for a in 0..d {
        for b in 0..d {
            let mut s = 0.0;
            for i in 0..n {
                s += (x[[i, a]] - mean[a]) * (x[[i, b]] - mean[b]);
            }
            c[[a, b]] = s / (n as f64 - 1.0);
        }
    }
    c
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues descending and eigenvectors as the matching rows.
pub fn jacobi_eigen(sym: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let d = sym.nrows();
    let mut a = sym.clone();
    let mut v = Array2::<f64>::eye(d);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in p + 1..d {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((d, d), |(r, k)| v[[k, order[r]]]);
    (values, vectors)
}

/// Probe objective evaluated directly from its definition.
pub fn logistic_objective(x: ArrayView2<f64>, y: &[u8], c: f64, params: &[f64]) -> f64 {
    let d = x.ncols();
    let mut total = 0.0;
    for j in 0..d {
        total += 0.5 * params[j] * params[j];
    }
    for i in 0..x.nrows() {
        let mut z = params[d];
        for j in 0..d {
            z += params[j] * x[[i, j]];
        }
        let s = if y[i] == 1 { 1.0 } else { -1.0 };
        total += c * (1.0 + (-s * z).exp()).ln();
    }
    total
}

/// Central finite-difference gradient of the crate's objective.
pub fn fd_gradient(obj: &LogisticObjective<'_>, params: &Array1<f64>, h: f64) -> Array1<f64> {
    let mut g = Array1::zeros(params.len());
    for k in 0..params.len() {
        let mut up = params.clone();
        let mut dn = params.clone();
        up[k] += h;
        dn[k] -= h;
        g[k] = (obj.value(up.view()) - obj.value(dn.view())) / (2.0 * h);
    }
    g
}

/// Largest elementwise relative error, with magnitudes below one treated as one.
pub fn max_relative_error(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Features with a label planted in the first `k` coordinates:
/// `y = [s₁ + … + s_k > 0]` with independent standard normal `s`.
pub fn planted(n: usize, d: usize, k: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
    let x = super::gaussian_matrix(n, d, seed);
    let y = (0..n)
        .map(|i| u8::from((0..k).map(|j| x[[i, j]]).sum::<f64>() > 0.0))
        .collect();
    (x, y)
}
