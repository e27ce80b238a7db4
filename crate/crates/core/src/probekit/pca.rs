// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Mean-centred principal subspace.
///
/// Basis rows are orthonormal and ordered by descending explained variance.
/// Each row's sign is fixed so its largest-magnitude entry is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `[k × D]`
    pub basis: Array2<f64>,
    pub explained_variance: Array1<f64>,
    pub total_variance: f64,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn explained_variance_ratio(&self) -> Array1<f64> {
        if self.total_variance > 0.0 {
            &self.explained_variance / self.total_variance
        } else {
            Array1::zeros(self.k())
        }
    }

    /// `(x − mean) · Vᵀ`, `[n × k]`.
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean).dot(&self.basis.t())
    }

    pub fn transform_row(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.basis.dot(&(&x - &self.mean))
    }

    /// `z · V + mean`, `[n × D]`.
    pub fn inverse_transform(&self, z: ArrayView2<f64>) -> Array2<f64> {
        z.dot(&self.basis) + &self.mean
    }
}

/// Fits a `k`-component PCA by SVD of the centred data.
pub fn fit_pca(x: ArrayView2<f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::Invalid(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::Invalid(format!(
            "PCA k = {k} out of range [1, {}]",
            (n - 1).min(d)
        )));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centred = &x - &mean;
    let total_variance = centred.mapv(|v| v * v).sum() / (n as f64 - 1.0);

    let m = DMatrix::from_fn(n, d, |i, j| centred[[i, j]]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(std::cmp::Ordering::Equal));

    let mut basis = Array2::<f64>::zeros((k, d));
    let mut explained = Array1::<f64>::zeros(k);
    for (r, &idx) in order.iter().take(k).enumerate() {
        let mut row: Vec<f64> = (0..d).map(|j| v_t[(idx, j)]).collect();
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        basis.row_mut(r).assign(&Array1::from(row));
        explained[r] = sv[idx] * sv[idx] / (n as f64 - 1.0);
    }
    Ok(PcaModel {
        mean,
        basis,
        explained_variance: explained,
        total_variance,
    })
}
