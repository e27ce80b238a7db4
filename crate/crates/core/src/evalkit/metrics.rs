// SPDX-License-Identifier: MIT OR Apache-2.0

use ndarray::ArrayView1;

use crate::error::{Error, Result};

/// Number of positions where the predictions differ.
pub fn flip_count(base: &[u8], steered: &[u8]) -> Result<usize> {
    if base.len() != steered.len() {
        return Err(Error::Dimension(format!(
            "{} baseline vs {} steered predictions",
            base.len(),
            steered.len()
        )));
    }
    Ok(base.iter().zip(steered).filter(|(a, b)| a != b).count())
}

/// Fraction of predictions that changed.
pub fn flip_rate(base: &[u8], steered: &[u8]) -> Result<f64> {
    let flips = flip_count(base, steered)?;
    if base.is_empty() {
        return Ok(0.0);
    }
    Ok(flips as f64 / base.len() as f64)
}

/// Cosine of `Δf` with a direction. `defined` is false when `Δf = 0`, in
/// which case `value` is 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Purity {
    pub value: f64,
    pub defined: bool,
}

fn check_dims(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn directional_purity(before: ArrayView1<f64>, after: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<Purity> {
    check_dims(before, after)?;
    check_dims(before, v)?;
    let delta = &after - &before;
    let dn = delta.dot(&delta).sqrt();
    let vn = v.dot(&v).sqrt();
    if dn == 0.0 || vn == 0.0 {
        return Ok(Purity {
            value: 0.0,
            defined: false,
        });
    }
    let value = (delta.dot(&v) / (dn * vn)).clamp(-1.0, 1.0);
    Ok(Purity { value, defined: true })
}

/// `‖after − before‖₂`.
pub fn representation_drift(before: ArrayView1<f64>, after: ArrayView1<f64>) -> Result<f64> {
    check_dims(before, after)?;
    Ok(before
        .iter()
        .zip(after.iter())
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt())
}

/// `arccos(|u·v|)` in degrees for unit vectors, in `[0, 90]`.
pub fn subspace_angle(u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<f64> {
    check_dims(u, v)?;
    let c = u.dot(&v).abs().min(1.0);
    Ok(c.acos().to_degrees())
}
