// SPDX-License-Identifier: MIT OR Apache-2.0

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::actstore::VideoMeta;
use crate::error::{Error, Result};
use crate::probekit::{fit_pca, PcaModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub id: String,
    pub plausibility: u8,
    pub block: String,
    pub x: f64,
    pub y: f64,
    pub steered_x: f64,
    pub steered_y: f64,
}

/// 2-component PCA of `base`, with `steered` mapped through the same basis.
pub fn project2d(
    videos: &[&VideoMeta],
    base: ArrayView2<f64>,
    steered: ArrayView2<f64>,
) -> Result<(PcaModel, Vec<ProjectionRow>)> {
    if base.dim() != steered.dim() || base.nrows() != videos.len() {
        return Err(Error::Dimension(format!(
            "{} videos, base {:?}, steered {:?}",
            videos.len(),
            base.dim(),
            steered.dim()
        )));
    }
    let pca = fit_pca(base, 2)?;
    let zb = pca.transform(base);
    let zs = pca.transform(steered);
    let rows = videos
        .iter()
        .enumerate()
        .map(|(i, v)| ProjectionRow {
            id: v.id.clone(),
            plausibility: v.plausibility.label(),
            block: v.block.to_string(),
            x: zb[[i, 0]],
            y: zb[[i, 1]],
            steered_x: zs[[i, 0]],
            steered_y: zs[[i, 1]],
        })
        .collect();
    Ok((pca, rows))
}
