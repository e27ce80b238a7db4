// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-layer activations with their labels, and the on-disk dump format.
//!
//! A store holds, for every video and every recorded layer, the mean-pooled
//! feature vector and optionally the full token matrix. Pooled vectors are
//! kept explicitly so that exports from large models can omit token tensors.
//! Values are `f32` on disk and `f64` in memory.

pub(crate) mod dump;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dump::{read_dump, write_dump, DUMP_VERSION};
pub use split::split_indices;

/// Layer id used for raw (pre-encoder) tokens.
pub const RAW_LAYER: i32 = -1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Plausibility {
    Possible,
    Impossible,
}

impl Plausibility {
    /// Binary probe label: possible = 0, impossible = 1.
    pub fn label(self) -> u8 {
        match self {
            Plausibility::Possible => 0,
            Plausibility::Impossible => 1,
        }
    }
}

impl From<Plausibility> for u8 {
    fn from(p: Plausibility) -> u8 {
        p.label()
    }
}

impl TryFrom<u8> for Plausibility {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Plausibility::Possible),
            1 => Ok(Plausibility::Impossible),
            other => Err(format!("plausibility must be 0 or 1, got {other}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Block {
    O1,
    O2,
    O3,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::O1, Block::O2, Block::O3];
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Block::O1 => "O1",
            Block::O2 => "O2",
            Block::O3 => "O3",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    Left,
    Right,
}

impl Motion {
    /// Probe label for the motion task: left = 0, right = 1.
    pub fn label(self) -> u8 {
        match self {
            Motion::Left => 0,
            Motion::Right => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub id: String,
    pub plausibility: Plausibility,
    pub block: Block,
    pub motion: Motion,
    pub split: Split,
}

/// One video's activations at one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerActivations {
    pub layer: i32,
    /// `[N × D]`, absent when the store only carries pooled features.
    pub tokens: Option<Array2<f64>>,
    pub pooled: Array1<f64>,
}

/// Mean over token rows, summed in ascending row order.
pub fn mean_pool(tokens: ArrayView2<f64>) -> Result<Array1<f64>> {
    let (n, d) = tokens.dim();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let mut acc = Array1::<f64>::zeros(d);
    for row in tokens.rows() {
        acc += &row;
    }
    Ok(acc.mapv(|s| s / n as f64))
}

/// All videos' data for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerData {
    /// `[num_videos × D]`, rows in video order.
    pub pooled: Array2<f64>,
    /// `[num_videos × N × D]`.
    pub tokens: Option<Array3<f64>>,
}

impl LayerData {
    pub fn pooled_only(pooled: Array2<f64>) -> Self {
        LayerData { pooled, tokens: None }
    }

    /// Builds pooled features from token tensors, keeping the tokens.
    pub fn from_tokens(tokens: Array3<f64>) -> Result<Self> {
        let (v, _, d) = tokens.dim();
        let mut pooled = Array2::<f64>::zeros((v, d));
        for (i, video) in tokens.outer_iter().enumerate() {
            pooled.row_mut(i).assign(&mean_pool(video)?);
        }
        Ok(LayerData {
            pooled,
            tokens: Some(tokens),
        })
    }
}

/// Immutable collection of labelled per-layer activations.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationStore {
    model_id: String,
    num_layers: usize,
    token_count: usize,
    dim: usize,
    videos: Vec<VideoMeta>,
    layers: BTreeMap<i32, LayerData>,
    config_hash: Option<String>,
    notes: Vec<String>,
}

/// Relative tolerance for pooled-vs-token consistency, scaled by the largest
/// token magnitude of the video at that layer.
pub const POOL_CONSISTENCY_TOL: f64 = 1e-6;

pub struct StoreBuilder {
    model_id: String,
    num_layers: usize,
    token_count: usize,
    dim: usize,
    videos: Vec<VideoMeta>,
    layers: BTreeMap<i32, LayerData>,
    config_hash: Option<String>,
    notes: Vec<String>,
}

impl StoreBuilder {
    pub fn layer(mut self, layer: i32, data: LayerData) -> Self {
        self.layers.insert(layer, data);
        self
    }

    pub fn config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = Some(hash.into());
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn build(self) -> Result<ActivationStore> {
        let store = ActivationStore {
            model_id: self.model_id,
            num_layers: self.num_layers,
            token_count: self.token_count,
            dim: self.dim,
            videos: self.videos,
            layers: self.layers,
            config_hash: self.config_hash,
            notes: self.notes,
        };
        store.validate()?;
        Ok(store)
    }
}

impl ActivationStore {
    pub fn builder(
        model_id: impl Into<String>,
        num_layers: usize,
        token_count: usize,
        dim: usize,
        videos: Vec<VideoMeta>,
    ) -> StoreBuilder {
        StoreBuilder {
            model_id: model_id.into(),
            num_layers,
            token_count,
            dim,
            videos,
            layers: BTreeMap::new(),
            config_hash: None,
            notes: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for v in &self.videos {
            if !seen.insert(v.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate video id {}", v.id)));
            }
        }
        if self.dim == 0 {
            return Err(Error::Invalid("dim must be positive".into()));
        }
        let nv = self.videos.len();
        for (&layer, data) in &self.layers {
            if layer < RAW_LAYER || (layer >= 0 && layer as usize >= self.num_layers) {
                return Err(Error::Invalid(format!(
                    "layer {layer} outside [-1, {})",
                    self.num_layers
                )));
            }
            if data.pooled.dim() != (nv, self.dim) {
                return Err(Error::Dimension(format!(
                    "layer {layer}: pooled shape {:?}, expected ({nv}, {})",
                    data.pooled.dim(),
                    self.dim
                )));
            }
            check_finite_pooled(layer, &data.pooled, &self.videos)?;
            if let Some(tokens) = &data.tokens {
                if tokens.dim() != (nv, self.token_count, self.dim) {
                    return Err(Error::Dimension(format!(
                        "layer {layer}: token shape {:?}, expected ({nv}, {}, {})",
                        tokens.dim(),
                        self.token_count,
                        self.dim
                    )));
                }
                check_finite_tokens(layer, tokens, &self.videos)?;
                check_pool_consistency(layer, &data.pooled, tokens, &self.videos)?;
            }
        }
        Ok(())
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn videos(&self) -> &[VideoMeta] {
        &self.videos
    }

    pub fn config_hash(&self) -> Option<&str> {
        self.config_hash.as_deref()
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// Layer ids present in the store, ascending.
    pub fn layer_ids(&self) -> Vec<i32> {
        self.layers.keys().copied().collect()
    }

    pub fn layer(&self, layer: i32) -> Result<&LayerData> {
        self.layers
            .get(&layer)
            .ok_or_else(|| Error::Invalid(format!("layer {layer} not present in store")))
    }

    pub fn pooled(&self, layer: i32) -> Result<ArrayView2<'_, f64>> {
        Ok(self.layer(layer)?.pooled.view())
    }

    pub fn tokens(&self, layer: i32) -> Result<Option<ArrayView3<'_, f64>>> {
        Ok(self.layer(layer)?.tokens.as_ref().map(|t| t.view()))
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.videos.iter().position(|v| v.id == id)
    }

    /// The `(video, layer)` view of the store.
    pub fn activation(&self, video: usize, layer: i32) -> Result<LayerActivations> {
        let data = self.layer(layer)?;
        if video >= self.videos.len() {
            return Err(Error::Invalid(format!("video index {video} out of range")));
        }
        Ok(LayerActivations {
            layer,
            tokens: data.tokens.as_ref().map(|t| t.index_axis(Axis(0), video).to_owned()),
            pooled: data.pooled.row(video).to_owned(),
        })
    }

    /// Indices of videos matching a predicate, in store order.
    pub fn select(&self, pred: impl Fn(&VideoMeta) -> bool) -> Vec<usize> {
        self.videos
            .iter()
            .enumerate()
            .filter(|(_, v)| pred(v))
            .map(|(i, _)| i)
            .collect()
    }

    /// Pooled rows for the given video indices, `[k × D]`.
    pub fn pooled_rows(&self, layer: i32, rows: &[usize]) -> Result<Array2<f64>> {
        Ok(self.pooled(layer)?.select(Axis(0), rows))
    }

    /// Pooled row of one video.
    pub fn pooled_row(&self, layer: i32, video: usize) -> Result<ArrayView1<'_, f64>> {
        Ok(self.layer(layer)?.pooled.row(video))
    }
}

fn check_finite_pooled(layer: i32, pooled: &Array2<f64>, videos: &[VideoMeta]) -> Result<()> {
    for (i, row) in pooled.outer_iter().enumerate() {
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("pooled layer {layer}, video {}, component {j}", videos[i].id),
            });
        }
    }
    Ok(())
}

fn check_finite_tokens(layer: i32, tokens: &Array3<f64>, videos: &[VideoMeta]) -> Result<()> {
    for (i, video) in tokens.outer_iter().enumerate() {
        for (t, row) in video.outer_iter().enumerate() {
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("tokens layer {layer}, video {}, token {t}, component {j}", videos[i].id),
                });
            }
        }
    }
    Ok(())
}

fn check_pool_consistency(layer: i32, pooled: &Array2<f64>, tokens: &Array3<f64>, videos: &[VideoMeta]) -> Result<()> {
    for (i, video) in tokens.outer_iter().enumerate() {
        let mean = mean_pool(video)?;
        let scale = video.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let worst = mean
            .iter()
            .zip(pooled.row(i).iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if worst > POOL_CONSISTENCY_TOL * scale {
            return Err(Error::Invalid(format!(
                "layer {layer}, video {}: stored pooled vector differs from token mean by {worst:e}",
                videos[i].id
            )));
        }
    }
    Ok(())
}
