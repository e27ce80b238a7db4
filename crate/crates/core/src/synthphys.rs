// SPDX-License-Identifier: MIT OR Apache-2.0

//! Paired possible/impossible toy physics videos.
//!
//! Every scene is a `G × G` patch grid watched for `T` frames. It contains one
//! moving object (one patch), one occluder and one solid obstacle. The object
//! moves laterally; its direction is the motion label. Each matched pair
//! shares the scene and noise draw and differs only after the violation
//! onset:
//!
//! * O1 (permanence): the object vanishes while behind the occluder and
//!   reappears two rows higher.
//! * O2 (continuity): the object jumps two rows in a single frame.
//! * O3 (solidity): the object passes through the obstacle instead of
//!   stopping against it.
//!
//! Per-patch features are `(occupancy, vx, vy, occluder)`. Occupancy is
//! amodal: the object counts while hidden, and obstacle cells are occupied.
//! Tubelet tokens average two consecutive frames, are mapped to `D` dimensions
//! by a fixed seeded matrix, and receive a sinusoidal position code and
//! Gaussian noise.

use ndarray::{Array1, Array2, Array3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actstore::{
    split_indices, ActivationStore, Block, LayerData, Motion, Plausibility, Split, VideoMeta, RAW_LAYER,
};
use crate::error::{Error, Result};
use crate::util::rng_for;

pub const TEMPORAL_STRIDE: usize = 2;
pub const NUM_FEATURES: usize = 4;
pub const FEAT_OCC: usize = 0;
pub const FEAT_VX: usize = 1;
pub const FEAT_VY: usize = 2;
pub const FEAT_OCCLUDER: usize = 3;

/// Vertical offset (rows) used by the O1 reappearance and the O2 jump.
pub const DISPLACEMENT: f64 = 2.0;

pub const SPLIT_FRACTIONS: [f64; 3] = [0.6, 0.2, 0.2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub frames: usize,
    pub grid: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    /// Standard deviation of the embedding matrix entries.
    pub embed_scale: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            frames: 16,
            grid: 8,
            dim: 64,
            noise_sigma: 0.05,
            embed_scale: 32.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn token_frames(&self) -> usize {
        self.frames / TEMPORAL_STRIDE
    }

    pub fn token_count(&self) -> usize {
        self.token_frames() * self.grid * self.grid
    }

    /// Largest per-frame displacement of a physically possible object.
    pub fn v_max(&self) -> f64 {
        0.5 * 15.0 / (self.frames as f64 - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.frames.is_multiple_of(TEMPORAL_STRIDE) {
            return Err(Error::Config(format!("frames must be even, got {}", self.frames)));
        }
        if self.frames < 14 {
            return Err(Error::Geometry(format!(
                "{} frames leave no room for a violation of at least 3 v_max",
                self.frames
            )));
        }
        if self.grid < 8 {
            return Err(Error::Geometry(format!(
                "grid {}x{} too small to place occluder, obstacle and trajectory (need 8)",
                self.grid, self.grid
            )));
        }
        if self.dim < NUM_FEATURES {
            return Err(Error::Config(format!("dim must be at least {NUM_FEATURES}")));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be finite and non-negative".into()));
        }
        if !(self.embed_scale > 0.0 && self.embed_scale.is_finite()) {
            return Err(Error::Config("embed_scale must be finite and positive".into()));
        }
        Ok(())
    }
}

/// Axis-aligned block of grid cells `[col0, col0+cols) × [row0, row0+rows)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub col0: usize,
    pub row0: usize,
    pub cols: usize,
    pub rows: usize,
}

impl Rect {
    pub fn contains_cell(&self, col: usize, row: usize) -> bool {
        col >= self.col0 && col < self.col0 + self.cols && row >= self.row0 && row < self.row0 + self.rows
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= 0.0 && p[1] >= 0.0 && self.contains_cell(p[0] as usize, p[1] as usize)
    }

    fn mirrored(&self, grid: usize) -> Rect {
        Rect {
            col0: grid - self.col0 - self.cols,
            ..*self
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.row0..self.row0 + self.rows).flat_map(move |r| (self.col0..self.col0 + self.cols).map(move |c| (c, r)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: Block,
    pub onset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Object centre per frame, in grid units (x = column, y = row).
    pub positions: Vec<[f64; 2]>,
    /// Whether the object exists at each frame.
    pub present: Vec<bool>,
    /// Signed lateral speed of the unperturbed motion.
    pub speed: f64,
    pub occluder: Rect,
    pub obstacle: Rect,
    pub violation: Option<Violation>,
}

impl Trajectory {
    pub fn frames(&self) -> usize {
        self.positions.len()
    }

    pub fn motion(&self) -> Motion {
        if self.speed < 0.0 {
            Motion::Left
        } else {
            Motion::Right
        }
    }

    pub fn velocity(&self, t: usize) -> [f64; 2] {
        if t == 0 {
            [self.speed, 0.0]
        } else {
            let (a, b) = (self.positions[t - 1], self.positions[t]);
            [b[0] - a[0], b[1] - a[1]]
        }
    }

    fn free_position(&self, t: usize) -> [f64; 2] {
        let p0 = self.positions[0];
        [p0[0] + self.speed * t as f64, p0[1]]
    }
}

fn in_grid(p: [f64; 2], grid: usize) -> bool {
    let g = grid as f64;
    p[0] >= 0.0 && p[0] < g && p[1] >= 0.0 && p[1] < g
}

/// Turns a possible trajectory into its impossible counterpart.
pub fn violate(traj: &Trajectory, kind: Block, onset: usize, spec: &SceneSpec) -> Result<Trajectory> {
    let t_len = traj.frames();
    if traj.violation.is_some() {
        return Err(Error::Geometry("trajectory already carries a violation".into()));
    }
    if onset == 0 || onset + 1 >= t_len {
        return Err(Error::Geometry(format!("onset {onset} must lie in [1, {})", t_len - 1)));
    }
    let mut out = traj.clone();
    out.violation = Some(Violation { kind, onset });
    match kind {
        Block::O1 => {
            if !traj.occluder.contains(traj.positions[onset]) {
                return Err(Error::Geometry(format!(
                    "O1 onset {onset} is not inside the occlusion window"
                )));
            }
            let mut end = onset;
            while end + 1 < t_len && traj.occluder.contains(traj.positions[end + 1]) {
                end += 1;
            }
            if end + 1 >= t_len {
                return Err(Error::Geometry(
                    "object never leaves the occluder; no frame left to reappear".into(),
                ));
            }
            for t in onset..=end {
                out.present[t] = false;
            }
            for t in end + 1..t_len {
                out.positions[t][1] += DISPLACEMENT;
                let p = out.positions[t];
                if !in_grid(p, spec.grid) || traj.obstacle.contains(p) || traj.occluder.contains(p) {
                    return Err(Error::Geometry(format!(
                        "O1 reappearance at frame {t} leaves the free area"
                    )));
                }
            }
        }
        Block::O2 => {
            if DISPLACEMENT < 3.0 * spec.v_max() {
                return Err(Error::Geometry("jump shorter than 3 v_max".into()));
            }
            for t in onset..t_len {
                out.positions[t][1] += DISPLACEMENT;
            }
            for (t, &p) in out.positions.iter().enumerate() {
                if !in_grid(p, spec.grid) || traj.occluder.contains(p) || traj.obstacle.contains(p) {
                    return Err(Error::Geometry(format!(
                        "O2 path touches scenery or leaves the grid at frame {t}"
                    )));
                }
            }
        }
        Block::O3 => {
            let at = traj.free_position(onset);
            let before = traj.free_position(onset - 1);
            if !traj.obstacle.contains(at) || traj.obstacle.contains(before) {
                return Err(Error::Geometry(format!(
                    "O3 onset {onset} is not the first contact with the obstacle"
                )));
            }
            let mut inside = 0;
            for t in onset..t_len {
                let p = traj.free_position(t);
                if !in_grid(p, spec.grid) {
                    return Err(Error::Geometry(format!("O3 path leaves the grid at frame {t}")));
                }
                if traj.obstacle.contains(p) {
                    inside += 1;
                }
                out.positions[t] = p;
            }
            if inside < 2 {
                return Err(Error::Geometry(format!(
                    "O3 path spends {inside} frame(s) inside the obstacle, need 2"
                )));
            }
        }
    }
    Ok(out)
}

/// Per-frame feature grid `[T × G × G × 4]` flattened to `[T, G*G, 4]`.
pub fn render_frames(traj: &Trajectory, spec: &SceneSpec) -> Array3<f64> {
    let g = spec.grid;
    let mut f = Array3::<f64>::zeros((traj.frames(), g * g, NUM_FEATURES));
    for t in 0..traj.frames() {
        for (c, r) in traj.occluder.cells() {
            f[[t, r * g + c, FEAT_OCCLUDER]] = 1.0;
        }
        for (c, r) in traj.obstacle.cells() {
            f[[t, r * g + c, FEAT_OCC]] = 1.0;
        }
        if traj.present[t] {
            let p = traj.positions[t];
            let cell = p[1] as usize * g + p[0] as usize;
            let v = traj.velocity(t);
            f[[t, cell, FEAT_OCC]] = 1.0;
            f[[t, cell, FEAT_VX]] = v[0];
            f[[t, cell, FEAT_VY]] = v[1];
        }
    }
    f
}

/// Tubelet features `[N × 4]`: each token averages one patch over two frames.
pub fn tubelet_features(frames: &Array3<f64>, spec: &SceneSpec) -> Array2<f64> {
    let cells = spec.grid * spec.grid;
    let mut out = Array2::<f64>::zeros((spec.token_count(), NUM_FEATURES));
    for j in 0..spec.token_frames() {
        for cell in 0..cells {
            for k in 0..NUM_FEATURES {
                let a = frames[[TEMPORAL_STRIDE * j, cell, k]];
                let b = frames[[TEMPORAL_STRIDE * j + 1, cell, k]];
                out[[j * cells + cell, k]] = 0.5 * (a + b);
            }
        }
    }
    out
}

/// Fixed seeded feature embedding `[D × 4]` with entries `N(0, embed_scale²)`.
pub fn embedding_matrix(spec: &SceneSpec) -> Array2<f64> {
    let mut rng = rng_for(spec.seed, "embed");
    Array2::from_shape_simple_fn((spec.dim, NUM_FEATURES), || {
        let z: f64 = StandardNormal.sample(&mut rng);
        spec.embed_scale * z
    })
}

/// Sinusoidal code over token index, `[N × D]`.
pub fn position_code(spec: &SceneSpec) -> Array2<f64> {
    let d = spec.dim;
    Array2::from_shape_fn((spec.token_count(), d), |(i, k)| {
        let freq = 1.0 / 10000f64.powf((2 * (k / 2)) as f64 / d as f64);
        let a = i as f64 * freq;
        if k % 2 == 0 {
            a.sin()
        } else {
            a.cos()
        }
    })
}

#[derive(Clone, Debug)]
pub struct SyntheticVideo {
    pub meta: VideoMeta,
    pub pair_id: String,
    pub trajectory: Trajectory,
    /// Pre-embedding tubelet features `[N × 4]`.
    pub features: Array2<f64>,
    /// Embedded tokens `[N × D]`.
    pub tokens: Array2<f64>,
}

impl SyntheticVideo {
    /// Mean of the raw tubelet features over tokens.
    pub fn raw_pooled(&self) -> Array1<f64> {
        crate::actstore::mean_pool(self.features.view()).expect("token count is positive")
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub spec: SceneSpec,
    pub videos: Vec<SyntheticVideo>,
}

struct Layout {
    row: usize,
    occluder: Rect,
    obstacle: Rect,
}

fn layout(block: Block, row: usize) -> Layout {
    match block {
        Block::O1 => Layout {
            row,
            occluder: Rect {
                col0: 2,
                row0: row - 1,
                cols: 2,
                rows: 3,
            },
            obstacle: Rect {
                col0: 6,
                row0: 6,
                cols: 1,
                rows: 2,
            },
        },
        Block::O2 => Layout {
            row,
            occluder: Rect {
                col0: 0,
                row0: 5,
                cols: 2,
                rows: 3,
            },
            obstacle: Rect {
                col0: 6,
                row0: 6,
                cols: 1,
                rows: 2,
            },
        },
        Block::O3 => Layout {
            row,
            occluder: Rect {
                col0: 0,
                row0: 5,
                cols: 2,
                rows: 3,
            },
            obstacle: Rect {
                col0: 4,
                row0: row,
                cols: 1,
                rows: 2,
            },
        },
    }
}

/// Builds the possible trajectory of a pair and the onset of its violation.
fn base_trajectory(block: Block, motion: Motion, spec: &SceneSpec, rng: &mut impl Rng) -> (Trajectory, usize) {
    let t_len = spec.frames;
    let scale = 15.0 / (t_len as f64 - 1.0);
    let speed = rng.random_range(0.3..0.4) * scale;
    let x0 = rng.random_range(0.5..1.0);
    let row = match block {
        Block::O2 => rng.random_range(1..=2),
        _ => rng.random_range(1..=3),
    };
    let lay = layout(block, row);
    let y = lay.row as f64 + 0.5;
    let mut positions: Vec<[f64; 2]> = (0..t_len).map(|t| [x0 + speed * t as f64, y]).collect();

    let onset = match block {
        Block::O1 => positions
            .iter()
            .position(|&p| lay.occluder.contains(p))
            .expect("layout guarantees the path crosses the occluder"),
        Block::O2 => rng.random_range(t_len * 5 / 16..=t_len * 10 / 16),
        Block::O3 => {
            let first = positions
                .iter()
                .position(|&p| lay.obstacle.contains(p))
                .expect("layout guarantees contact with the obstacle");
            let rest = positions[first - 1];
            for p in positions.iter_mut().skip(first) {
                *p = rest;
            }
            first
        }
    };

    let (mut occluder, mut obstacle, mut sign) = (lay.occluder, lay.obstacle, 1.0);
    if motion == Motion::Left {
        let g = spec.grid as f64;
        for p in positions.iter_mut() {
            p[0] = g - p[0];
        }
        occluder = occluder.mirrored(spec.grid);
        obstacle = obstacle.mirrored(spec.grid);
        sign = -1.0;
    }
    let traj = Trajectory {
        present: vec![true; t_len],
        positions,
        speed: sign * speed,
        occluder,
        obstacle,
        violation: None,
    };
    (traj, onset)
}

fn embed(features: &Array2<f64>, emb: &Array2<f64>, pos: &Array2<f64>, noise: &Array2<f64>) -> Array2<f64> {
    features.dot(&emb.t()) + pos + noise
}

/// Generates `2 × 3 × n_pairs_per_block` videos with a stratified split.
pub fn generate_dataset(spec: &SceneSpec, n_pairs_per_block: usize) -> Result<SyntheticDataset> {
    spec.validate()?;
    if n_pairs_per_block == 0 {
        return Err(Error::Config("n_pairs_per_block must be at least 1".into()));
    }
    let emb = embedding_matrix(spec);
    let pos = position_code(spec);

    // Motion labels come from their own stream: balanced per block, one
    // label per pair, never consulting plausibility.
    let mut jobs = Vec::new();
    for block in Block::ALL {
        let mut rng = rng_for(spec.seed, &format!("motion/{block}"));
        let mut motions: Vec<Motion> = (0..n_pairs_per_block)
            .map(|i| {
                if i < n_pairs_per_block / 2 {
                    Motion::Left
                } else {
                    Motion::Right
                }
            })
            .collect();
        if n_pairs_per_block % 2 == 1 && rng.random_bool(0.5) {
            motions[n_pairs_per_block - 1] = Motion::Left;
        }
        motions.shuffle(&mut rng);
        for (i, m) in motions.into_iter().enumerate() {
            jobs.push((block, i, m));
        }
    }

    let pairs: Vec<Result<[SyntheticVideo; 2]>> = jobs
        .par_iter()
        .map(|&(block, i, motion)| {
            let pair_id = format!("{block}-{i:03}");
            let mut rng = rng_for(spec.seed, &format!("scene/{pair_id}"));
            let (possible, onset) = base_trajectory(block, motion, spec, &mut rng);
            let impossible = violate(&possible, block, onset, spec)?;
            let mut nrng = rng_for(spec.seed, &format!("noise/{pair_id}"));
            let noise = Array2::from_shape_simple_fn((spec.token_count(), spec.dim), || {
                let z: f64 = StandardNormal.sample(&mut nrng);
                spec.noise_sigma * z
            });
            let make = |traj: Trajectory, plaus: Plausibility, tag: &str| {
                let features = tubelet_features(&render_frames(&traj, spec), spec);
                let tokens = embed(&features, &emb, &pos, &noise);
                SyntheticVideo {
                    meta: VideoMeta {
                        id: format!("{pair_id}-{tag}"),
                        plausibility: plaus,
                        block,
                        motion,
                        split: Split::Train,
                    },
                    pair_id: pair_id.clone(),
                    trajectory: traj,
                    features,
                    tokens,
                }
            };
            Ok([
                make(possible, Plausibility::Possible, "possible"),
                make(impossible, Plausibility::Impossible, "impossible"),
            ])
        })
        .collect();

    let mut videos = Vec::with_capacity(pairs.len() * 2);
    for pair in pairs {
        videos.extend(pair?);
    }
    let metas: Vec<VideoMeta> = videos.iter().map(|v| v.meta.clone()).collect();
    let splits = split_indices(&metas, SPLIT_FRACTIONS, crate::util::derive_seed(spec.seed, "split"))?;
    for (v, s) in videos.iter_mut().zip(splits) {
        v.meta.split = s;
    }
    Ok(SyntheticDataset {
        spec: spec.clone(),
        videos,
    })
}

impl SyntheticDataset {
    pub fn metas(&self) -> Vec<VideoMeta> {
        self.videos.iter().map(|v| v.meta.clone()).collect()
    }

    /// Raw tokens as a dump-compatible store holding the single layer `-1`.
    pub fn to_store(&self, model_id: &str, config_hash: Option<&str>) -> Result<ActivationStore> {
        let (n, d) = (self.spec.token_count(), self.spec.dim);
        let mut tokens = Array3::<f64>::zeros((self.videos.len(), n, d));
        for (i, v) in self.videos.iter().enumerate() {
            tokens.index_axis_mut(ndarray::Axis(0), i).assign(&v.tokens);
        }
        let mut b =
            ActivationStore::builder(model_id, 0, n, d, self.metas()).layer(RAW_LAYER, LayerData::from_tokens(tokens)?);
        if let Some(h) = config_hash {
            b = b.config_hash(h);
        }
        b.build()
    }
}
