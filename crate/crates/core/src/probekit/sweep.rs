// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, CvSummary};
use super::probe::{train_probe, Basis, Probe, ProbeConfig};
use crate::actstore::{ActivationStore, Block, Split, VideoMeta};
use crate::error::{Error, Result};
use crate::util::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTask {
    Plausibility,
    Motion,
    /// Plausibility restricted to one block's videos.
    Block(Block),
}

impl ProbeTask {
    pub fn label(&self, v: &VideoMeta) -> u8 {
        match self {
            ProbeTask::Motion => v.motion.label(),
            _ => v.plausibility.label(),
        }
    }

    pub fn includes(&self, v: &VideoMeta) -> bool {
        match self {
            ProbeTask::Block(b) => v.block == *b,
            _ => true,
        }
    }
}

impl fmt::Display for ProbeTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeTask::Plausibility => f.write_str("plausibility"),
            ProbeTask::Motion => f.write_str("motion"),
            ProbeTask::Block(b) => write!(f, "plausibility-{b}"),
        }
    }
}

impl std::str::FromStr for ProbeTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plausibility" => Ok(ProbeTask::Plausibility),
            "motion" => Ok(ProbeTask::Motion),
            "plausibility-O1" => Ok(ProbeTask::Block(Block::O1)),
            "plausibility-O2" => Ok(ProbeTask::Block(Block::O2)),
            "plausibility-O3" => Ok(ProbeTask::Block(Block::O3)),
            other => Err(Error::Config(format!(
                "unknown task {other:?} (plausibility, motion, plausibility-O1/O2/O3)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub probe: ProbeConfig,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            probe: ProbeConfig::default(),
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LayerProbeResult {
    pub layer: i32,
    /// Mean cross-validated accuracy on the train+val pool.
    pub accuracy: f64,
    pub cv: CvSummary,
    /// Final probe refit on the whole train+val pool.
    pub probe: Probe,
    pub pool_size: usize,
}

/// Probes one layer: cross-validation on the train+val pool, then a final
/// fit on the full pool whose flip check uses the val split.
pub fn probe_layer(
    store: &ActivationStore,
    layer: i32,
    task: ProbeTask,
    cfg: &SweepConfig,
    basis: Basis<'_>,
) -> Result<LayerProbeResult> {
    let videos = store.videos();
    let subset = store.select(|v| task.includes(v));
    if !subset.iter().any(|&i| videos[i].split == Split::Train) {
        return Err(Error::Invalid(format!("no train-split videos for task {task}")));
    }
    let pool: Vec<usize> = subset
        .iter()
        .copied()
        .filter(|&i| videos[i].split != Split::Test)
        .collect();
    let x = store.pooled(layer)?.select(Axis(0), &pool);
    let y: Vec<u8> = pool.iter().map(|&i| task.label(&videos[i])).collect();
    let val_rows: Vec<usize> = (0..pool.len())
        .filter(|&r| videos[pool[r]].split == Split::Val)
        .collect();
    let xv = x.select(Axis(0), &val_rows);
    let yv: Vec<u8> = val_rows.iter().map(|&r| y[r]).collect();

    let cv_seed = derive_seed(cfg.seed, &format!("cv/{task}"));
    let cv = cross_validate(x.view(), &y, cfg.folds, cv_seed, &cfg.probe)?;
    let probe = train_probe(x.view(), &y, &cfg.probe, basis, Some((xv.view(), &yv)))?;
    Ok(LayerProbeResult {
        layer,
        accuracy: cv.mean,
        cv,
        probe,
        pool_size: pool.len(),
    })
}

/// [`probe_layer`] over every layer in the store, in layer order.
pub fn probe_sweep(store: &ActivationStore, task: ProbeTask, cfg: &SweepConfig) -> Result<Vec<LayerProbeResult>> {
    store
        .layer_ids()
        .into_par_iter()
        .map(|l| probe_layer(store, l, task, cfg, Basis::Auto))
        .collect()
}
