// SPDX-License-Identifier: MIT OR Apache-2.0

//! Concept activation vectors and steering plans.
//!
//! A CAV is a probe's weight vector scaled to unit length. Probes are fit
//! with label 1 = impossible, so positive steering moves representations
//! toward "impossible".

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::actstore::{ActivationStore, Block, Split};
use crate::error::{Error, Result};
use crate::probekit::{fit_pca, probe_layer, Basis, Probe, ProbeTask, SweepConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CavScope {
    All,
    Block(Block),
}

impl fmt::Display for CavScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CavScope::All => f.write_str("all"),
            CavScope::Block(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cav {
    pub layer: usize,
    direction: Array1<f64>,
    pub scope: CavScope,
    /// `‖w‖` of the source probe.
    pub weight_norm: f64,
    /// Cross-validated accuracy of the source probe, when known.
    pub source_accuracy: Option<f64>,
}

impl Cav {
    /// Normalises `direction`; errors on a zero or non-finite vector.
    pub fn new(layer: usize, direction: Array1<f64>, scope: CavScope) -> Result<Cav> {
        let norm = direction.dot(&direction).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Invalid(format!("cannot normalise a direction with norm {norm}")));
        }
        Ok(Cav {
            layer,
            direction: direction / norm,
            scope,
            weight_norm: norm,
            source_accuracy: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn direction(&self) -> &Array1<f64> {
        &self.direction
    }
}

/// `v = w / ‖w‖` from a probe fit at `layer`.
pub fn make_cav(probe: &Probe, layer: usize, scope: CavScope) -> Result<Cav> {
    Cav::new(layer, probe.weights.clone(), scope)
}

/// One CAV per block at `layer`, each from a probe restricted to that
/// block's train+val videos.
///
/// When the probe config reduces features with PCA, all block probes share
/// one basis fit on every train+val video, keeping the CAVs in a common
/// coordinate system.
pub fn make_block_cavs(store: &ActivationStore, layer: usize, cfg: &SweepConfig) -> Result<Vec<(Block, Cav)>> {
    let l = layer as i32;
    let pool = store.select(|v| v.split != Split::Test);
    let x = store.pooled(l)?.select(Axis(0), &pool);
    let (n, d) = x.dim();
    let shared = match cfg.probe.pca.components(n, d) {
        Some(k) => Some(fit_pca(x.view(), k)?),
        None => None,
    };
    let mut out = Vec::with_capacity(3);
    for block in Block::ALL {
        let basis = match &shared {
            Some(p) => Basis::Fixed(p),
            None => Basis::Full,
        };
        let res = probe_layer(store, l, ProbeTask::Block(block), cfg, basis)?;
        let mut cav = make_cav(&res.probe, layer, CavScope::Block(block))?;
        cav.source_accuracy = Some(res.accuracy);
        out.push((block, cav));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Injection {
    pub layer: usize,
    pub cav: Cav,
    pub alpha: f64,
}

/// Injections keyed by layer, at most one per layer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SteeringPlan {
    injections: BTreeMap<usize, Injection>,
}

impl SteeringPlan {
    pub fn new() -> Self {
        SteeringPlan::default()
    }

    pub fn single(cav: Cav, alpha: f64) -> Result<Self> {
        build_plan(&[cav], alpha)
    }

    /// Adds an injection of `cav` at its own layer.
    pub fn push(&mut self, cav: Cav, alpha: f64) -> Result<()> {
        if !alpha.is_finite() {
            return Err(Error::Invalid(format!("alpha must be finite, got {alpha}")));
        }
        let layer = cav.layer;
        if self.injections.contains_key(&layer) {
            return Err(Error::Invalid(format!("duplicate injection at layer {layer}")));
        }
        self.injections.insert(layer, Injection { layer, cav, alpha });
        Ok(())
    }

    pub fn injections(&self) -> impl Iterator<Item = &Injection> {
        self.injections.values()
    }

    pub fn at(&self, layer: usize) -> Option<&Injection> {
        self.injections.get(&layer)
    }

    pub fn len(&self) -> usize {
        self.injections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.injections.is_empty()
    }

    pub fn first_layer(&self) -> Option<usize> {
        self.injections.keys().next().copied()
    }
}

/// Injects every CAV at its own layer with a shared `alpha`.
pub fn build_plan(cavs: &[Cav], alpha: f64) -> Result<SteeringPlan> {
    let mut plan = SteeringPlan::new();
    for cav in cavs {
        plan.push(cav.clone(), alpha)?;
    }
    Ok(plan)
}
