// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration and the per-stage lineage hashes.
//!
//! Each stage hashes only the settings that can change its output, chained
//! onto the hash of the stage it consumes:
//!
//! ```text
//! dataset  = H(seed, pairs_per_block, scene)
//! encoder  = H(dataset, model_id, encoder)
//! probe    = H(encoder, probe)
//! run      = H(probe, sweep)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::probekit::{PcaPolicy, ProbeConfig, SweepConfig};
use crate::synthphys::SceneSpec;
use crate::util::{derive_seed, sha256_hex};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_MODEL_ID: &str = "toy-encoder";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    pub frames: usize,
    pub grid: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub embed_scale: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        let s = SceneSpec::default();
        SceneParams {
            frames: s.frames,
            grid: s.grid,
            dim: s.dim,
            noise_sigma: s.noise_sigma,
            embed_scale: s.embed_scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderParams {
    pub layers: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub init_scale: f64,
}

impl Default for EncoderParams {
    fn default() -> Self {
        let e = EncoderConfig::default();
        EncoderParams {
            layers: e.layers,
            heads: e.heads,
            mlp_ratio: e.mlp_ratio,
            init_scale: e.init_scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeParams {
    pub folds: usize,
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub pca: PcaPolicy,
    pub flip_check: bool,
    pub epsilon: f64,
    pub top_k: usize,
}

impl Default for ProbeParams {
    fn default() -> Self {
        let p = ProbeConfig::default();
        ProbeParams {
            folds: 5,
            c: p.c,
            max_iter: p.max_iter,
            tol: p.tol,
            pca: p.pca,
            flip_check: p.flip_check,
            epsilon: 0.05,
            top_k: 3,
        }
    }
}

/// Where steering is injected during the alpha sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectMode {
    /// Only the best PEZ layer.
    Single,
    /// Every top-k PEZ layer, each with its own CAV.
    TopK,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub alphas: Vec<f64>,
    pub inject: InjectMode,
    pub ablation_alpha: f64,
    pub projection_alpha: f64,
    pub random_draws: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            alphas: crate::evalkit::DEFAULT_ALPHAS.to_vec(),
            inject: InjectMode::Single,
            ablation_alpha: crate::evalkit::ABLATION_ALPHA,
            projection_alpha: crate::evalkit::ABLATION_ALPHA,
            random_draws: crate::evalkit::DEFAULT_RANDOM_DRAWS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model_id: String,
    pub pairs_per_block: usize,
    pub scene: SceneParams,
    pub encoder: EncoderParams,
    pub probe: ProbeParams,
    pub sweep: SweepParams,
    /// Worker cap; does not affect results.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            model_id: DEFAULT_MODEL_ID.into(),
            pairs_per_block: 60,
            scene: SceneParams::default(),
            encoder: EncoderParams::default(),
            probe: ProbeParams::default(),
            sweep: SweepParams::default(),
            threads: None,
        }
    }
}

fn hash_json(prefix: &str, value: &impl Serialize) -> String {
    let mut bytes = prefix.as_bytes().to_vec();
    bytes.push(b'\n');
    bytes.extend(serde_json::to_vec(value).expect("config serializes"));
    sha256_hex(&bytes)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn scene_spec(&self) -> SceneSpec {
        SceneSpec {
            frames: self.scene.frames,
            grid: self.scene.grid,
            dim: self.scene.dim,
            noise_sigma: self.scene.noise_sigma,
            embed_scale: self.scene.embed_scale,
            seed: self.seed,
        }
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            layers: self.encoder.layers,
            dim: self.scene.dim,
            heads: self.encoder.heads,
            mlp_ratio: self.encoder.mlp_ratio,
            init_seed: derive_seed(self.seed, "encoder"),
            init_scale: self.encoder.init_scale,
        }
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            c: self.probe.c,
            max_iter: self.probe.max_iter,
            tol: self.probe.tol,
            pca: self.probe.pca,
            flip_check: self.probe.flip_check,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            probe: self.probe_config(),
            folds: self.probe.folds,
            seed: derive_seed(self.seed, "probe"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scene_spec().validate()?;
        self.encoder_config().validate()?;
        if self.pairs_per_block == 0 {
            return Err(Error::Config("pairs_per_block must be at least 1".into()));
        }
        if self.probe.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if self.probe.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if !(self.probe.epsilon >= 0.0 && self.probe.epsilon.is_finite()) {
            return Err(Error::Config("epsilon must be finite and non-negative".into()));
        }
        if self.sweep.alphas.is_empty() || self.sweep.alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("alphas must be a nonempty list of finite values".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dataset_hash(&self) -> String {
        hash_json("dataset", &(self.seed, self.pairs_per_block, &self.scene))
    }

    pub fn encoder_hash(&self) -> String {
        hash_json(&self.dataset_hash(), &(&self.model_id, &self.encoder))
    }

    pub fn probe_hash(&self) -> String {
        hash_json(&self.encoder_hash(), &self.probe)
    }

    pub fn run_hash(&self) -> String {
        hash_json(&self.probe_hash(), &self.sweep)
    }
}

/// Rejects an artifact whose recorded hash differs from the expected one.
/// Artifacts without a hash (foreign dumps) pass.
pub fn check_lineage(what: &str, recorded: Option<&str>, expected: &str) -> Result<()> {
    match recorded {
        Some(h) if h != expected => Err(Error::Lineage(format!(
            "{what} was produced under config {h}, current config expects {expected}"
        ))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_follow_stage_dependencies() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.probe.folds = 3;
        assert_eq!(a.encoder_hash(), b.encoder_hash());
        assert_ne!(a.probe_hash(), b.probe_hash());
        let mut c = a.clone();
        c.seed = 8;
        assert_ne!(a.dataset_hash(), c.dataset_hash());
        assert_ne!(a.run_hash(), c.run_hash());
        let mut d = a.clone();
        d.threads = Some(3);
        assert_eq!(a.run_hash(), d.run_hash());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 3, "probe": {"folds": 4}}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.probe.folds, 4);
        assert_eq!(c.probe.top_k, 3);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 3}"#).is_err());
    }

    #[test]
    fn lineage() {
        assert!(check_lineage("store", None, "x").is_ok());
        assert!(check_lineage("store", Some("x"), "x").is_ok());
        assert!(matches!(check_lineage("store", Some("y"), "x"), Err(Error::Lineage(_))));
    }
}
