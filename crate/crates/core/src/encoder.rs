// SPDX-License-Identifier: MIT OR Apache-2.0

//! Frozen pre-norm transformer encoder with per-block taps and injection.
//!
//! Each block computes `x + Attn(LN(x))` followed by `x + MLP(LN(x))`. The
//! recorded activation of layer `l` is the block output after both residual
//! adds; steering injections are applied at the same tap, before the next
//! block reads it. Weights are a pure function of the config.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::actstore::{mean_pool, LayerActivations};
use crate::error::{Error, Result};
use crate::steer::SteeringPlan;
use crate::util::{rng_for, sha256_hex};

const LN_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub layers: usize,
    pub dim: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub init_seed: u64,
    pub init_scale: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: 8,
            dim: 64,
            heads: 4,
            mlp_ratio: 4,
            init_seed: 0,
            init_scale: 0.02,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.dim == 0 || self.heads == 0 || self.mlp_ratio == 0 {
            return Err(Error::Config("encoder sizes must be positive".into()));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "dim {} not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Config("init_scale must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct BlockWeights {
    w_qkv: Array2<f64>,
    b_qkv: Array1<f64>,
    w_out: Array2<f64>,
    b_out: Array1<f64>,
    w_up: Array2<f64>,
    b_up: Array1<f64>,
    w_down: Array2<f64>,
    b_down: Array1<f64>,
}

impl BlockWeights {
    fn tensors(&self) -> [&[f64]; 8] {
        [
            self.w_qkv.as_slice().unwrap(),
            self.b_qkv.as_slice().unwrap(),
            self.w_out.as_slice().unwrap(),
            self.b_out.as_slice().unwrap(),
            self.w_up.as_slice().unwrap(),
            self.b_up.as_slice().unwrap(),
            self.w_down.as_slice().unwrap(),
            self.b_down.as_slice().unwrap(),
        ]
    }
}

/// What a forward pass keeps for each layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Capture {
    /// Token matrices and pooled vectors.
    Tokens,
    /// Pooled vectors only.
    Pooled,
}

/// Recorded activations for a contiguous range of layers.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    first: usize,
    layers: Vec<LayerActivations>,
}

impl ForwardTrace {
    pub fn first_layer(&self) -> usize {
        self.first
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> &[LayerActivations] {
        &self.layers
    }

    /// Activations recorded at absolute layer index `layer`.
    pub fn layer(&self, layer: usize) -> Option<&LayerActivations> {
        layer.checked_sub(self.first).and_then(|i| self.layers.get(i))
    }

    pub fn pooled(&self, layer: usize) -> Option<&Array1<f64>> {
        self.layer(layer).map(|a| &a.pooled)
    }

    pub fn last(&self) -> Option<&LayerActivations> {
        self.layers.last()
    }
}

#[derive(Clone, Debug)]
pub struct Encoder {
    cfg: EncoderConfig,
    blocks: Vec<BlockWeights>,
}

fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut impl rand::Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

fn gaussian_vec(len: usize, scale: f64, rng: &mut impl rand::Rng) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

fn layer_norm(x: &Array2<f64>) -> Array2<f64> {
    let d = x.ncols() as f64;
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let mean = row.sum() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * inv);
    }
    out
}

fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        row.mapv_inplace(|v| {
            let e = (v - max).exp();
            sum += e;
            e
        });
        row.mapv_inplace(|v| v / sum);
    }
}

impl Encoder {
    pub fn new(cfg: EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let (d, h, sc) = (cfg.dim, cfg.dim * cfg.mlp_ratio, cfg.init_scale);
        let blocks = (0..cfg.layers)
            .map(|l| {
                let mut rng = rng_for(cfg.init_seed, &format!("encoder/block{l}"));
                BlockWeights {
                    w_qkv: gaussian(d, 3 * d, sc, &mut rng),
                    b_qkv: gaussian_vec(3 * d, sc, &mut rng),
                    w_out: gaussian(d, d, sc, &mut rng),
                    b_out: gaussian_vec(d, sc, &mut rng),
                    w_up: gaussian(d, h, sc, &mut rng),
                    b_up: gaussian_vec(h, sc, &mut rng),
                    w_down: gaussian(h, d, sc, &mut rng),
                    b_down: gaussian_vec(d, sc, &mut rng),
                }
            })
            .collect();
        Ok(Encoder { cfg, blocks })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn num_layers(&self) -> usize {
        self.cfg.layers
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim
    }

    /// SHA-256 over all weight bytes in block order.
    pub fn weights_digest(&self) -> String {
        let mut bytes = Vec::new();
        for b in &self.blocks {
            for t in b.tensors() {
                for v in t {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        sha256_hex(&bytes)
    }

    fn block(&self, l: usize, x: Array2<f64>) -> Array2<f64> {
        let w = &self.blocks[l];
        let d = self.cfg.dim;
        let dh = d / self.cfg.heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let a = layer_norm(&x);
        let qkv = a.dot(&w.w_qkv) + &w.b_qkv;
        let mut heads = Array2::<f64>::zeros((x.nrows(), d));
        for hd in 0..self.cfg.heads {
            let q = qkv.slice(s![.., hd * dh..(hd + 1) * dh]);
            let k = qkv.slice(s![.., d + hd * dh..d + (hd + 1) * dh]);
            let v = qkv.slice(s![.., 2 * d + hd * dh..2 * d + (hd + 1) * dh]);
            let mut scores = q.dot(&k.t());
            scores.mapv_inplace(|s| s * scale);
            softmax_rows(&mut scores);
            heads.slice_mut(s![.., hd * dh..(hd + 1) * dh]).assign(&scores.dot(&v));
        }
        let x = x + heads.dot(&w.w_out) + &w.b_out;

        let m = layer_norm(&x);
        let mut up = m.dot(&w.w_up) + &w.b_up;
        up.mapv_inplace(gelu);
        x + up.dot(&w.w_down) + &w.b_down
    }

    fn check_plan(&self, plan: Option<&SteeringPlan>, first: usize) -> Result<()> {
        let Some(plan) = plan else { return Ok(()) };
        for inj in plan.injections() {
            if inj.layer >= self.cfg.layers {
                return Err(Error::Invalid(format!(
                    "injection layer {} outside encoder with {} layers",
                    inj.layer, self.cfg.layers
                )));
            }
            if inj.layer < first {
                return Err(Error::Invalid(format!(
                    "injection at layer {} precedes resume layer {first}",
                    inj.layer
                )));
            }
            if inj.cav.dim() != self.cfg.dim {
                return Err(Error::Dimension(format!(
                    "CAV dim {} vs encoder dim {}",
                    inj.cav.dim(),
                    self.cfg.dim
                )));
            }
        }
        Ok(())
    }

    fn check_input(&self, tokens: &ArrayView2<f64>) -> Result<()> {
        if tokens.ncols() != self.cfg.dim {
            return Err(Error::Dimension(format!(
                "token dim {} vs encoder dim {}",
                tokens.ncols(),
                self.cfg.dim
            )));
        }
        if tokens.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        Ok(())
    }

    fn tap(
        &self,
        layer: usize,
        mut h: Array2<f64>,
        plan: Option<&SteeringPlan>,
        capture: Capture,
        out: &mut Vec<LayerActivations>,
    ) -> Result<Array2<f64>> {
        if let Some(inj) = plan.and_then(|p| p.at(layer)) {
            if inj.alpha != 0.0 {
                let shift = inj.cav.direction() * inj.alpha;
                h += &shift;
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("encoder layer {layer}"),
            });
        }
        let pooled = mean_pool(h.view())?;
        out.push(LayerActivations {
            layer: layer as i32,
            tokens: match capture {
                Capture::Tokens => Some(h.clone()),
                Capture::Pooled => None,
            },
            pooled,
        });
        Ok(h)
    }

    /// Full forward pass recording every layer's tokens.
    pub fn forward(&self, tokens: ArrayView2<f64>, plan: Option<&SteeringPlan>) -> Result<ForwardTrace> {
        self.forward_until(tokens, plan, self.cfg.layers - 1, Capture::Tokens)
    }

    /// Forward pass through layers `0..=last`.
    pub fn forward_until(
        &self,
        tokens: ArrayView2<f64>,
        plan: Option<&SteeringPlan>,
        last: usize,
        capture: Capture,
    ) -> Result<ForwardTrace> {
        self.check_input(&tokens)?;
        self.check_plan(plan, 0)?;
        if last >= self.cfg.layers {
            return Err(Error::Invalid(format!("layer {last} outside encoder")));
        }
        let mut h = tokens.to_owned();
        let mut out = Vec::with_capacity(last + 1);
        for l in 0..=last {
            h = self.block(l, h);
            h = self.tap(l, h, plan, capture, &mut out)?;
        }
        Ok(ForwardTrace { first: 0, layers: out })
    }

    /// Continues a pass from the unsteered output of layer `from`.
    ///
    /// `hidden` is the block output of layer `from` before any injection;
    /// injections at `from` and later are applied as in [`Encoder::forward`].
    /// Because blocks only read earlier layers, the result equals the
    /// corresponding suffix of a full forward pass.
    pub fn resume(
        &self,
        hidden: ArrayView2<f64>,
        from: usize,
        plan: Option<&SteeringPlan>,
        last: usize,
        capture: Capture,
    ) -> Result<ForwardTrace> {
        self.check_input(&hidden)?;
        self.check_plan(plan, from)?;
        if from > last || last >= self.cfg.layers {
            return Err(Error::Invalid(format!("resume range {from}..={last} outside encoder")));
        }
        let mut out = Vec::with_capacity(last - from + 1);
        let mut h = self.tap(from, hidden.to_owned(), plan, capture, &mut out)?;
        for l in from + 1..=last {
            h = self.block(l, h);
            h = self.tap(l, h, plan, capture, &mut out)?;
        }
        Ok(ForwardTrace {
            first: from,
            layers: out,
        })
    }

    /// Unsteered block output of layer `layer` (tokens), for use with
    /// [`Encoder::resume`].
    pub fn hidden_at(&self, tokens: ArrayView2<f64>, layer: usize) -> Result<Array2<f64>> {
        let trace = self.forward_until(tokens, None, layer, Capture::Tokens)?;
        Ok(trace
            .layers
            .into_iter()
            .next_back()
            .and_then(|a| a.tokens)
            .expect("tokens captured"))
    }
}

/// Relative Frobenius change `‖after − before‖ / ‖before‖`.
pub fn relative_change(before: ArrayView2<f64>, after: ArrayView2<f64>) -> f64 {
    let diff = (&after - &before).mapv(|v| v * v).sum().sqrt();
    let base = before.mapv(|v| v * v).sum().sqrt();
    diff / base
}
