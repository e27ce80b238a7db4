// SPDX-License-Identifier: MIT OR Apache-2.0

//! Alpha sweep and layer ablation.

use ndarray::{Array1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{directional_purity, representation_drift};
use crate::encoder::{Capture, Encoder};
use crate::error::{Error, Result};
use crate::probekit::{probability, Probe};
use crate::steer::{build_plan, Cav, SteeringPlan};

pub const DEFAULT_ALPHAS: [f64; 9] = [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
pub const ABLATION_ALPHA: f64 = 10.0;

/// One video's tokens, by id.
#[derive(Clone, Copy, Debug)]
pub struct VideoInput<'a> {
    pub id: &'a str,
    pub tokens: ArrayView2<'a, f64>,
}

/// The probe steering is measured with, and the layer it reads.
#[derive(Clone, Copy, Debug)]
pub struct Readout<'a> {
    pub layer: usize,
    pub probe: &'a Probe,
    /// Direction that purity and cosine shift are measured against.
    pub cav: &'a Cav,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringMetrics {
    pub alpha: f64,
    pub flip_rate: f64,
    pub flips: usize,
    pub videos: usize,
    pub mean_score: f64,
    pub score_delta: f64,
    pub directional_purity: f64,
    /// Videos whose shift at the readout layer was zero.
    pub purity_undefined: usize,
    pub representation_drift: f64,
    pub cosine_shift: f64,
}

/// Per-video outcome for one alpha.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoSteering {
    pub id: String,
    pub alpha: f64,
    pub base_logit: f64,
    pub steered_logit: f64,
    pub base_pred: u8,
    pub steered_pred: u8,
    pub purity: f64,
    pub purity_defined: bool,
    pub drift: f64,
    pub final_cosine: f64,
    pub final_cosine_defined: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSweep {
    pub rows: Vec<SteeringMetrics>,
    /// Grouped by alpha, videos in input order.
    pub videos: Vec<VideoSteering>,
}

fn pred(logit: f64) -> u8 {
    u8::from(logit > 0.0)
}

/// Aggregates per-video outcomes of one alpha into a table row.
pub fn summarize(alpha: f64, rows: &[VideoSteering]) -> SteeringMetrics {
    let n = rows.len();
    let nf = n.max(1) as f64;
    let flips = rows.iter().filter(|r| r.base_pred != r.steered_pred).count();
    let mut mean_score = 0.0;
    let mut score_delta = 0.0;
    let mut purity = 0.0;
    let mut drift = 0.0;
    let mut cos = 0.0;
    for r in rows {
        let (pb, ps) = (probability(r.base_logit), probability(r.steered_logit));
        mean_score += ps;
        score_delta += ps - pb;
        purity += r.purity;
        drift += r.drift;
        cos += r.final_cosine;
    }
    SteeringMetrics {
        alpha,
        flip_rate: if n == 0 { 0.0 } else { flips as f64 / n as f64 },
        flips,
        videos: n,
        mean_score: mean_score / nf,
        score_delta: score_delta / nf,
        directional_purity: purity / nf,
        purity_undefined: rows.iter().filter(|r| !r.purity_defined).count(),
        representation_drift: drift / nf,
        cosine_shift: cos / nf,
    }
}

fn check_readout(encoder: &Encoder, readout: &Readout<'_>) -> Result<()> {
    if readout.layer >= encoder.num_layers() {
        return Err(Error::Invalid(format!(
            "readout layer {} outside encoder",
            readout.layer
        )));
    }
    if readout.probe.dim() != encoder.dim() || readout.cav.dim() != encoder.dim() {
        return Err(Error::Dimension("probe or CAV dim differs from encoder dim".into()));
    }
    Ok(())
}

/// Steers every video at each alpha and compares with the unsteered pass.
///
/// `cavs` are injected at their own layers with a shared alpha. Scores,
/// flips, purity and drift are read at the readout layer; the cosine shift
/// is the purity of the final layer's pooled shift against the readout CAV.
pub fn alpha_sweep(
    encoder: &Encoder,
    readout: Readout<'_>,
    cavs: &[Cav],
    videos: &[VideoInput<'_>],
    alphas: &[f64],
) -> Result<AlphaSweep> {
    check_readout(encoder, &readout)?;
    if videos.is_empty() {
        return Err(Error::Invalid("alpha sweep needs at least one video".into()));
    }
    if cavs.is_empty() {
        return Err(Error::Invalid("alpha sweep needs at least one CAV".into()));
    }
    let plans: Vec<SteeringPlan> = alphas.iter().map(|&a| build_plan(cavs, a)).collect::<Result<_>>()?;
    let last = encoder.num_layers() - 1;
    let start = cavs
        .iter()
        .map(|c| c.layer)
        .chain([readout.layer])
        .min()
        .expect("nonempty");
    let v = readout.cav.direction().view();

    let per_video: Vec<Vec<VideoSteering>> = videos
        .par_iter()
        .map(|video| {
            let hidden = encoder.hidden_at(video.tokens, start)?;
            let base = encoder.resume(hidden.view(), start, None, last, Capture::Pooled)?;
            let base_l = base.pooled(readout.layer).expect("readout in range");
            let base_last = base.pooled(last).expect("last layer");
            let base_logit = readout.probe.logit(base_l.view());
            alphas
                .iter()
                .zip(&plans)
                .map(|(&alpha, plan)| {
                    // α = 0 injects nothing, so the baseline pass is the steered pass
                    let steered;
                    let tr = if alpha == 0.0 {
                        &base
                    } else {
                        steered = encoder.resume(hidden.view(), start, Some(plan), last, Capture::Pooled)?;
                        &steered
                    };
                    let f_l = tr.pooled(readout.layer).expect("readout in range");
                    let f_last = tr.pooled(last).expect("last layer");
                    let steered_logit = readout.probe.logit(f_l.view());
                    let purity = directional_purity(base_l.view(), f_l.view(), v)?;
                    let fin = directional_purity(base_last.view(), f_last.view(), v)?;
                    Ok(VideoSteering {
                        id: video.id.to_string(),
                        alpha,
                        base_logit,
                        steered_logit,
                        base_pred: pred(base_logit),
                        steered_pred: pred(steered_logit),
                        purity: purity.value,
                        purity_defined: purity.defined,
                        drift: representation_drift(base_l.view(), f_l.view())?,
                        final_cosine: fin.value,
                        final_cosine_defined: fin.defined,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(alphas.len());
    let mut flat = Vec::with_capacity(alphas.len() * videos.len());
    for (k, &alpha) in alphas.iter().enumerate() {
        let group: Vec<VideoSteering> = per_video.iter().map(|v| v[k].clone()).collect();
        rows.push(summarize(alpha, &group));
        flat.extend(group);
    }
    Ok(AlphaSweep { rows, videos: flat })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub layer: usize,
    pub flip_rate: f64,
    pub flips: usize,
    pub directional_purity: f64,
    pub purity_undefined: usize,
    pub representation_drift: f64,
}

/// Base prediction, steered prediction, purity, purity defined, drift.
type AblationCell = (u8, u8, f64, bool, f64);

/// Injects the readout CAV at each layer in turn and measures the effect at
/// the readout layer.
///
/// Every row runs the encoder far enough to apply its injection, so rows
/// for layers after the readout report measured, not assumed, zeros.
pub fn layer_ablation(
    encoder: &Encoder,
    readout: Readout<'_>,
    videos: &[VideoInput<'_>],
    alpha: f64,
) -> Result<Vec<AblationRow>> {
    check_readout(encoder, &readout)?;
    if videos.is_empty() {
        return Err(Error::Invalid("layer ablation needs at least one video".into()));
    }
    let ls = readout.layer;
    let layers = encoder.num_layers();
    let v = readout.cav.direction().view();
    let plans: Vec<SteeringPlan> = (0..layers)
        .map(|l| {
            let mut cav = readout.cav.clone();
            cav.layer = l;
            build_plan(&[cav], alpha)
        })
        .collect::<Result<_>>()?;

    let per_video: Vec<Vec<AblationCell>> = videos
        .par_iter()
        .map(|video| {
            let trace = encoder.forward_until(video.tokens, None, ls, Capture::Tokens)?;
            let base: Array1<f64> = trace.pooled(ls).expect("readout").clone();
            let base_pred = pred(readout.probe.logit(base.view()));
            (0..layers)
                .map(|l| {
                    let from = l.min(ls);
                    let hidden = trace
                        .layer(from)
                        .and_then(|a| a.tokens.as_ref())
                        .expect("tokens captured");
                    let tr = encoder.resume(hidden.view(), from, Some(&plans[l]), l.max(ls), Capture::Pooled)?;
                    let f = tr.pooled(ls).expect("readout");
                    let p = directional_purity(base.view(), f.view(), v)?;
                    Ok((
                        base_pred,
                        pred(readout.probe.logit(f.view())),
                        p.value,
                        p.defined,
                        representation_drift(base.view(), f.view())?,
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let n = videos.len() as f64;
    Ok((0..layers)
        .map(|l| {
            let cells: Vec<_> = per_video.iter().map(|v| v[l]).collect();
            let flips = cells.iter().filter(|c| c.0 != c.1).count();
            AblationRow {
                layer: l,
                flip_rate: flips as f64 / n,
                flips,
                directional_purity: cells.iter().map(|c| c.2).sum::<f64>() / n,
                purity_undefined: cells.iter().filter(|c| !c.3).count(),
                representation_drift: cells.iter().map(|c| c.4).sum::<f64>() / n,
            }
        })
        .collect())
}
