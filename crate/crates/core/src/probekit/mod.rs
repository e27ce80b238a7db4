// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear probing of pooled layer features.

mod cv;
mod logistic;
mod ortho;
mod pca;
mod pez;
mod probe;
mod sweep;

pub use cv::{cross_validate, stratified_folds, CvSummary};
pub use logistic::{fit_logistic, probability, LogisticFit, LogisticObjective};
pub use ortho::{iterative_orthogonal_probes, OrthoReport, OrthoStep, CHANCE_MARGIN};
pub use pca::{fit_pca, PcaModel};
pub use pez::{find_pez, PezResult};
pub use probe::{accuracy, train_probe, Basis, PcaPolicy, Probe, ProbeConfig};
pub use sweep::{probe_layer, probe_sweep, LayerProbeResult, ProbeTask, SweepConfig};
