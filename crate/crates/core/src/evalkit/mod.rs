// SPDX-License-Identifier: MIT OR Apache-2.0

//! Steering metrics, subspace angles and the experiment drivers.

mod angles;
mod metrics;
mod projection;
mod steering;

pub use angles::{
    orthogonality_report, pairwise_angles, random_unit_vectors, AnglePair, OrthogonalityReport, RandomBaseline,
    DEFAULT_RANDOM_DRAWS,
};
pub use metrics::{directional_purity, flip_count, flip_rate, representation_drift, subspace_angle, Purity};
pub use projection::{project2d, ProjectionRow};
pub use steering::{
    alpha_sweep, layer_ablation, summarize, AblationRow, AlphaSweep, Readout, SteeringMetrics, VideoInput,
    VideoSteering, ABLATION_ALPHA, DEFAULT_ALPHAS,
};
