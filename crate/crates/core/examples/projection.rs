// SPDX-License-Identifier: MIT OR Apache-2.0

//! 2D PCA of readout-layer features for the test split, with the endpoint
//! of each video after steering.

mod common;

use ndarray::Array2;
use physteer::encoder::Capture;
use physteer::evalkit::project2d;
use physteer::steer::SteeringPlan;

fn main() -> physteer::Result<()> {
    let s = common::setup()?;
    let ls = s.cavs.readout_layer;
    let plan = SteeringPlan::single(s.cavs.physics[0].to_cav()?, 10.0)?;
    let inputs = s.test_inputs();
    let d = s.encoder.dim();
    let mut base = Array2::zeros((inputs.len(), d));
    let mut steered = Array2::zeros((inputs.len(), d));
    for (i, v) in inputs.iter().enumerate() {
        let hidden = s.encoder.hidden_at(v.tokens, ls)?;
        let b = s.encoder.resume(hidden.view(), ls, None, ls, Capture::Pooled)?;
        let t = s.encoder.resume(hidden.view(), ls, Some(&plan), ls, Capture::Pooled)?;
        base.row_mut(i).assign(b.pooled(ls).unwrap());
        steered.row_mut(i).assign(t.pooled(ls).unwrap());
    }
    let metas: Vec<_> = inputs
        .iter()
        .map(|v| &s.raw.videos()[s.raw.index_of(v.id).unwrap()])
        .collect();
    let (pca, rows) = project2d(&metas, base.view(), steered.view())?;
    println!(
        "explained variance ratio {:.3?}",
        pca.explained_variance_ratio().to_vec()
    );
    for r in &rows {
        println!(
            "{:<12} imp {}  ({:+.2}, {:+.2}) -> ({:+.2}, {:+.2})",
            r.id, r.plausibility, r.x, r.y, r.steered_x, r.steered_y
        );
    }
    Ok(())
}
