// SPDX-License-Identifier: MIT OR Apache-2.0

//! Alpha sweep: inject the physics CAV at the readout layer and measure
//! flips, purity, drift and the final-layer shift.

mod common;

use physteer::evalkit::{alpha_sweep, Readout, DEFAULT_ALPHAS};

fn main() -> physteer::Result<()> {
    let s = common::setup()?;
    let ls = s.cavs.readout_layer;
    let probe = s.probes.record(ls as i32)?.to_probe();
    let cav = s.cavs.physics[0].to_cav()?;
    let readout = Readout {
        layer: ls,
        probe: &probe,
        cav: &cav,
    };
    let inputs = s.test_inputs();
    let sweep = alpha_sweep(
        &s.encoder,
        readout,
        std::slice::from_ref(&cav),
        &inputs,
        &DEFAULT_ALPHAS,
    )?;
    println!("readout layer {ls}, {} test videos", inputs.len());
    println!("alpha     FR   P(imp)     dP      DP      RD     cos");
    for r in &sweep.rows {
        println!(
            "{:>5}  {:.3}  {:.4}  {:+.4}  {:+.3}  {:.3}  {:+.3}",
            r.alpha,
            r.flip_rate,
            r.mean_score,
            r.score_delta,
            r.directional_purity,
            r.representation_drift,
            r.cosine_shift
        );
    }
    Ok(())
}
