// SPDX-License-Identifier: MIT OR Apache-2.0

//! Injects a CAV at each layer in turn and reads out at a fixed layer.
//! Layers after the readout cannot affect it.

mod common;

use physteer::evalkit::{layer_ablation, Readout, ABLATION_ALPHA};
use physteer::steer::{make_cav, CavScope};

fn main() -> physteer::Result<()> {
    let s = common::setup()?;
    let inputs = s.test_inputs();
    for readout_layer in [s.cavs.readout_layer, 2] {
        let probe = s.probes.record(readout_layer as i32)?.to_probe();
        let cav = make_cav(&probe, readout_layer, CavScope::All)?;
        let readout = Readout {
            layer: readout_layer,
            probe: &probe,
            cav: &cav,
        };
        println!("readout at layer {readout_layer}, alpha {ABLATION_ALPHA}");
        for r in layer_ablation(&s.encoder, readout, &inputs, ABLATION_ALPHA)? {
            println!(
                "  inject {}  FR {:.3}  DP {:+.4}  RD {:.3}",
                r.layer, r.flip_rate, r.directional_purity, r.representation_drift
            );
        }
    }
    Ok(())
}
