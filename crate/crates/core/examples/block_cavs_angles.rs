// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-block CAVs and the angles between them, the physics CAV, the motion
//! CAV and random directions.

mod common;

use physteer::evalkit::orthogonality_report;
use physteer::steer::make_block_cavs;

fn main() -> physteer::Result<()> {
    let s = common::setup()?;
    let ls = s.cavs.readout_layer;
    let blocks = make_block_cavs(&s.layers, ls, &s.cfg.sweep_config())?;
    let named: Vec<(String, _)> = blocks
        .iter()
        .map(|(b, c)| (b.to_string(), c.direction().view()))
        .collect();
    let physics = s.cavs.physics[0].to_cav()?;
    let motion = s.cavs.motion.to_cav()?;
    let r = orthogonality_report(
        physics.direction().view(),
        Some(motion.direction().view()),
        &named,
        1000,
        7,
    )?;
    println!("layer {ls}");
    println!("physics vs motion  {:.2}°", r.physics_motion.unwrap_or(f64::NAN));
    let b = &r.physics_random;
    println!(
        "physics vs random  {:.2}° ± {:.2}° over {} draws",
        b.mean, b.std, b.draws
    );
    for p in r.block_pairs.iter().chain(&r.physics_blocks) {
        println!("{} vs {}  {:.2}°", p.a, p.b, p.degrees);
    }
    Ok(())
}
