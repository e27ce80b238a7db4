// SPDX-License-Identifier: MIT OR Apache-2.0

//! Probes every encoder layer for plausibility and finds the PEZ.

mod common;

use physteer::probekit::{find_pez, probe_sweep, ProbeTask};

fn main() -> physteer::Result<()> {
    let s = common::setup()?;
    let results = probe_sweep(&s.layers, ProbeTask::Plausibility, &s.cfg.sweep_config())?;
    let acc: Vec<(i32, f64)> = results.iter().map(|r| (r.layer, r.accuracy)).collect();
    let pez = find_pez(&acc, s.cfg.probe.epsilon, s.cfg.probe.top_k)?;
    for r in &results {
        let mark = if pez.pez_layers.contains(&r.layer) { "*" } else { "" };
        println!(
            "layer {}  acc {:.3} ± {:.3}  pool {}  {mark}",
            r.layer, r.accuracy, r.cv.std, r.pool_size
        );
    }
    println!(
        "threshold {:.3}, top-{} {:?}",
        pez.threshold, s.cfg.probe.top_k, pez.top_k
    );

    // motion is probed with the same machinery
    let motion = probe_sweep(&s.layers, ProbeTask::Motion, &s.cfg.sweep_config())?;
    for r in &motion {
        println!("motion layer {}  acc {:.3}", r.layer, r.accuracy);
    }
    Ok(())
}
