// SPDX-License-Identifier: MIT OR Apache-2.0

//! Every stage through a run directory, like `physteer all`.
//!
//! ```text
//! cargo run --release --example full_pipeline -- [out-dir] [seed]
//! ```

use physteer::config::RunConfig;
use physteer::pipeline::{all, RunDir};

fn main() -> physteer::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "run-example".into());
    let seed = args
        .next()
        .map(|s| s.parse().expect("seed must be an integer"))
        .unwrap_or(7);
    let mut cfg = RunConfig {
        seed,
        pairs_per_block: 10,
        ..RunConfig::default()
    };
    cfg.encoder.layers = 4;
    let run = RunDir::new(&out);
    let report = all(&cfg, &run)?;

    println!("dataset {:?}", report.dataset);
    for p in &report.probes {
        println!("probe layer {:>2}  {:.3}", p.layer, p.accuracy);
    }
    println!("PEZ {:?}, top-k {:?}", report.pez.pez_layers, report.pez.top_k);
    for r in &report.alpha_sweep.rows {
        println!(
            "alpha {:>5}  FR {:.3}  P(imp) {:.4}",
            r.alpha, r.flip_rate, r.mean_score
        );
    }
    println!("wrote {}", run.report().display());
    Ok(())
}
