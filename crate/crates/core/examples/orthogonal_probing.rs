// SPDX-License-Identifier: MIT OR Apache-2.0

//! Iterative orthogonal probing on data whose label lives in a planted
//! subspace: accuracy collapses once the informative directions are removed.

use ndarray::Array2;
use physteer::probekit::{iterative_orthogonal_probes, ProbeConfig};
use physteer::util::rng_for;
use rand_distr::{Distribution, StandardNormal};

fn main() -> physteer::Result<()> {
    let (n, d) = (600, 16);
    let mut rng = rng_for(3, "orthogonal-example");
    for k in 1..=3 {
        let x = Array2::from_shape_simple_fn((n, d), || -> f64 { StandardNormal.sample(&mut rng) });
        let y: Vec<u8> = x
            .rows()
            .into_iter()
            .map(|r| u8::from(r.iter().take(k).sum::<f64>() > 0.0))
            .collect();
        let rep = iterative_orthogonal_probes(x.view(), &y, 5, 5, 1, &ProbeConfig::default())?;
        println!("planted k = {k}, majority {:.3}", rep.majority_rate);
        for s in &rep.steps {
            println!("  iteration {}  acc {:.3}", s.iteration, s.accuracy);
        }
        println!("  chance reached at {:?}", rep.chance_iteration);
    }
    Ok(())
}
