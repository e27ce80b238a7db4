// SPDX-License-Identifier: MIT OR Apache-2.0

//! Generates a few synthetic possible/impossible pairs and draws one pair
//! around its violation onset.

use physteer::synthphys::{generate_dataset, SceneSpec, Trajectory};

/// `#` occluder, `o` object.
fn draw(traj: &Trajectory, t: usize, grid: usize) -> Vec<String> {
    let mut rows = vec![vec!['.'; grid]; grid];
    for (c, r) in traj.occluder.cells() {
        rows[r][c] = '#';
    }
    if traj.present[t] {
        let p = traj.positions[t];
        rows[p[1] as usize][p[0] as usize] = 'o';
    }
    rows.into_iter().map(|r| r.into_iter().collect()).collect()
}

fn main() -> physteer::Result<()> {
    let spec = SceneSpec::default();
    let ds = generate_dataset(&spec, 5)?;
    println!(
        "{} videos, {} tokens of dim {} each",
        ds.videos.len(),
        spec.token_count(),
        spec.dim
    );
    for v in ds.videos.iter().step_by(5) {
        let onset = v
            .trajectory
            .violation
            .map(|x| x.onset.to_string())
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<14} pair {:<8} block {} impossible {} motion {:?} split {:?} onset {onset}",
            v.meta.id,
            v.pair_id,
            v.meta.block,
            v.meta.plausibility.label(),
            v.meta.motion,
            v.meta.split,
        );
    }

    let imp = ds
        .videos
        .iter()
        .find(|v| v.trajectory.violation.is_some())
        .expect("an impossible video");
    let pos = ds
        .videos
        .iter()
        .find(|v| v.pair_id == imp.pair_id && v.trajectory.violation.is_none())
        .expect("its possible partner");
    let onset = imp.trajectory.violation.unwrap().onset;
    for t in onset.saturating_sub(1)..(onset + 2).min(spec.frames) {
        println!("\nframe {t}: possible | impossible");
        let a = draw(&pos.trajectory, t, spec.grid);
        let b = draw(&imp.trajectory, t, spec.grid);
        for (l, r) in a.iter().zip(&b) {
            println!("  {l}   {r}");
        }
    }
    Ok(())
}
