// SPDX-License-Identifier: MIT OR Apache-2.0

//! Writes a synthetic raw-token store in the dump v1 layout, reads it back
//! and checks the round trip.

use std::fs;

use physteer::actstore::{read_dump, write_dump, RAW_LAYER};
use physteer::synthphys::{generate_dataset, SceneSpec};

fn main() -> physteer::Result<()> {
    let ds = generate_dataset(&SceneSpec::default(), 5)?;
    let store = ds.to_store("toy-encoder", None)?;
    let dir = tempfile::tempdir().expect("temp dir");
    write_dump(&store, dir.path())?;

    let mut files: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap()).collect();
    files.sort_by_key(|e| e.file_name());
    for e in &files {
        println!(
            "{:>10} bytes  {}",
            e.metadata().unwrap().len(),
            e.file_name().to_string_lossy()
        );
    }

    let back = read_dump(dir.path())?;
    println!(
        "read {} videos, layers {:?}, token tensor {:?}",
        back.videos().len(),
        back.layer_ids(),
        back.tokens(RAW_LAYER)?.map(|t| t.dim())
    );
    // values are stored as f32, so the first trip rounds and later trips are exact
    let err = (&store.tokens(RAW_LAYER)?.unwrap() - &back.tokens(RAW_LAYER)?.unwrap())
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    println!("max |Δ| from f32 storage: {err:.2e}");
    let again = tempfile::tempdir().expect("temp dir");
    write_dump(&back, again.path())?;
    println!("second round trip identical: {}", read_dump(again.path())? == back);
    Ok(())
}
