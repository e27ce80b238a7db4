// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dump format v1: `manifest.json` plus little-endian `f32` layer files.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/pooled_l{k}.f32   [num_videos × D], rows in manifest order
//! <dir>/tokens_l{k}.f32   [num_videos × N × D], optional per layer
//! ```
//!
//! The manifest is written last, so an interrupted write never leaves a
//! directory that looks complete.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{ActivationStore, LayerData, VideoMeta};
use crate::error::{Error, Result};

pub const DUMP_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    model_id: String,
    num_layers: usize,
    token_count: usize,
    dim: usize,
    pooling: String,
    layers: Vec<i32>,
    videos: Vec<VideoMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty", deserialize_with = "lenient_notes")]
    notes: Vec<String>,
}

/// Accepts `notes` as a string, a list of strings, or any other JSON; items
/// that are not strings are kept as their JSON text.
fn lenient_notes<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Vec<String>, D::Error> {
    use serde_json::Value;
    let text = |v: Value| match v {
        Value::String(s) => s,
        other => other.to_string(),
    };
    Ok(match Value::deserialize(de)? {
        Value::Null => Vec::new(),
        Value::Array(items) => items.into_iter().map(text).collect(),
        other => vec![text(other)],
    })
}

fn pooled_file(dir: &Path, layer: i32) -> PathBuf {
    dir.join(format!("pooled_l{layer}.f32"))
}

fn tokens_file(dir: &Path, layer: i32) -> PathBuf {
    dir.join(format!("tokens_l{layer}.f32"))
}

fn encode_f32<'a>(values: impl Iterator<Item = &'a f64>, len: usize) -> Vec<u8> {
    let mut buf = Vec::with_capacity(len * 4);
    for &v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    buf
}

/// Writes `values` (row-major) as little-endian `f32`.
pub(crate) fn write_f32_file(path: &Path, values: &[f64]) -> Result<()> {
    fs::write(path, encode_f32(values.iter(), values.len())).map_err(|e| Error::io(path, e))
}

/// Reads a little-endian `f32` file holding exactly `expected_len` values.
pub(crate) fn read_f32_file(path: &Path, expected_len: usize) -> Result<Vec<f64>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = (expected_len * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Writes `store` into `dir`, creating it if needed.
pub fn write_dump(store: &ActivationStore, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    }
    for (&layer, data) in &store.layers {
        let path = pooled_file(dir, layer);
        let bytes = encode_f32(data.pooled.iter(), data.pooled.len());
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        let tpath = tokens_file(dir, layer);
        match &data.tokens {
            Some(tokens) => {
                let bytes = encode_f32(tokens.iter(), tokens.len());
                fs::write(&tpath, bytes).map_err(|e| Error::io(&tpath, e))?;
            }
            None if tpath.exists() => {
                fs::remove_file(&tpath).map_err(|e| Error::io(&tpath, e))?;
            }
            None => {}
        }
    }
    let manifest = Manifest {
        version: DUMP_VERSION,
        model_id: store.model_id.clone(),
        num_layers: store.num_layers,
        token_count: store.token_count,
        dim: store.dim,
        pooling: "mean".into(),
        layers: store.layer_ids(),
        videos: store.videos.clone(),
        config_hash: store.config_hash.clone(),
        notes: store.notes.clone(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    let tmp = dir.join("manifest.json.partial");
    fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &manifest_path).map_err(|e| Error::io(&manifest_path, e))
}

/// Reads and validates a dump directory.
pub fn read_dump(dir: &Path) -> Result<ActivationStore> {
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.exists() {
        return Err(Error::MissingFile(manifest_path));
    }
    let raw = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_slice(&raw).map_err(|e| Error::Manifest {
        path: manifest_path.clone(),
        message: e.to_string(),
    })?;
    let bad = |message: String| Error::Manifest {
        path: manifest_path.clone(),
        message,
    };
    if manifest.version != DUMP_VERSION {
        return Err(bad(format!(
            "unsupported version {} (expected {DUMP_VERSION})",
            manifest.version
        )));
    }
    if manifest.pooling != "mean" {
        return Err(bad(format!("unsupported pooling {:?}", manifest.pooling)));
    }
    let mut sorted = manifest.layers.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != manifest.layers.len() {
        return Err(bad("duplicate layer ids".into()));
    }

    let nv = manifest.videos.len();
    let (n, d) = (manifest.token_count, manifest.dim);
    let mut builder = ActivationStore::builder(manifest.model_id, manifest.num_layers, n, d, manifest.videos.clone());
    for &layer in &manifest.layers {
        let ppath = pooled_file(dir, layer);
        let pooled = read_f32_file(&ppath, nv * d)?;
        reject_non_finite(&ppath, &pooled, d, &manifest.videos, layer)?;
        let pooled = Array2::from_shape_vec((nv, d), pooled).map_err(|e| Error::Dimension(e.to_string()))?;
        let tpath = tokens_file(dir, layer);
        let tokens = if tpath.exists() {
            let t = read_f32_file(&tpath, nv * n * d)?;
            reject_non_finite(&tpath, &t, n * d, &manifest.videos, layer)?;
            Some(Array3::from_shape_vec((nv, n, d), t).map_err(|e| Error::Dimension(e.to_string()))?)
        } else {
            None
        };
        builder = builder.layer(layer, LayerData { pooled, tokens });
    }
    if let Some(h) = manifest.config_hash {
        builder = builder.config_hash(h);
    }
    for note in manifest.notes {
        builder = builder.note(note);
    }
    builder.build()
}

fn reject_non_finite(path: &Path, values: &[f64], per_video: usize, videos: &[VideoMeta], layer: i32) -> Result<()> {
    if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
        let video = &videos[pos / per_video.max(1)].id;
        return Err(Error::NonFinite {
            context: format!(
                "{} (layer {layer}, video {video}, element {})",
                path.display(),
                pos % per_video.max(1)
            ),
        });
    }
    Ok(())
}
