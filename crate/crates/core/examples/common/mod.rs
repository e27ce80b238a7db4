// SPDX-License-Identifier: MIT OR Apache-2.0
#![allow(dead_code)]

use ndarray::Axis;
use physteer::actstore::{read_dump, ActivationStore, Split, RAW_LAYER};
use physteer::config::RunConfig;
use physteer::encoder::Encoder;
use physteer::evalkit::VideoInput;
use physteer::pipeline::{self, CavFile, ProbeFile, RunDir};
use physteer::probekit::ProbeTask;
use tempfile::TempDir;

/// A small encoded run: 60 videos through a 4-layer encoder, probed and
/// with CAVs extracted.
pub struct Setup {
    pub dir: TempDir,
    pub cfg: RunConfig,
    pub raw: ActivationStore,
    pub layers: ActivationStore,
    pub encoder: Encoder,
    pub probes: ProbeFile,
    pub cavs: CavFile,
}

pub fn small_config() -> RunConfig {
    let mut cfg = RunConfig {
        pairs_per_block: 10,
        ..RunConfig::default()
    };
    cfg.encoder.layers = 4;
    cfg
}

pub fn setup() -> physteer::Result<Setup> {
    let dir = TempDir::new().expect("temp dir");
    let cfg = small_config();
    let run = RunDir::new(dir.path());
    pipeline::gen(&cfg, &run)?;
    pipeline::encode(&cfg, &run.raw(), &run, false)?;
    let probes = pipeline::probe(&cfg, &run.layers(), &run, ProbeTask::Plausibility)?;
    let cavs = pipeline::cav(&cfg, &run.layers(), &run)?;
    Ok(Setup {
        raw: read_dump(&run.raw())?,
        layers: read_dump(&run.layers())?,
        encoder: Encoder::new(cfg.encoder_config())?,
        probes,
        cavs,
        cfg,
        dir,
    })
}

impl Setup {
    pub fn test_inputs(&self) -> Vec<VideoInput<'_>> {
        let tokens = self.raw.tokens(RAW_LAYER).unwrap().expect("raw tokens");
        self.raw
            .select(|v| v.split == Split::Test)
            .into_iter()
            .map(|i| VideoInput {
                id: &self.raw.videos()[i].id,
                tokens: tokens.index_axis_move(Axis(0), i),
            })
            .collect()
    }
}
