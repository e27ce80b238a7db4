// SPDX-License-Identifier: MIT OR Apache-2.0

//! Disk-backed pipeline stages over a run directory.
//!
//! ```text
//! <run>/run_config.json
//! <run>/raw/          dump v1, layer -1 tokens
//! <run>/layers/       dump v1, encoder layers (pooled)
//! <run>/probes/       <task>.json, <task>.csv, <task>_l{k}.f32
//! <run>/cavs/         cavs.json, <name>.f32
//! <run>/reports/      CSV tables and per-stage JSON
//! <run>/report.json
//! ```
//!
//! Every JSON artifact records the lineage hash of the config that produced
//! it; consumers reject artifacts from a different config.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::actstore::dump::write_f32_file;
use crate::actstore::{read_dump, write_dump, ActivationStore, LayerData, Split, VideoMeta, RAW_LAYER};
use crate::config::{check_lineage, InjectMode, RunConfig};
use crate::encoder::{Capture, Encoder};
use crate::error::{Error, Result};
use crate::evalkit::{
    alpha_sweep, layer_ablation, orthogonality_report, project2d, AblationRow, AnglePair, OrthogonalityReport,
    ProjectionRow, Readout, SteeringMetrics, VideoInput, VideoSteering,
};
use crate::probekit::{find_pez, probe_sweep, PezResult, Probe, ProbeTask};
use crate::steer::{build_plan, make_block_cavs, make_cav, Cav, CavScope};
use crate::synthphys::generate_dataset;
use crate::util::derive_seed;

/// Paths inside a run directory.
#[derive(Clone, Debug)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("run_config.json")
    }

    pub fn raw(&self) -> PathBuf {
        self.root.join("raw")
    }

    pub fn layers(&self) -> PathBuf {
        self.root.join("layers")
    }

    pub fn probes(&self) -> PathBuf {
        self.root.join("probes")
    }

    pub fn cavs(&self) -> PathBuf {
        self.root.join("cavs")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Invalid(format!("{other:?}")),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{what} has dim {got}, config expects {want}")));
    }
    Ok(())
}

// ---------------------------------------------------------------- gen

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub videos: usize,
    pub token_count: usize,
    pub dim: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

fn summarize_videos(videos: &[VideoMeta], token_count: usize, dim: usize) -> DatasetSummary {
    let count = |s: Split| videos.iter().filter(|v| v.split == s).count();
    DatasetSummary {
        videos: videos.len(),
        token_count,
        dim,
        train: count(Split::Train),
        val: count(Split::Val),
        test: count(Split::Test),
    }
}

/// Generates the synthetic dataset into `<run>/raw`.
pub fn gen(cfg: &RunConfig, run: &RunDir) -> Result<DatasetSummary> {
    cfg.validate()?;
    let ds = generate_dataset(&cfg.scene_spec(), cfg.pairs_per_block)?;
    let store = ds.to_store(&cfg.model_id, Some(&cfg.dataset_hash()))?;
    write_dump(&store, &run.raw())?;
    Ok(summarize_videos(store.videos(), store.token_count(), store.dim()))
}

// ---------------------------------------------------------------- encode

fn load_raw(cfg: &RunConfig, dir: &Path) -> Result<ActivationStore> {
    let store = read_dump(dir)?;
    check_lineage("raw store", store.config_hash(), &cfg.dataset_hash())?;
    check_dim("raw store", store.dim(), cfg.scene.dim)?;
    if store.tokens(RAW_LAYER)?.is_none() {
        return Err(Error::Invalid(format!(
            "{} carries no layer -1 token tensor",
            dir.display()
        )));
    }
    Ok(store)
}

/// Runs the encoder over every raw video and writes `<run>/layers`.
pub fn encode(cfg: &RunConfig, raw_dir: &Path, run: &RunDir, keep_tokens: bool) -> Result<DatasetSummary> {
    cfg.validate()?;
    let raw = load_raw(cfg, raw_dir)?;
    let enc = Encoder::new(cfg.encoder_config())?;
    let tokens = raw.tokens(RAW_LAYER)?.expect("checked by load_raw");
    let capture = if keep_tokens { Capture::Tokens } else { Capture::Pooled };
    let traces = tokens
        .outer_iter()
        .into_par_iter()
        .map(|t| enc.forward_until(t, None, enc.num_layers() - 1, capture))
        .collect::<Result<Vec<_>>>()?;
    let (nv, n, d) = (raw.videos().len(), raw.token_count(), raw.dim());
    let mut builder = ActivationStore::builder(&cfg.model_id, enc.num_layers(), n, d, raw.videos().to_vec())
        .config_hash(cfg.encoder_hash());
    for l in 0..enc.num_layers() {
        let data = if keep_tokens {
            let mut t = ndarray::Array3::<f64>::zeros((nv, n, d));
            for (i, tr) in traces.iter().enumerate() {
                t.index_axis_mut(Axis(0), i)
                    .assign(tr.layer(l).and_then(|a| a.tokens.as_ref()).expect("captured"));
            }
            LayerData::from_tokens(t)?
        } else {
            let mut p = Array2::<f64>::zeros((nv, d));
            for (i, tr) in traces.iter().enumerate() {
                p.row_mut(i).assign(tr.pooled(l).expect("captured"));
            }
            LayerData::pooled_only(p)
        };
        builder = builder.layer(l as i32, data);
    }
    let store = builder.build()?;
    write_dump(&store, &run.layers())?;
    Ok(summarize_videos(store.videos(), n, d))
}

// ---------------------------------------------------------------- probe

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub layer: i32,
    pub accuracy: f64,
    pub std: f64,
    pub per_fold: Vec<f64>,
    pub flip_corrected: bool,
    pub converged: bool,
    pub iterations: usize,
    pub pool_size: usize,
    pub pca_components: Option<usize>,
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl ProbeRecord {
    /// Probe with the recorded full-space weights.
    pub fn to_probe(&self) -> Probe {
        Probe {
            weights: self.weights.clone().into(),
            intercept: self.intercept,
            pca: None,
            reduced_weights: None,
            reduced_intercept: 0.0,
            flip_corrected: self.flip_corrected,
            iterations: self.iterations,
            converged: self.converged,
            gradient_norm: f64::NAN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFile {
    pub config_hash: String,
    pub task: String,
    pub model_id: String,
    pub layers: Vec<ProbeRecord>,
    pub pez: PezResult,
}

impl ProbeFile {
    pub fn record(&self, layer: i32) -> Result<&ProbeRecord> {
        self.layers
            .iter()
            .find(|r| r.layer == layer)
            .ok_or_else(|| Error::Invalid(format!("no probe for layer {layer}")))
    }
}

#[derive(Serialize)]
struct ProbeCsvRow {
    layer: i32,
    accuracy: f64,
    std: f64,
    flip_corrected: bool,
    in_pez: bool,
}

fn load_layers(cfg: &RunConfig, dir: &Path) -> Result<ActivationStore> {
    let store = read_dump(dir)?;
    check_lineage("layer store", store.config_hash(), &cfg.encoder_hash())?;
    Ok(store)
}

fn probe_path(run: &RunDir, task: ProbeTask) -> PathBuf {
    run.probes().join(format!("{task}.json"))
}

/// Probes every layer of the store for `task` and finds the PEZ.
pub fn probe(cfg: &RunConfig, store_dir: &Path, run: &RunDir, task: ProbeTask) -> Result<ProbeFile> {
    cfg.validate()?;
    let store = load_layers(cfg, store_dir)?;
    let results = probe_sweep(&store, task, &cfg.sweep_config())?;
    let acc: Vec<(i32, f64)> = results.iter().map(|r| (r.layer, r.accuracy)).collect();
    let pez = find_pez(&acc, cfg.probe.epsilon, cfg.probe.top_k)?;
    let layers: Vec<ProbeRecord> = results
        .iter()
        .map(|r| ProbeRecord {
            layer: r.layer,
            accuracy: r.accuracy,
            std: r.cv.std,
            per_fold: r.cv.per_fold.clone(),
            flip_corrected: r.probe.flip_corrected,
            converged: r.probe.converged,
            iterations: r.probe.iterations,
            pool_size: r.pool_size,
            pca_components: r.probe.pca.as_ref().map(|p| p.k()),
            intercept: r.probe.intercept,
            weights: r.probe.weights.to_vec(),
        })
        .collect();
    let file = ProbeFile {
        config_hash: cfg.probe_hash(),
        task: task.to_string(),
        model_id: store.model_id().to_string(),
        layers,
        pez,
    };
    mkdir(&run.probes())?;
    for r in &file.layers {
        write_f32_file(&run.probes().join(format!("{task}_l{}.f32", r.layer)), &r.weights)?;
    }
    let csv_rows: Vec<ProbeCsvRow> = file
        .layers
        .iter()
        .map(|r| ProbeCsvRow {
            layer: r.layer,
            accuracy: r.accuracy,
            std: r.std,
            flip_corrected: r.flip_corrected,
            in_pez: file.pez.pez_layers.contains(&r.layer),
        })
        .collect();
    write_csv(&run.probes().join(format!("{task}.csv")), &csv_rows)?;
    write_json(&probe_path(run, task), &file)?;
    Ok(file)
}

fn load_probes(cfg: &RunConfig, run: &RunDir, task: ProbeTask) -> Result<ProbeFile> {
    let file: ProbeFile = read_json(&probe_path(run, task))?;
    check_lineage("probe results", Some(&file.config_hash), &cfg.probe_hash())?;
    Ok(file)
}

// ---------------------------------------------------------------- cav

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavRecord {
    pub name: String,
    pub layer: usize,
    pub scope: String,
    pub weight_norm: f64,
    pub source_accuracy: Option<f64>,
    pub direction: Vec<f64>,
}

impl CavRecord {
    fn from_cav(name: String, cav: &Cav) -> Self {
        CavRecord {
            name,
            layer: cav.layer,
            scope: cav.scope.to_string(),
            weight_norm: cav.weight_norm,
            source_accuracy: cav.source_accuracy,
            direction: cav.direction().to_vec(),
        }
    }

    pub fn to_cav(&self) -> Result<Cav> {
        let scope = match self.scope.as_str() {
            "all" => CavScope::All,
            "O1" => CavScope::Block(crate::actstore::Block::O1),
            "O2" => CavScope::Block(crate::actstore::Block::O2),
            "O3" => CavScope::Block(crate::actstore::Block::O3),
            other => return Err(Error::Invalid(format!("unknown CAV scope {other:?}"))),
        };
        let mut cav = Cav::new(self.layer, self.direction.clone().into(), scope)?;
        cav.weight_norm = self.weight_norm;
        cav.source_accuracy = self.source_accuracy;
        Ok(cav)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavFile {
    pub config_hash: String,
    /// Best PEZ layer, where steering is read out.
    pub readout_layer: usize,
    /// Plausibility CAVs at the top-k PEZ layers, best first.
    pub physics: Vec<CavRecord>,
    pub motion: CavRecord,
    pub blocks: Vec<CavRecord>,
}

fn to_layer(l: i32) -> Result<usize> {
    usize::try_from(l).map_err(|_| Error::Invalid(format!("cannot steer at raw layer {l}")))
}

/// Builds physics CAVs at the top-k PEZ layers, plus motion and per-block
/// CAVs at the best PEZ layer.
pub fn cav(cfg: &RunConfig, store_dir: &Path, run: &RunDir) -> Result<CavFile> {
    cfg.validate()?;
    let store = load_layers(cfg, store_dir)?;
    let probes = load_probes(cfg, run, ProbeTask::Plausibility)?;
    let sweep = cfg.sweep_config();
    let physics = probes
        .pez
        .top_k
        .iter()
        .map(|&l| {
            let rec = probes.record(l)?;
            let mut c = make_cav(&rec.to_probe(), to_layer(l)?, CavScope::All)?;
            c.source_accuracy = Some(rec.accuracy);
            Ok(CavRecord::from_cav(format!("physics_l{l}"), &c))
        })
        .collect::<Result<Vec<_>>>()?;
    let ls = physics[0].layer;
    let motion_res = crate::probekit::probe_layer(
        &store,
        ls as i32,
        ProbeTask::Motion,
        &sweep,
        crate::probekit::Basis::Auto,
    )?;
    let mut motion = make_cav(&motion_res.probe, ls, CavScope::All)?;
    motion.source_accuracy = Some(motion_res.accuracy);
    let blocks = make_block_cavs(&store, ls, &sweep)?
        .into_iter()
        .map(|(b, c)| CavRecord::from_cav(format!("{b}_l{ls}"), &c))
        .collect();
    let file = CavFile {
        config_hash: cfg.probe_hash(),
        readout_layer: ls,
        physics,
        motion: CavRecord::from_cav(format!("motion_l{ls}"), &motion),
        blocks,
    };
    mkdir(&run.cavs())?;
    for r in file.physics.iter().chain([&file.motion]).chain(&file.blocks) {
        write_f32_file(&run.cavs().join(format!("{}.f32", r.name)), &r.direction)?;
    }
    write_json(&run.cavs().join("cavs.json"), &file)?;
    Ok(file)
}

fn load_cavs(cfg: &RunConfig, run: &RunDir) -> Result<CavFile> {
    let file: CavFile = read_json(&run.cavs().join("cavs.json"))?;
    check_lineage("CAVs", Some(&file.config_hash), &cfg.probe_hash())?;
    Ok(file)
}

// ---------------------------------------------------------------- steering

struct SteeringContext {
    encoder: Encoder,
    raw: ActivationStore,
    test: Vec<usize>,
    probe: Probe,
    cavs: CavFile,
    readout_cav: Cav,
}

impl SteeringContext {
    fn load(cfg: &RunConfig, raw_dir: &Path, run: &RunDir) -> Result<Self> {
        cfg.validate()?;
        let raw = load_raw(cfg, raw_dir)?;
        let encoder = Encoder::new(cfg.encoder_config())?;
        let cavs = load_cavs(cfg, run)?;
        let probes = load_probes(cfg, run, ProbeTask::Plausibility)?;
        let probe = probes.record(cavs.readout_layer as i32)?.to_probe();
        check_dim("readout probe", probe.dim(), encoder.dim())?;
        let readout_cav = cavs.physics[0].to_cav()?;
        let test = raw.select(|v| v.split == Split::Test);
        if test.is_empty() {
            return Err(Error::Invalid("raw store has no test-split videos".into()));
        }
        Ok(SteeringContext {
            encoder,
            raw,
            test,
            probe,
            cavs,
            readout_cav,
        })
    }

    fn readout(&self) -> Readout<'_> {
        Readout {
            layer: self.cavs.readout_layer,
            probe: &self.probe,
            cav: &self.readout_cav,
        }
    }

    fn inputs(&self) -> Result<Vec<VideoInput<'_>>> {
        let tokens = self.raw.tokens(RAW_LAYER)?.expect("checked by load_raw");
        Ok(self
            .test
            .iter()
            .map(|&i| VideoInput {
                id: &self.raw.videos()[i].id,
                tokens: tokens.index_axis_move(Axis(0), i),
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    pub config_hash: String,
    pub readout_layer: usize,
    pub inject_layers: Vec<usize>,
    pub rows: Vec<SteeringMetrics>,
}

#[derive(Serialize)]
struct SweepCsvRow {
    alpha: f64,
    flip_rate: f64,
    mean_p_impossible: f64,
    delta_p: f64,
    directional_purity: f64,
    representation_drift: f64,
    cosine_shift: f64,
    flips: usize,
    videos: usize,
}

/// Alpha sweep over the test split.
pub fn steer(cfg: &RunConfig, raw_dir: &Path, run: &RunDir) -> Result<SweepFile> {
    let ctx = SteeringContext::load(cfg, raw_dir, run)?;
    let inject: Vec<Cav> = match cfg.sweep.inject {
        InjectMode::Single => vec![ctx.readout_cav.clone()],
        InjectMode::TopK => ctx.cavs.physics.iter().map(|r| r.to_cav()).collect::<Result<_>>()?,
    };
    let inputs = ctx.inputs()?;
    let sweep = alpha_sweep(&ctx.encoder, ctx.readout(), &inject, &inputs, &cfg.sweep.alphas)?;
    let file = SweepFile {
        config_hash: cfg.run_hash(),
        readout_layer: ctx.cavs.readout_layer,
        inject_layers: inject.iter().map(|c| c.layer).collect(),
        rows: sweep.rows.clone(),
    };
    mkdir(&run.reports())?;
    let csv_rows: Vec<SweepCsvRow> = sweep
        .rows
        .iter()
        .map(|r| SweepCsvRow {
            alpha: r.alpha,
            flip_rate: r.flip_rate,
            mean_p_impossible: r.mean_score,
            delta_p: r.score_delta,
            directional_purity: r.directional_purity,
            representation_drift: r.representation_drift,
            cosine_shift: r.cosine_shift,
            flips: r.flips,
            videos: r.videos,
        })
        .collect();
    write_csv(&run.reports().join("alpha_sweep.csv"), &csv_rows)?;
    write_csv(&run.reports().join("steer_videos.csv"), &sweep.videos)?;
    write_json(&run.reports().join("alpha_sweep.json"), &file)?;
    Ok(file)
}

/// Reads the per-video rows written by [`steer`].
pub fn read_steer_videos(run: &RunDir) -> Result<Vec<VideoSteering>> {
    let path = run.reports().join("steer_videos.csv");
    let mut r = csv::Reader::from_path(&path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&path, io),
        other => Error::Invalid(format!("{other:?}")),
    })?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationFile {
    pub config_hash: String,
    pub readout_layer: usize,
    pub alpha: f64,
    pub rows: Vec<AblationRow>,
}

/// Injects the readout CAV at each layer in turn.
pub fn ablate(cfg: &RunConfig, raw_dir: &Path, run: &RunDir) -> Result<AblationFile> {
    let ctx = SteeringContext::load(cfg, raw_dir, run)?;
    let inputs = ctx.inputs()?;
    let rows = layer_ablation(&ctx.encoder, ctx.readout(), &inputs, cfg.sweep.ablation_alpha)?;
    let file = AblationFile {
        config_hash: cfg.run_hash(),
        readout_layer: ctx.cavs.readout_layer,
        alpha: cfg.sweep.ablation_alpha,
        rows,
    };
    mkdir(&run.reports())?;
    write_csv(&run.reports().join("layer_ablation.csv"), &file.rows)?;
    write_json(&run.reports().join("layer_ablation.json"), &file)?;
    Ok(file)
}

// ---------------------------------------------------------------- angles

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnglesFile {
    pub config_hash: String,
    pub layer: usize,
    pub report: OrthogonalityReport,
}

#[derive(Serialize)]
struct OrthoCsvRow<'a> {
    a: &'a str,
    b: &'a str,
    degrees: f64,
    std: Option<f64>,
    draws: Option<usize>,
}

/// Physics-vs-motion, physics-vs-random and block-pair angles.
pub fn angles(cfg: &RunConfig, run: &RunDir) -> Result<AnglesFile> {
    cfg.validate()?;
    let cavs = load_cavs(cfg, run)?;
    let physics = ndarray::Array1::from(cavs.physics[0].direction.clone());
    let motion = ndarray::Array1::from(cavs.motion.direction.clone());
    let blocks: Vec<(String, ndarray::Array1<f64>)> = cavs
        .blocks
        .iter()
        .map(|r| (r.scope.clone(), r.direction.clone().into()))
        .collect();
    let views: Vec<(String, ndarray::ArrayView1<f64>)> = blocks.iter().map(|(n, v)| (n.clone(), v.view())).collect();
    let report = orthogonality_report(
        physics.view(),
        Some(motion.view()),
        &views,
        cfg.sweep.random_draws,
        derive_seed(cfg.seed, "angles"),
    )?;
    let file = AnglesFile {
        config_hash: cfg.run_hash(),
        layer: cavs.readout_layer,
        report,
    };
    mkdir(&run.reports())?;
    let block_rows: Vec<&AnglePair> = file
        .report
        .block_pairs
        .iter()
        .chain(&file.report.physics_blocks)
        .collect();
    write_csv(&run.reports().join("block_angles.csv"), &block_rows)?;
    let r = &file.report;
    let mut ortho = vec![OrthoCsvRow {
        a: "physics",
        b: "random",
        degrees: r.physics_random.mean,
        std: Some(r.physics_random.std),
        draws: Some(r.physics_random.draws),
    }];
    if let Some(m) = r.physics_motion {
        ortho.insert(
            0,
            OrthoCsvRow {
                a: "physics",
                b: "motion",
                degrees: m,
                std: None,
                draws: None,
            },
        );
    }
    write_csv(&run.reports().join("orthogonality.csv"), &ortho)?;
    write_json(&run.reports().join("angles.json"), &file)?;
    Ok(file)
}

// ---------------------------------------------------------------- project

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFile {
    pub config_hash: String,
    pub layer: usize,
    pub alpha: f64,
    pub explained_variance_ratio: Vec<f64>,
    pub videos: usize,
}

/// 2D PCA of readout-layer pooled features of the test split, with the
/// endpoints of steering each video by the projection alpha.
pub fn project(cfg: &RunConfig, raw_dir: &Path, run: &RunDir) -> Result<(ProjectionFile, Vec<ProjectionRow>)> {
    let ctx = SteeringContext::load(cfg, raw_dir, run)?;
    let ls = ctx.cavs.readout_layer;
    let alpha = cfg.sweep.projection_alpha;
    let plan = build_plan(std::slice::from_ref(&ctx.readout_cav), alpha)?;
    let inputs = ctx.inputs()?;
    let pairs = inputs
        .par_iter()
        .map(|v| {
            let hidden = ctx.encoder.hidden_at(v.tokens, ls)?;
            let base = ctx.encoder.resume(hidden.view(), ls, None, ls, Capture::Pooled)?;
            let steered = ctx
                .encoder
                .resume(hidden.view(), ls, Some(&plan), ls, Capture::Pooled)?;
            Ok((
                base.pooled(ls).expect("ls").clone(),
                steered.pooled(ls).expect("ls").clone(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let d = ctx.encoder.dim();
    let base = Array2::from_shape_fn((pairs.len(), d), |(i, j)| pairs[i].0[j]);
    let steered = Array2::from_shape_fn((pairs.len(), d), |(i, j)| pairs[i].1[j]);
    let metas: Vec<&VideoMeta> = ctx.test.iter().map(|&i| &ctx.raw.videos()[i]).collect();
    let (pca, rows) = project2d(&metas, base.view(), steered.view())?;
    let file = ProjectionFile {
        config_hash: cfg.run_hash(),
        layer: ls,
        alpha,
        explained_variance_ratio: pca.explained_variance_ratio().to_vec(),
        videos: rows.len(),
    };
    mkdir(&run.reports())?;
    write_csv(&run.reports().join("projection2d.csv"), &rows)?;
    write_json(&run.reports().join("projection.json"), &file)?;
    Ok((file, rows))
}

// ---------------------------------------------------------------- report

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hashes {
    pub dataset: String,
    pub encoder: String,
    pub probe: String,
    pub run: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub root: u64,
    pub split: u64,
    pub encoder_init: u64,
    pub probe: u64,
    pub angles: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub layer: i32,
    pub accuracy: f64,
    pub std: f64,
    pub flip_corrected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavSummary {
    pub name: String,
    pub layer: usize,
    pub scope: String,
    pub weight_norm: f64,
    pub source_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub hashes: Hashes,
    pub seeds: Seeds,
    pub dataset: DatasetSummary,
    pub probes: Vec<ProbeSummary>,
    pub pez: PezResult,
    pub cavs: Vec<CavSummary>,
    pub alpha_sweep: SweepFile,
    pub layer_ablation: AblationFile,
    pub angles: AnglesFile,
    pub projection: ProjectionFile,
}

/// Bundles every stage's output into `<run>/report.json`.
pub fn report(cfg: &RunConfig, raw_dir: &Path, run: &RunDir) -> Result<Report> {
    cfg.validate()?;
    let raw = read_dump(raw_dir)?;
    check_lineage("raw store", raw.config_hash(), &cfg.dataset_hash())?;
    let probes = load_probes(cfg, run, ProbeTask::Plausibility)?;
    let cavs = load_cavs(cfg, run)?;
    let rep = run.reports();
    let alpha_sweep: SweepFile = read_json(&rep.join("alpha_sweep.json"))?;
    let layer_ablation: AblationFile = read_json(&rep.join("layer_ablation.json"))?;
    let angles: AnglesFile = read_json(&rep.join("angles.json"))?;
    let projection: ProjectionFile = read_json(&rep.join("projection.json"))?;
    let run_hash = cfg.run_hash();
    for (what, h) in [
        ("alpha sweep", &alpha_sweep.config_hash),
        ("layer ablation", &layer_ablation.config_hash),
        ("angles", &angles.config_hash),
        ("projection", &projection.config_hash),
    ] {
        check_lineage(what, Some(h), &run_hash)?;
    }
    let mut config = cfg.clone();
    config.threads = None;
    let report = Report {
        config,
        hashes: Hashes {
            dataset: cfg.dataset_hash(),
            encoder: cfg.encoder_hash(),
            probe: cfg.probe_hash(),
            run: run_hash,
        },
        seeds: Seeds {
            root: cfg.seed,
            split: derive_seed(cfg.seed, "split"),
            encoder_init: cfg.encoder_config().init_seed,
            probe: cfg.sweep_config().seed,
            angles: derive_seed(cfg.seed, "angles"),
        },
        dataset: summarize_videos(raw.videos(), raw.token_count(), raw.dim()),
        probes: probes
            .layers
            .iter()
            .map(|r| ProbeSummary {
                layer: r.layer,
                accuracy: r.accuracy,
                std: r.std,
                flip_corrected: r.flip_corrected,
            })
            .collect(),
        pez: probes.pez,
        cavs: cavs
            .physics
            .iter()
            .chain([&cavs.motion])
            .chain(&cavs.blocks)
            .map(|r| CavSummary {
                name: r.name.clone(),
                layer: r.layer,
                scope: r.scope.clone(),
                weight_norm: r.weight_norm,
                source_accuracy: r.source_accuracy,
            })
            .collect(),
        alpha_sweep,
        layer_ablation,
        angles,
        projection,
    };
    write_json(&run.report(), &report)?;
    Ok(report)
}

/// Every stage in order, chained through the run directory.
pub fn all(cfg: &RunConfig, run: &RunDir) -> Result<Report> {
    cfg.validate()?;
    mkdir(run.root())?;
    cfg.save(&run.config())?;
    gen(cfg, run)?;
    encode(cfg, &run.raw(), run, false)?;
    probe(cfg, &run.layers(), run, ProbeTask::Plausibility)?;
    cav(cfg, &run.layers(), run)?;
    steer(cfg, &run.raw(), run)?;
    ablate(cfg, &run.raw(), run)?;
    angles(cfg, run)?;
    project(cfg, &run.raw(), run)?;
    report(cfg, &run.raw(), run)
}
