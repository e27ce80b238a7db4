// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end over [`crate::pipeline`].
//!
//! Settings resolve in order: defaults, `<out>/run_config.json` when
//! present, `--config`, then individual flags. The resolved config is saved
//! back to `<out>/run_config.json`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{InjectMode, RunConfig};
use crate::error::{Error, Result};
use crate::pipeline::{self, RunDir};
use crate::probekit::{PcaPolicy, ProbeTask};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "physteer",
    version,
    about = "Probe, extract CAVs from and steer a frozen video encoder"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic dataset into <out>/raw
    Gen,
    /// Run the encoder over a raw store into <out>/layers
    Encode,
    /// Layer-wise probes and PEZ into <out>/probes
    Probe,
    /// Physics, motion and per-block CAVs into <out>/cavs
    Cav,
    /// Alpha sweep on the test split
    Steer,
    /// Inject the readout CAV at every layer in turn
    Ablate,
    /// Physics/motion/random/block angles
    Angles,
    /// 2D PCA projection with steering arrows
    Project,
    /// Bundle every stage into <out>/report.json
    Report,
    /// Run every stage
    All,
}

#[derive(Debug, Args)]
pub struct Opts {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory
    #[arg(long, global = true, default_value = "run")]
    pub out: PathBuf,
    /// Input store (defaults to the stage's input inside <out>)
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// JSON run config
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated alpha list
    #[arg(long, global = true, allow_hyphen_values = true, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Single alpha for `steer`, `ablate` or `project`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub topk: Option<usize>,
    /// `<k>` (PCA when n < 2D), `always:<k>` or `off`
    #[arg(long, global = true)]
    pub pca: Option<String>,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub pairs_per_block: Option<usize>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub frames: Option<usize>,
    #[arg(long, global = true)]
    pub noise: Option<f64>,
    /// plausibility, motion or plausibility-O1/O2/O3
    #[arg(long, global = true, default_value = "plausibility")]
    pub task: String,
    /// Alpha-sweep injection: single or topk
    #[arg(long, global = true)]
    pub inject: Option<String>,
    /// Also write token tensors when encoding
    #[arg(long, global = true)]
    pub tokens: bool,
}

fn parse_pca(s: &str) -> Result<PcaPolicy> {
    let bad = || Error::Config(format!("bad --pca value {s:?}"));
    match s {
        "off" | "never" | "0" => Ok(PcaPolicy::Never),
        _ => match s.strip_prefix("always:") {
            Some(k) => Ok(PcaPolicy::Always {
                k: k.parse().map_err(|_| bad())?,
            }),
            None => Ok(PcaPolicy::Auto {
                k: s.parse().map_err(|_| bad())?,
            }),
        },
    }
}

/// Resolves the run config for `command`.
pub fn resolve_config(command: &Command, opts: &Opts) -> Result<RunConfig> {
    let saved = RunDir::new(&opts.out).config();
    let mut cfg = match &opts.config {
        Some(path) => RunConfig::load(path)?,
        None if saved.exists() => RunConfig::load(&saved)?,
        None => RunConfig::default(),
    };
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(a) = &opts.alphas {
        cfg.sweep.alphas = a.clone();
    }
    if let Some(a) = opts.alpha {
        match command {
            Command::Ablate => cfg.sweep.ablation_alpha = a,
            Command::Project => cfg.sweep.projection_alpha = a,
            _ => cfg.sweep.alphas = vec![a],
        }
    }
    if let Some(e) = opts.eps {
        cfg.probe.epsilon = e;
    }
    if let Some(k) = opts.topk {
        cfg.probe.top_k = k;
    }
    if let Some(p) = &opts.pca {
        cfg.probe.pca = parse_pca(p)?;
    }
    if let Some(f) = opts.folds {
        cfg.probe.folds = f;
    }
    if let Some(t) = opts.threads {
        cfg.threads = Some(t);
    }
    if let Some(p) = opts.pairs_per_block {
        cfg.pairs_per_block = p;
    }
    if let Some(g) = opts.grid {
        cfg.scene.grid = g;
    }
    if let Some(f) = opts.frames {
        cfg.scene.frames = f;
    }
    if let Some(n) = opts.noise {
        cfg.scene.noise_sigma = n;
    }
    if let Some(m) = &opts.inject {
        cfg.sweep.inject = match m.as_str() {
            "single" => InjectMode::Single,
            "topk" => InjectMode::TopK,
            other => return Err(Error::Config(format!("bad --inject value {other:?}"))),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_VALIDATION
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let opts = &cli.opts;
    let cfg = resolve_config(&cli.command, opts)?;
    if let Some(n) = cfg.threads {
        // a global pool can only be installed once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let run = RunDir::new(&opts.out);
    std::fs::create_dir_all(run.root()).map_err(|e| Error::Io {
        path: run.root().to_path_buf(),
        source: e,
    })?;
    cfg.save(&run.config())?;
    let store = |default: PathBuf| opts.store.clone().unwrap_or(default);
    match cli.command {
        Command::Gen => {
            let s = pipeline::gen(&cfg, &run)?;
            println!(
                "wrote {} videos ({} train / {} val / {} test) to {}",
                s.videos,
                s.train,
                s.val,
                s.test,
                run.raw().display()
            );
        }
        Command::Encode => {
            pipeline::encode(&cfg, &store(run.raw()), &run, opts.tokens)?;
            println!("wrote {} layers to {}", cfg.encoder.layers, run.layers().display());
        }
        Command::Probe => {
            let task: ProbeTask = opts.task.parse()?;
            let f = pipeline::probe(&cfg, &store(run.layers()), &run, task)?;
            for r in &f.layers {
                let mark = if f.pez.pez_layers.contains(&r.layer) { " *" } else { "" };
                println!("layer {:>2}  acc {:.4} ± {:.4}{mark}", r.layer, r.accuracy, r.std);
            }
            println!("PEZ {:?}, top-{} {:?}", f.pez.pez_layers, cfg.probe.top_k, f.pez.top_k);
        }
        Command::Cav => {
            let f = pipeline::cav(&cfg, &store(run.layers()), &run)?;
            println!("readout layer {}, {} physics CAV(s)", f.readout_layer, f.physics.len());
        }
        Command::Steer => {
            let f = pipeline::steer(&cfg, &store(run.raw()), &run)?;
            println!("alpha      FR     P(imp)   dP       DP      RD      cos");
            for r in &f.rows {
                println!(
                    "{:>6.1}  {:.3}  {:.4}  {:+.4}  {:+.4}  {:.3}  {:+.4}",
                    r.alpha,
                    r.flip_rate,
                    r.mean_score,
                    r.score_delta,
                    r.directional_purity,
                    r.representation_drift,
                    r.cosine_shift
                );
            }
        }
        Command::Ablate => {
            let f = pipeline::ablate(&cfg, &store(run.raw()), &run)?;
            for r in &f.rows {
                println!(
                    "inject {:>2}  FR {:.3}  DP {:+.4}",
                    r.layer, r.flip_rate, r.directional_purity
                );
            }
        }
        Command::Angles => {
            let f = pipeline::angles(&cfg, &run)?;
            if let Some(m) = f.report.physics_motion {
                println!("physics vs motion  {m:.2}°");
            }
            let r = &f.report.physics_random;
            println!("physics vs random  {:.2}° ± {:.2}° ({} draws)", r.mean, r.std, r.draws);
            for p in &f.report.block_pairs {
                println!("{} vs {}  {:.2}°", p.a, p.b, p.degrees);
            }
        }
        Command::Project => {
            let (f, _) = pipeline::project(&cfg, &store(run.raw()), &run)?;
            println!("projected {} videos at layer {}", f.videos, f.layer);
        }
        Command::Report => {
            pipeline::report(&cfg, &store(run.raw()), &run)?;
            println!("wrote {}", run.report().display());
        }
        Command::All => {
            pipeline::all(&cfg, &run)?;
            println!("wrote {}", run.report().display());
        }
    }
    Ok(())
}
