//! `mcsep` — command-line driver for the separation pipeline.
//!
//! Errors are reported on stderr as a single tab-separated line,
//! `error<TAB><kind><TAB><message>`, with exit status 1.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcsep::experiment::{
    datagen, eval_model, load_curve, mixture_eval, oracle_eval, report_from_scores, ExperimentConfig, Manifest,
    Workspace,
};
use mcsep::Error;

#[derive(Parser, Debug)]
#[command(name = "mcsep", version, about = "Multi-channel speech separation experiments")]
struct Cli {
    /// Directory all relative paths resolve against.
    #[arg(long, default_value = ".", global = true)]
    workdir: PathBuf,

    /// `key = value` config file (relative to the workdir).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Config override, repeatable; applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate scenes and write mixtures, references and a manifest.
    Datagen {
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Separate with oracle masks and score against the references.
    OracleEval {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated mask kinds (ibm, iam, irm, ipsm).
        #[arg(long)]
        masks: Option<String>,
    },
    /// Train a mask estimator on a manifest.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// single, ipd or ipd-angle.
        #[arg(long)]
        features: Option<String>,
        /// upit-sisnr, upit-mse or tgt-sisnr.
        #[arg(long)]
        loss: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Score a trained estimator (or the unprocessed mixture).
    Eval {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        features: Option<String>,
        /// Score the unprocessed mixture instead of a checkpoint.
        #[arg(long)]
        mixture: bool,
    },
    /// Aggregate per-utterance score files into a report.
    Report {
        #[arg(required = true)]
        scores: Vec<PathBuf>,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
}

fn set_opt(cfg: &mut ExperimentConfig, key: &str, value: Option<String>) -> mcsep::Result<()> {
    match value {
        Some(v) => cfg.set(key, &v),
        None => Ok(()),
    }
}

fn load_config(cli: &Cli, ws: &Workspace) -> mcsep::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(&ws.resolve(p))?,
        None => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("override {o:?} is not KEY=VALUE")))?;
        cfg.set(k, v)?;
    }
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    match &cli.command {
        Command::Datagen { count, seed, manifest } => {
            set_opt(&mut cfg, "count", count.map(|v| v.to_string()))?;
            set_opt(&mut cfg, "seed", seed.map(|v| v.to_string()))?;
            set_opt(&mut cfg, "manifest", path(manifest))?;
        }
        Command::OracleEval { manifest, masks } => {
            set_opt(&mut cfg, "manifest", path(manifest))?;
            set_opt(&mut cfg, "masks", masks.clone())?;
        }
        Command::Train { manifest, checkpoint, features, loss, steps } => {
            set_opt(&mut cfg, "manifest", path(manifest))?;
            set_opt(&mut cfg, "checkpoint", path(checkpoint))?;
            set_opt(&mut cfg, "feature_mode", features.clone())?;
            set_opt(&mut cfg, "loss", loss.clone())?;
            set_opt(&mut cfg, "steps", steps.map(|v| v.to_string()))?;
        }
        Command::Eval { manifest, checkpoint, features, .. } => {
            set_opt(&mut cfg, "manifest", path(manifest))?;
            set_opt(&mut cfg, "checkpoint", path(checkpoint))?;
            set_opt(&mut cfg, "feature_mode", features.clone())?;
        }
        Command::Report { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> mcsep::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let ws = Workspace::new(&cli.workdir)?;
    let cfg = load_config(&cli, &ws)?;
    let manifest = || Manifest::load(&ws.resolve(&cfg.manifest));
    match &cli.command {
        Command::Datagen { .. } => {
            let m = datagen(&ws, &cfg)?;
            println!("wrote {} utterances to {}", m.len(), ws.resolve(&cfg.manifest).display());
        }
        Command::OracleEval { .. } => {
            for eval in oracle_eval(&ws, &cfg, &manifest()?)? {
                println!("== {} ==\n{}", eval.name, eval.report);
            }
        }
        Command::Train { .. } => {
            mcsep::experiment::train_model(&ws, &cfg, &manifest()?)?;
            let curve = load_curve(&ws, &cfg.checkpoint)?;
            println!(
                "trained {} steps: loss {} -> {}; checkpoint {}",
                curve.points.len(),
                curve.first().unwrap_or(f64::NAN),
                curve.last().unwrap_or(f64::NAN),
                ws.resolve(&cfg.checkpoint).display()
            );
        }
        Command::Eval { mixture, .. } => {
            let eval = if *mixture { mixture_eval(&ws, &cfg, &manifest()?)? } else { eval_model(&ws, &cfg, &manifest()?)? };
            println!("== {} ==\n{}", eval.name, eval.report);
        }
        Command::Report { scores, json } => {
            let paths: Vec<PathBuf> = scores.iter().map(|p| ws.resolve(p)).collect();
            let report = report_from_scores(&paths)?;
            if *json {
                println!("{}", report.to_json());
            } else {
                print!("{report}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{}\t{}", e.kind(), msg);
            ExitCode::FAILURE
        }
    }
}
