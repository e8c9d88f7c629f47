use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpain::pipeline::{self, ClassMode, PreprocessStatus, RunConfig};

#[derive(Parser)]
#[command(
    name = "mpain",
    version,
    about = "Pose-free pain-state classification from fixed-camera videos"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset manifest or cohort list.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Keep only the strongest 3x3 window of the feature grid.
    #[arg(long, global = true, overrides_with = "no_mask")]
    mask: bool,
    #[arg(long, global = true, overrides_with = "mask")]
    no_mask: bool,
    /// 15, 3 or collapse.
    #[arg(long, global = true)]
    classes: Option<ClassMode>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cohort prediction window, in clips.
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    stride: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Median background and foreground video per manifest entry.
    Preprocess,
    /// Per-clip feature grids from the foreground videos.
    Featurize,
    /// Train one classifier on the manifest.
    Train,
    /// k-fold cross-validation with the full report bundle.
    Crossval,
    /// Windowed 3-class breakdown per treatment cohort.
    Cohort {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV with video_path,cohort columns.
        #[arg(long)]
        cohort: PathBuf,
    },
    /// Generate a synthetic dataset under <workdir>/synth.
    Synth {
        #[arg(long)]
        videos_per_class: Option<usize>,
        #[arg(long)]
        distractor: bool,
    },
    /// Summarize every crossval bundle in the work directory.
    Report,
}

fn build_config(c: &Common) -> mpain::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &c.manifest {
        cfg.manifest = Some(m.clone());
    }
    if let Some(w) = &c.workdir {
        cfg.workdir = w.clone();
    }
    if c.mask {
        cfg.mask = true;
    }
    if c.no_mask {
        cfg.mask = false;
    }
    if let Some(k) = c.classes {
        cfg.classes = k;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = c.window {
        cfg.window = w;
    }
    if let Some(s) = c.stride {
        cfg.stride = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> mpain::Result<()> {
    let mut cfg = build_config(&cli.common)?;
    match cli.command {
        Command::Preprocess => {
            let r = pipeline::cmd_preprocess(&cfg)?;
            for (id, s) in &r.entries {
                if let PreprocessStatus::Failed(msg) = s {
                    eprintln!("{id}: {msg}");
                }
            }
            println!(
                "computed {}, skipped {}, failed {}",
                r.count(|s| *s == PreprocessStatus::Computed),
                r.count(|s| *s == PreprocessStatus::Skipped),
                r.failures()
            );
            if r.failures() > 0 {
                return Err(mpain::Error::Dataset(format!(
                    "{} video(s) failed",
                    r.failures()
                )));
            }
        }
        Command::Featurize => {
            let meta = pipeline::cmd_featurize(&cfg)?;
            println!(
                "{} videos featurized into {}",
                meta.videos.len(),
                cfg.feature_dir().display()
            );
        }
        Command::Train => {
            let ckpt = pipeline::cmd_train(&cfg)?;
            println!(
                "best epoch {} (val loss {:.4}) -> {}",
                ckpt.meta.epoch,
                ckpt.meta.best_val_loss.unwrap_or(f64::NAN),
                cfg.workdir.join("train/model.mpck").display()
            );
        }
        Command::Crossval => {
            let s = pipeline::cmd_crossval(&cfg)?;
            if let (Some(a), Some(f)) = (s.accuracy_15, s.macro_f1_15) {
                println!("15-class: accuracy {:.4}, macro F1 {:.4}", a, f);
            }
            println!(
                "3-class: accuracy {:.4}, macro F1 {:.4}",
                s.accuracy_3, s.macro_f1_3
            );
            println!("report: {}", cfg.crossval_dir().display());
        }
        Command::Cohort { checkpoint, cohort } => {
            print!("{}", pipeline::cmd_cohort(&cfg, &checkpoint, &cohort)?);
        }
        Command::Synth {
            videos_per_class,
            distractor,
        } => {
            if let Some(n) = videos_per_class {
                cfg.synth.videos_per_class = n;
            }
            cfg.synth.distractor |= distractor;
            println!("{}", pipeline::cmd_synth(&cfg)?.display());
        }
        Command::Report => print!("{}", pipeline::cmd_report(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
