//! The on-disk pipeline: synth, preprocess, featurize, 8-fold crossval, report.
//!
//! Usage: `cargo run --release --example crossval_pipeline -- [workdir] [videos_per_class]`
//!
//! Same steps as `mpain synth && mpain preprocess && mpain featurize && mpain crossval`.

use std::path::PathBuf;

use mpain::pipeline::{
    cmd_crossval, cmd_featurize, cmd_preprocess, cmd_report, cmd_synth, ClassMode, RunConfig,
    SynthConfig,
};

fn main() -> mpain::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = RunConfig {
        workdir: PathBuf::from(args.first().cloned().unwrap_or_else(|| "work".into())),
        classes: ClassMode::Three,
        synth: SynthConfig {
            videos_per_class: args.get(1).and_then(|s| s.parse().ok()).unwrap_or(16),
            ..SynthConfig::default()
        },
        ..RunConfig::default()
    };

    cfg.manifest = Some(cmd_synth(&cfg)?);
    let pre = cmd_preprocess(&cfg)?;
    println!(
        "preprocessed {} videos ({} failed)",
        pre.entries.len(),
        pre.failures()
    );
    let meta = cmd_featurize(&cfg)?;
    println!("featurized {} videos", meta.videos.len());

    let summary = cmd_crossval(&cfg)?;
    println!(
        "3-class accuracy {:.4}, macro F1 {:.4}",
        summary.accuracy_3, summary.macro_f1_3
    );
    print!("{}", cmd_report(&cfg)?);
    println!("bundle: {}", cfg.crossval_dir().display());
    Ok(())
}
