//! Train one model, then break a cohort's windowed predictions into
//! Formalin / Control / SNI percentages.
//!
//! Usage: `cargo run --release --example cohort_analysis -- [workdir]`

use std::path::PathBuf;

use mpain::pipeline::{
    cmd_cohort, cmd_featurize, cmd_preprocess, cmd_synth, cmd_train, ClassMode, RunConfig,
    SynthConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let workdir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "cohort_work".into()),
    );
    let mut cfg = RunConfig {
        workdir: workdir.clone(),
        classes: ClassMode::Three,
        window: 4,
        stride: 2,
        synth: SynthConfig {
            videos_per_class: 12,
            ..SynthConfig::default()
        },
        ..RunConfig::default()
    };
    let manifest = cmd_synth(&cfg)?;
    cfg.manifest = Some(manifest.clone());
    cmd_preprocess(&cfg)?;
    cmd_featurize(&cfg)?;
    let ckpt = cmd_train(&cfg)?;
    println!("trained: best epoch {}", ckpt.meta.epoch);

    // treat each synthetic class as a treatment cohort
    let synth_dir = manifest.parent().unwrap();
    let mut list = String::from("video_path,cohort\n");
    for (c, cohort) in ["no_pain", "inflammatory", "neuropathic"]
        .iter()
        .enumerate()
    {
        for j in 0..cfg.synth.videos_per_class {
            list += &format!("videos/{c:02}_{cohort}_{j:03}.mpvr,{cohort}\n");
        }
    }
    let list_path = synth_dir.join("cohorts.csv");
    std::fs::write(&list_path, list)?;

    print!(
        "{}",
        cmd_cohort(&cfg, &workdir.join("train/model.mpck"), &list_path)?
    );
    Ok(())
}
