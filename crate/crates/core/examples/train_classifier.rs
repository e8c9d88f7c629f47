//! Trains the SSM classifier on in-memory synthetic sequences and saves a checkpoint.
//!
//! Usage: `cargo run --release --example train_classifier -- [videos_per_class] [checkpoint]`

use mpain::pipeline::{clip_sequence, featurize_video, FeatureOptions};
use mpain::ssm::{mix_seed, predict, train, ModelConfig, Sample, TemporalPooling, TrainConfig};
use mpain::synth::{default_specs, generate_video, SynthParams};

fn main() -> mpain::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let per_class: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(8);
    let out = args.get(1).cloned().unwrap_or_else(|| "model.mpck".into());

    let params = SynthParams::default();
    let mut train_set = Vec::new();
    let mut val_set = Vec::new();
    for (label, spec) in default_specs().iter().enumerate() {
        for j in 0..per_class {
            let video = generate_video(spec, &params, mix_seed(&[1, label as u64, j as u64]))?;
            let grids = featurize_video(&video, &FeatureOptions::default())?;
            let sample = Sample {
                seq: clip_sequence(&grids, TemporalPooling::Mean)?,
                label,
            };
            if j % 4 == 0 {
                val_set.push(sample)
            } else {
                train_set.push(sample)
            }
        }
    }

    let model = ModelConfig::desk(4, 3);
    let cfg = TrainConfig {
        max_epochs: 60,
        ..TrainConfig::default()
    };
    let outcome = train(&model, &train_set, &val_set, &cfg)?;
    for e in outcome.log.iter().step_by(10) {
        println!(
            "epoch {:>3}: train {:.4}  val {:.4}  lr {:.1e}",
            e.epoch, e.train_loss, e.val_loss, e.lr
        );
    }
    let ckpt = &outcome.checkpoint;
    let correct = val_set
        .iter()
        .filter(|s| predict(&ckpt.params, &s.seq).0 == s.label)
        .count();
    println!(
        "best epoch {} (val loss {:.4}), validation accuracy {}/{}",
        ckpt.meta.epoch,
        ckpt.meta.best_val_loss.unwrap_or(f64::NAN),
        correct,
        val_set.len()
    );
    ckpt.save(&out)?;
    println!("saved {out}");
    Ok(())
}
