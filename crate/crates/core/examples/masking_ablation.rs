//! Synthetic three-class experiment with and without the feature-space mask.
//!
//! Usage: `cargo run --release --example masking_ablation -- [videos_per_class] [seeds] [distractor:0|1]`

use std::time::Instant;

use mpain::eval::{make_folds, run_crossval, FoldOptions};
use mpain::pipeline::{clip_sequence, featurize_video, FeatureOptions};
use mpain::ssm::{mix_seed, ModelConfig, Sample, TemporalPooling, TrainConfig};
use mpain::synth::{default_specs, generate_video, DistractorSpec, SynthParams};

fn main() -> mpain::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let per_class: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(24);
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let distractor = args.get(2).map(|s| s == "1").unwrap_or(true);
    let params = SynthParams::default();
    let mut band = DistractorSpec::top_band(params.width, params.height);
    let num = |i: usize| args.get(i).and_then(|s| s.parse::<f64>().ok());
    if let Some(a) = num(3) {
        band.amplitude = a;
    }
    if let Some(p) = num(4) {
        band.period_s = p;
    }
    if let Some(s) = num(5) {
        band.period_spread = s;
    }
    if let Some(m) = num(6) {
        band.min_scale = m;
    }
    if let Some(rows) = num(7) {
        band.region[3] = (rows as usize) * params.height / 7;
    }
    println!("{band:?}");
    let specs: Vec<_> = default_specs()
        .into_iter()
        .map(|s| s.with_distractor(distractor.then(|| band.clone())))
        .collect();

    for seed in 0..seeds {
        let start = Instant::now();
        let mut masked = Vec::new();
        let mut unmasked = Vec::new();
        for (label, spec) in specs.iter().enumerate() {
            for j in 0..per_class {
                let video =
                    generate_video(spec, &params, mix_seed(&[seed, label as u64, j as u64]))?;
                for (mask, out) in [(true, &mut masked), (false, &mut unmasked)] {
                    let opts = FeatureOptions {
                        mask,
                        ..FeatureOptions::default()
                    };
                    let grids = featurize_video(&video, &opts)?;
                    out.push(Sample {
                        seq: clip_sequence(&grids, TemporalPooling::Mean)?,
                        label,
                    });
                }
            }
        }
        let labels: Vec<usize> = masked.iter().map(|s| s.label).collect();
        let folds = make_folds(&labels, None, 8, seed, FoldOptions::default())?;
        let model = ModelConfig::desk(4, 3);
        let train = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        for (name, samples) in [("masked", &masked), ("unmasked", &unmasked)] {
            let r = run_crossval(samples, &folds, &model, &train)?;
            let m = r.metrics(3)?;
            println!(
                "seed {seed} {name:>8}: accuracy {:.4} macro F1 {:.4} ({:.1?})",
                m.accuracy,
                m.macro_f1,
                start.elapsed()
            );
        }
    }
    Ok(())
}
