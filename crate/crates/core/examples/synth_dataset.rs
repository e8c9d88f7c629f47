//! Writes a labeled synthetic dataset (videos plus manifest.csv).
//!
//! Usage: `cargo run --release --example synth_dataset -- [out_dir] [3|15] [videos_per_class] [distractor:0|1]`

use mpain::synth::{
    default_specs, fifteen_class_specs, generate_dataset, DistractorSpec, SynthLabeling,
    SynthParams,
};

fn main() -> mpain::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().cloned().unwrap_or_else(|| "synth".into());
    let fifteen = args.get(1).map(|s| s == "15").unwrap_or(false);
    let per_class: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(4);
    let distractor = args.get(3).map(|s| s == "1").unwrap_or(false);

    let params = SynthParams::default();
    let (specs, labeling) = if fifteen {
        (fifteen_class_specs(), SynthLabeling::Fifteen)
    } else {
        (default_specs(), SynthLabeling::Three)
    };
    let band = DistractorSpec::top_band(params.width, params.height);
    let specs: Vec<_> = specs
        .into_iter()
        .map(|s| s.with_distractor(distractor.then(|| band.clone())))
        .collect();

    let manifest = generate_dataset(&specs, labeling, per_class, &params, 0, &out)?;
    for spec in &specs {
        println!(
            "{:<24} speed {:.2}±{:.2}  pause {:.2}  jitter {:.1}",
            spec.class_name, spec.speed_mean, spec.speed_std, spec.pause_prob, spec.jitter_amp
        );
    }
    println!("{} videos -> {out}/manifest.csv", manifest.len());
    Ok(())
}
