//! Clip segmentation, the 7x7 motion-energy grid and the 3x3 feature mask.
//!
//! Usage: `cargo run --example motion_features`

use mpain::background::{compute_background_histogram, extract_foreground};
use mpain::features::{extract_motion_energy, segment_clips, ClipSpec, GRID};
use mpain::mask::mask_pipeline;
use mpain::synth::{default_specs, generate_video, DistractorSpec, SynthParams};

fn main() -> mpain::Result<()> {
    let params = SynthParams::default();
    let spec = default_specs()[1]
        .clone()
        .with_distractor(Some(DistractorSpec::top_band(params.width, params.height)));
    let video = generate_video(&spec, &params, 3)?;
    let fg = extract_foreground(&video, &compute_background_histogram(&video), 0)?;

    let clips = segment_clips(&fg, &ClipSpec::default())?;
    println!("{} clips of {} frames", clips.len(), clips[0].frame_count());

    let grid = extract_motion_energy(&clips[0], 4)?;
    println!("clip 0 response (L1 over time bins and channels):");
    for r in 0..GRID {
        let row: Vec<String> = (0..GRID)
            .map(|c| format!("{:>9.1}", grid.response_at(r, c)))
            .collect();
        println!("{}", row.join(""));
    }

    let (masked, window) = mask_pipeline(&grid);
    println!(
        "mask window at row {}, col {}: keeps {:.1} of {:.1} total L1",
        window.row(),
        window.col(),
        masked.total_l1(),
        grid.total_l1()
    );
    Ok(())
}
