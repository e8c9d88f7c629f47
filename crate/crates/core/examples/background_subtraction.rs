//! Median background and foreground of one synthetic recording.
//!
//! Usage: `cargo run --example background_subtraction -- [out_dir]`
//!
//! Writes `video.mpvr`, `background.pgm` and a few foreground frames as PGM.

use std::path::PathBuf;

use mpain::background::{compute_background_streaming, extract_foreground};
use mpain::synth::{default_specs, generate_video, SynthParams};
use mpain::video::{pnm, save_video};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "background_demo".into()),
    );
    std::fs::create_dir_all(&out)?;

    let params = SynthParams {
        duration_s: 10.0,
        ..SynthParams::default()
    };
    let video = generate_video(&default_specs()[0], &params, 7)?;
    let path = out.join("video.mpvr");
    save_video(&video, &path)?;

    // one pass over the file, 256 counters per pixel
    let bg = compute_background_streaming(&path)?;
    bg.write_pgm(out.join("background.pgm"))?;

    let fg = extract_foreground(&video, &bg, 10)?;
    for t in [0, fg.frame_count() / 2, fg.frame_count() - 1] {
        let frame = &fg.frames()[t];
        let lit = frame.samples().iter().filter(|&&p| p > 0).count();
        println!("frame {t:>3}: {lit} foreground pixels");
        pnm::write_pgm(
            out.join(format!("foreground_{t:03}.pgm")),
            fg.width(),
            fg.height(),
            frame.samples(),
        )?;
    }
    println!(
        "{} frames, background from {} samples per pixel -> {}",
        video.frame_count(),
        bg.source_frame_count,
        out.display()
    );
    Ok(())
}
