//! The diagonal state-space recurrence: impulse response and linear cost.
//!
//! Usage: `cargo run --release --example ssm_scan`

use std::time::Instant;

use mpain::ssm::{ssm_scan, SsmLayerParams};

fn main() -> mpain::Result<()> {
    let layer = SsmLayerParams {
        a_raw: vec![-1.0, 0.0, 1.0],
        log_dt: vec![-2.0, -1.0, 0.0],
        b: vec![1.0; 3],
        c: vec![1.0; 3],
        skip_d: vec![0.0; 3],
    };
    let mut u = vec![0.0; 12 * 3];
    u[..3].fill(1.0);
    let y = ssm_scan(&layer, &u)?;
    println!("impulse response per channel (slow, medium, fast decay):");
    for t in 0..12 {
        println!(
            "t={t:>2}  {:>8.5} {:>8.5} {:>8.5}",
            y[3 * t],
            y[3 * t + 1],
            y[3 * t + 2]
        );
    }

    let h = 64;
    let wide = SsmLayerParams {
        a_raw: vec![0.0; h],
        log_dt: vec![-3.0; h],
        b: vec![1.0; h],
        c: vec![1.0; h],
        skip_d: vec![1.0; h],
    };
    let input: Vec<f64> = (0..16384 * h)
        .map(|i| ((i % 97) as f64 * 0.1).sin())
        .collect();
    println!("\nH={h}:");
    for l in [1024, 2048, 4096, 8192, 16384] {
        let start = Instant::now();
        for _ in 0..10 {
            std::hint::black_box(ssm_scan(&wide, &input[..l * h])?);
        }
        println!(
            "L={l:>5}: {:>8.3} ms per scan",
            start.elapsed().as_secs_f64() * 100.0
        );
    }
    Ok(())
}
