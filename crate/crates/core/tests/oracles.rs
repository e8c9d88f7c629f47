//! Independent reimplementations checked against the library.

use mpain::eval::{cohort_report, collapse_to_3, qwk, PainLabel, ThreeClass};
use mpain::features::{extract_motion_energy, FeatureGrid};
use mpain::ssm::{
    focal_loss, forward, predict, ssm_scan, Dropout, ModelConfig, Params, Sequence, SsmCheckpoint,
    SsmLayerParams, TemporalPooling,
};
use mpain::video::{Fps, Frame, RawVideo};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    ModelConfig {
        input_dim: rng.random_range(1..5),
        hidden_dim: rng.random_range(1..7),
        n_blocks: rng.random_range(1..4),
        n_classes: rng.random_range(2..6),
        dropout_rate: 0.1,
        focal_gamma: 2.0,
        pooling: TemporalPooling::Mean,
    }
}

/// Straight-line forward pass written from the layer definitions.
fn reference_forward(p: &Params, x: &Sequence) -> Vec<f64> {
    let cfg = p.config();
    let l = p.layout();
    let (h, n_in, len) = (cfg.hidden_dim, cfg.input_dim, x.len());
    let w_in = p.slice(l.input_w);
    let b_in = p.slice(l.input_b);
    let mut z: Vec<Vec<f64>> = (0..len)
        .map(|t| {
            (0..h)
                .map(|j| {
                    b_in[j]
                        + (0..n_in)
                            .map(|i| w_in[j * n_in + i] * x.row(t)[i])
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();
    for bl in &l.blocks {
        let (gamma, beta) = (p.slice(bl.norm_scale), p.slice(bl.norm_bias));
        let u: Vec<Vec<f64>> = z
            .iter()
            .map(|row| {
                let mean = row.iter().sum::<f64>() / h as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / h as f64;
                (0..h)
                    .map(|j| (row[j] - mean) / (var + 1e-5).sqrt() * gamma[j] + beta[j])
                    .collect()
            })
            .collect();
        let (a_raw, log_dt, b, c, d) = (
            p.slice(bl.a_raw),
            p.slice(bl.log_dt),
            p.slice(bl.b),
            p.slice(bl.c),
            p.slice(bl.skip_d),
        );
        let y: Vec<Vec<f64>> = (0..len)
            .map(|t| {
                (0..h)
                    .map(|j| {
                        let a = -a_raw[j].exp();
                        let dt = log_dt[j].exp();
                        let abar = (a * dt).exp();
                        let bbar = (abar - 1.0) / a * b[j];
                        let conv: f64 = (0..=t)
                            .map(|s| c[j] * abar.powi((t - s) as i32) * bbar * u[s][j])
                            .sum();
                        conv + d[j] * u[t][j]
                    })
                    .collect()
            })
            .collect();
        let (mw, mb) = (p.slice(bl.mix_w), p.slice(bl.mix_b));
        for t in 0..len {
            let g: Vec<f64> = y[t]
                .iter()
                .map(|&v| {
                    let k = (2.0 / std::f64::consts::PI).sqrt();
                    0.5 * v * (1.0 + (k * (v + 0.044715 * v * v * v)).tanh())
                })
                .collect();
            for o in 0..h {
                z[t][o] += mb[o] + (0..h).map(|i| mw[o * h + i] * g[i]).sum::<f64>();
            }
        }
    }
    let pooled: Vec<f64> = (0..h)
        .map(|j| z.iter().map(|r| r[j]).sum::<f64>() / len as f64)
        .collect();
    let (dw, db) = (p.slice(l.dec_w), p.slice(l.dec_b));
    (0..cfg.n_classes)
        .map(|k| db[k] + (0..h).map(|j| dw[k * h + j] * pooled[j]).sum::<f64>())
        .collect()
}

#[test]
fn forward_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..30 {
        let cfg = random_config(&mut rng);
        let mut p = Params::init(&cfg, trial);
        // perturb norm parameters away from their identity init
        for v in p.values_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
        let len = rng.random_range(1..8);
        let x = Sequence::new(
            cfg.input_dim,
            (0..len * cfg.input_dim)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect(),
        )
        .unwrap();
        let got = forward(&p, &x, Dropout::Off);
        let want = reference_forward(&p, &x);
        for (g, w) in got.iter().zip(&want) {
            assert!(
                (g - w).abs() <= 1e-10 * (1.0 + w.abs()),
                "trial {trial}: {g} vs {w}"
            );
        }
    }
}

#[test]
fn scan_matches_convolution_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let h = rng.random_range(1..6);
        let len = rng.random_range(1..40);
        let layer = SsmLayerParams {
            a_raw: (0..h).map(|_| rng.random_range(-1.0..1.0)).collect(),
            log_dt: (0..h).map(|_| rng.random_range(-5.0..0.0)).collect(),
            b: (0..h).map(|_| rng.random_range(-1.0..1.0)).collect(),
            c: (0..h).map(|_| rng.random_range(-1.0..1.0)).collect(),
            skip_d: (0..h).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let u: Vec<f64> = (0..len * h).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = ssm_scan(&layer, &u).unwrap();
        for j in 0..h {
            let a = -layer.a_raw[j].exp();
            let abar = (a * layer.log_dt[j].exp()).exp();
            assert!(abar.abs() < 1.0);
            let bbar = (abar - 1.0) / a * layer.b[j];
            let kernel: Vec<f64> = (0..len)
                .map(|k| layer.c[j] * abar.powi(k as i32) * bbar)
                .collect();
            for t in 0..len {
                let want: f64 = (0..=t).map(|s| kernel[t - s] * u[s * h + j]).sum::<f64>()
                    + layer.skip_d[j] * u[t * h + j];
                assert!(
                    (y[t * h + j] - want).abs() < 1e-12,
                    "{} vs {want}",
                    y[t * h + j]
                );
            }
        }
    }
}

#[test]
fn impulse_response_decays() {
    let layer = SsmLayerParams {
        a_raw: vec![-0.5, 0.0, 1.0],
        log_dt: vec![-3.0, -1.0, 0.0],
        b: vec![1.0; 3],
        c: vec![1.0; 3],
        skip_d: vec![0.0; 3],
    };
    let mut u = vec![0.0; 30 * 3];
    u[..3].fill(1.0);
    let y = ssm_scan(&layer, &u).unwrap();
    for j in 0..3 {
        for t in 1..30 {
            assert!(y[t * 3 + j].abs() < y[(t - 1) * 3 + j].abs());
        }
    }
}

#[test]
fn focal_loss_two_class_uniform() {
    // p_t = 1/2: -(1/2)^2 ln(1/2)
    let (loss, _) = focal_loss(&[0.3, 0.3], 1, 2.0);
    assert!((loss - 0.25 * std::f64::consts::LN_2).abs() < 1e-12);
    assert!((loss - 0.17329).abs() < 1e-5);
}

#[test]
fn checkpoint_round_trip_reproduces_predictions() {
    let cfg = ModelConfig::desk(4, 15);
    let p = Params::init(&cfg, 3);
    let ckpt = SsmCheckpoint {
        meta: mpain::ssm::CheckpointMeta {
            config: cfg.clone(),
            epoch: 7,
            best_val_loss: Some(0.1 + 0.2),
            seed: 3,
            pipeline: None,
        },
        params: p,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mpck");
    ckpt.save(&path).unwrap();
    let back = SsmCheckpoint::load(&path).unwrap();
    assert_eq!(back.to_bytes().unwrap(), ckpt.to_bytes().unwrap());
    let x = Sequence::new(4, (0..40).map(|i| (i as f64 * 0.3).cos()).collect()).unwrap();
    let (a, pa) = predict(&ckpt.params, &x);
    let (b, pb) = predict(&back.params, &x);
    assert_eq!(a, b);
    assert_eq!(pa, pb);
}

#[test]
fn two_frame_motion_energy_by_hand() {
    // 7x7 frames, one pixel per cell; cell (0,0) goes 50 -> 150, others stay 0
    let mut f0 = vec![0u8; 49];
    let mut f1 = vec![0u8; 49];
    f0[0] = 50;
    f1[0] = 150;
    let v = RawVideo::new(
        7,
        7,
        Fps::new(10, 1).unwrap(),
        vec![Frame::new(f0), Frame::new(f1)],
    )
    .unwrap();
    let g: FeatureGrid = extract_motion_energy(&v, 1).unwrap();
    // |150-50| = 100; mean (50+150)/2 = 100; nonzero 2/2; std 50
    assert_eq!(g.cell(0, 0, 0), &[100.0, 100.0, 1.0, 50.0]);
    assert_eq!(g.response_at(0, 0), 251.0);
    assert_eq!(g.response_at(3, 3), 0.0);
}

#[test]
fn qwk_hand_evaluated() {
    // truths 0,1,2 vs preds 2,1,0, k = 3.
    // O has (0,2),(1,1),(2,0): w = 1, 0, 1 -> Σ wO = 2.
    // E_ij = 1/3 for all i, j; Σ w_ij / 3 = (0+1/4+1 + 1/4+0+1/4 + 1+1/4+0)/3 = 1.
    // κ = 1 - 2/1 = -1.
    assert!((qwk(&[2, 1, 0], &[0, 1, 2], 3).unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn collapse_is_total_and_cohort_counts() {
    let mut seen = [0; 3];
    for l in PainLabel::all() {
        seen[collapse_to_3(l).id()] += 1;
    }
    // no_pain: D0 + 4 control; inflammatory: 6 formalin; neuropathic: 4 sni
    assert_eq!(seen, [5, 6, 4]);
    let rows = cohort_report(&[(
        "fixture".into(),
        [0, 0, 1, 2, 2, 2, 1, 0]
            .map(|i| ThreeClass::from_id(i).unwrap())
            .to_vec(),
    )])
    .unwrap();
    assert_eq!(rows[0].percent, [25.0, 37.5, 37.5]);
}
