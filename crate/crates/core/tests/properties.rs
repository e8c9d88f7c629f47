//! Property tests over randomly generated inputs.

use mpain::background::{
    compute_background, compute_background_histogram, compute_background_streaming,
    extract_foreground,
};
use mpain::eval::{make_folds, qwk, FoldOptions};
use mpain::features::{extract_motion_energy, l1_response, segment_clips, ClipSpec, CELLS, GRID};
use mpain::mask::{apply_mask, select_window, MaskWindow};
use mpain::video::{crop_time, load_video, save_video, Fps, Frame, RawVideo};
use proptest::prelude::*;

fn video_strategy(max_side: usize, max_frames: usize) -> impl Strategy<Value = RawVideo> {
    (1..=max_side, 1..=max_side, 1..=max_frames, 1u32..=60).prop_flat_map(|(w, h, n, fps)| {
        proptest::collection::vec(any::<u8>(), w * h * n).prop_map(move |px| {
            let frames = px.chunks(w * h).map(|c| Frame::new(c.to_vec())).collect();
            RawVideo::new(w, h, Fps::new(fps, 1).unwrap(), frames).unwrap()
        })
    })
}

fn response_strategy() -> impl Strategy<Value = [f32; CELLS]> {
    // small integer levels make ties common
    proptest::collection::vec(prop_oneof![0u8..4, any::<u8>()], CELLS)
        .prop_map(|v| std::array::from_fn(|i| v[i] as f32))
}

fn exhaustive(response: &[f32; CELLS]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_sum = f64::NEG_INFINITY;
    for r in 0..5 {
        for c in 0..5 {
            let mut s = 0.0f64;
            for dr in 0..3 {
                for dc in 0..3 {
                    s += response[(r + dr) * GRID + c + dc] as f64;
                }
            }
            if s > best_sum {
                best_sum = s;
                best = (r, c);
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn container_round_trip(v in video_strategy(12, 6)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.mpvr");
        save_video(&v, &path).unwrap();
        prop_assert_eq!(load_video(&path).unwrap(), v);
    }

    #[test]
    fn nested_crop_equals_direct_crop(v in video_strategy(3, 40), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let d = v.duration();
        let (lo, hi) = if a < b { (a * d, b * d) } else { (b * d, a * d) };
        let direct = crop_time(&v, lo, hi);
        let nested = crop_time(&v, 0.0, d).and_then(|w| crop_time(&w, lo, hi));
        match (direct, nested) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "disagree: {:?} vs {:?}", x.is_ok(), y.is_ok()),
        }
    }

    #[test]
    fn histogram_median_equals_sort_median(v in video_strategy(8, 17)) {
        let sorted = compute_background(&v);
        let hist = compute_background_histogram(&v);
        prop_assert_eq!(&sorted.median_frame, &hist.median_frame);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.mpvr");
        save_video(&v, &path).unwrap();
        prop_assert_eq!(&compute_background_streaming(&path).unwrap().median_frame, &sorted.median_frame);
    }

    #[test]
    fn median_ignores_frame_order(v in video_strategy(6, 9), rot in 0usize..9) {
        let mut frames = v.frames().to_vec();
        let n = frames.len();
        frames.rotate_left(rot % n);
        frames.reverse();
        let shuffled = RawVideo::new(v.width(), v.height(), v.fps(), frames).unwrap();
        prop_assert_eq!(compute_background(&v).median_frame, compute_background(&shuffled).median_frame);
    }

    #[test]
    fn median_shifts_with_constant(px in proptest::collection::vec(40u8..200, 16 * 5), c in 0u8..50) {
        let mk = |add: u8| {
            let frames = px.chunks(16).map(|f| Frame::new(f.iter().map(|&p| p + add).collect())).collect();
            RawVideo::new(4, 4, Fps::new(10, 1).unwrap(), frames).unwrap()
        };
        let base = compute_background(&mk(0));
        let shifted = compute_background(&mk(c));
        for (a, b) in base.median_frame.samples().iter().zip(shifted.median_frame.samples()) {
            prop_assert_eq!(*a as u16 + c as u16, *b as u16);
        }
    }

    #[test]
    fn foreground_zero_iff_below_threshold(v in video_strategy(5, 6), threshold in any::<u8>()) {
        let bg = compute_background(&v);
        let fg = extract_foreground(&v, &bg, threshold).unwrap();
        let all_zero = fg.frames().iter().all(|f| f.samples().iter().all(|&p| p == 0));
        let all_below = v.frames().iter().all(|f| {
            f.samples().iter().zip(bg.median_frame.samples()).all(|(&p, &m)| p.abs_diff(m) < threshold || p == m)
        });
        prop_assert_eq!(all_zero, all_below);
    }

    #[test]
    fn select_window_matches_exhaustive(r in response_strategy()) {
        let w = select_window(&r);
        prop_assert_eq!((w.row(), w.col()), exhaustive(&r));
    }

    #[test]
    fn select_window_scale_invariant(r in response_strategy(), exp in -8i32..8) {
        let s = 2f32.powi(exp);
        let scaled: [f32; CELLS] = std::array::from_fn(|i| r[i] * s);
        prop_assert_eq!(select_window(&r), select_window(&scaled));
    }

    #[test]
    fn apply_mask_keeps_window_and_zeroes_rest(data in proptest::collection::vec(0f32..10.0, 2 * CELLS * 3), row in 0usize..5, col in 0usize..5) {
        let grid = mpain::features::FeatureGrid::new(2, 3, data, None).unwrap();
        let w = MaskWindow::new(row, col).unwrap();
        let masked = apply_mask(&grid, w);
        let mut survivors = 0;
        for cell in 0..CELLS {
            let (r, c) = (cell / GRID, cell % GRID);
            if w.contains(r, c) {
                survivors += 1;
                prop_assert_eq!(masked.response()[cell], grid.response()[cell]);
            } else {
                prop_assert_eq!(masked.response()[cell], 0.0);
            }
            for t in 0..2 {
                for ch in 0..3 {
                    let expect = if w.contains(r, c) { grid.get(t, r, c, ch) } else { 0.0 };
                    prop_assert_eq!(masked.get(t, r, c, ch), expect);
                }
            }
        }
        prop_assert_eq!(survivors, 9);
        prop_assert_eq!(masked.mask(), Some(w));
    }

    #[test]
    fn features_shift_by_one_cell(
        patch in proptest::collection::vec(1u8..255, 2 * 2 * 5),
        row in 0usize..6,
        col in 0usize..6,
    ) {
        // 14x14 frames: 2x2-pixel cells; the patch fills one cell exactly
        let render = |r: usize, c: usize| {
            let frames = patch.chunks(4).map(|p| {
                let mut img = vec![0u8; 14 * 14];
                for (i, &v) in p.iter().enumerate() {
                    img[(2 * r + i / 2) * 14 + 2 * c + i % 2] = v;
                }
                Frame::new(img)
            }).collect();
            RawVideo::new(14, 14, Fps::new(10, 1).unwrap(), frames).unwrap()
        };
        let a = extract_motion_energy(&render(row, col), 2).unwrap();
        let b = extract_motion_energy(&render(row + 1, col + 1), 2).unwrap();
        for r in 0..GRID {
            for c in 0..GRID {
                let expect = if r >= 1 && c >= 1 { a.response_at(r - 1, c - 1) } else { 0.0 };
                prop_assert_eq!(b.response_at(r, c), expect);
            }
        }
    }

    #[test]
    fn features_scale_with_luminance(px in proptest::collection::vec(0u8..=63, 14 * 14 * 6), s in 0u8..=4) {
        let mk = |k: u8| {
            let frames = px.chunks(14 * 14).map(|f| Frame::new(f.iter().map(|&p| p * k).collect())).collect();
            RawVideo::new(14, 14, Fps::new(10, 1).unwrap(), frames).unwrap()
        };
        let base = extract_motion_energy(&mk(1), 3).unwrap();
        let scaled = extract_motion_energy(&mk(s), 3).unwrap();
        let sf = s as f32;
        for t in 0..3 {
            for r in 0..GRID {
                for c in 0..GRID {
                    for ch in [0, 1, 3] {
                        let (x, y) = (base.get(t, r, c, ch), scaled.get(t, r, c, ch));
                        prop_assert!((x * sf - y).abs() <= 1e-4 * (1.0 + y.abs()), "ch{} {} vs {}", ch, x * sf, y);
                    }
                    let nz = scaled.get(t, r, c, 2);
                    prop_assert_eq!(nz, if s == 0 { 0.0 } else { base.get(t, r, c, 2) });
                }
            }
        }
    }

    #[test]
    fn response_is_l1_of_data(v in video_strategy(10, 8).prop_filter("bins", |v| v.width() >= 7 && v.height() >= 7 && v.frame_count() >= 3)) {
        let g = extract_motion_energy(&v, 2).unwrap();
        prop_assert_eq!(*g.response(), l1_response(g.data(), 2, 4));
    }

    #[test]
    fn clips_are_ordered_disjoint_prefix(n in 30usize..200, fps in 5u32..40) {
        let frames = (0..n).map(|i| Frame::filled(49, (i % 251) as u8)).collect();
        let v = RawVideo::new(7, 7, Fps::new(fps, 1).unwrap(), frames).unwrap();
        let spec = ClipSpec::default();
        let Ok(clips) = segment_clips(&v, &spec) else { return Ok(()); };
        let ranges = spec.clip_ranges(&v).unwrap();
        for pair in ranges.windows(2) {
            prop_assert!(pair[0].end <= pair[1].start);
        }
        for (clip, range) in clips.iter().zip(&ranges) {
            prop_assert_eq!(clip.frames(), &v.frames()[range.clone()]);
        }
    }

    #[test]
    fn folds_partition_and_balance(labels in proptest::collection::vec(0usize..4, 40..120), seed in any::<u64>()) {
        let mut counts = [0usize; 4];
        labels.iter().for_each(|&l| counts[l] += 1);
        prop_assume!(counts.iter().all(|&c| c >= 8));
        let f = make_folds(&labels, None, 8, seed, FoldOptions::default()).unwrap();
        let mut seen = vec![0; labels.len()];
        for fold in 0..8 {
            for i in f.members(fold) {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        let per = f.class_counts(&labels, 4);
        for c in 0..4 {
            let col: Vec<usize> = per.iter().map(|row| row[c]).collect();
            prop_assert!(col.iter().max().unwrap() - col.iter().min().unwrap() <= 1);
        }
        prop_assert_eq!(make_folds(&labels, None, 8, seed, FoldOptions::default()).unwrap(), f);
    }

    #[test]
    fn qwk_invariant_under_affine_relabeling(
        pairs in proptest::collection::vec((0usize..4, 0usize..4), 2..60),
        a in 1usize..4,
        b in 0usize..3,
    ) {
        let preds: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let truths: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let k2 = 3 * a + b + 1;
        let map = |v: &Vec<usize>| v.iter().map(|&x| a * x + b).collect::<Vec<_>>();
        let before = qwk(&preds, &truths, 4).unwrap();
        let after = qwk(&map(&preds), &map(&truths), k2).unwrap();
        prop_assert!((before - after).abs() < 1e-12, "{} vs {}", before, after);
    }
}
