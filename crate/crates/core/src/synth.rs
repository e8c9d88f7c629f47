//! Class-conditioned synthetic recordings.
//!
//! A bright Gaussian blob (the "animal") performs a bounded random walk over
//! a static mid-gray floor. Each class differs only in its kinematics:
//! speed, pausing and local jitter. An optional distractor modulates the
//! luminance of a fixed region periodically, standing in for background
//! motion that has nothing to do with the animal.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Condition, DatasetManifest, ManifestRow, PainLabel, ThreeClass, N_CLASSES};
use crate::ssm::mix_seed;
use crate::video::{save_video, Fps, Frame, RawVideo};

/// Floor luminance.
pub const BACKGROUND_LEVEL: f64 = 128.0;
/// Peak brightness of the blob above the floor.
pub const BLOB_PEAK: f64 = 100.0;
/// Standard deviation of the per-frame heading change, radians.
const TURN_STD: f64 = 0.35;
/// Jitter oscillation frequency, Hz.
const JITTER_HZ: f64 = 4.0;

/// Periodic luminance modulation of a rectangular region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistractorSpec {
    /// Pixel rectangle `[x0, y0, x1, y1)`.
    pub region: [usize; 4],
    /// Peak modulation in luminance levels.
    pub amplitude: f64,
    /// Modulation period in seconds.
    pub period_s: f64,
    /// Each video draws its amplitude scale uniformly from `[min_scale, 1]`
    /// and its period from `[period_s, period_s · period_spread]`.
    #[serde(default = "one")]
    pub min_scale: f64,
    #[serde(default = "one")]
    pub period_spread: f64,
}

fn one() -> f64 {
    1.0
}

impl DistractorSpec {
    /// Slow flicker over the top two rows of grid cells of a `width`-wide frame.
    pub fn top_band(width: usize, height: usize) -> Self {
        DistractorSpec {
            region: [0, 0, width, 2 * height / 7],
            amplitude: 12.0,
            period_s: 0.6,
            min_scale: 0.1,
            period_spread: 4.0,
        }
    }

    fn validate(&self, width: usize, height: usize) -> Result<()> {
        let [x0, y0, x1, y1] = self.region;
        if x0 >= x1 || y0 >= y1 || x1 > width || y1 > height {
            return Err(Error::Config(format!(
                "distractor region {:?} outside {width}x{height} frame",
                self.region
            )));
        }
        if !(self.amplitude >= 0.0 && self.period_s > 0.0)
            || !(0.0..=1.0).contains(&self.min_scale)
            || !(self.period_spread >= 1.0)
        {
            return Err(Error::Config("invalid distractor parameters".into()));
        }
        Ok(())
    }
}

/// Motion statistics of one synthetic class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClassSpec {
    pub class_name: String,
    /// Mean step length, pixels per frame.
    pub speed_mean: f64,
    pub speed_std: f64,
    /// Probability of standing still on a given frame.
    pub pause_prob: f64,
    /// Amplitude of the local oscillation, pixels.
    pub jitter_amp: f64,
    pub blob_radius: f64,
    #[serde(default)]
    pub distractor: Option<DistractorSpec>,
}

impl SynthClassSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mean >= 0.0 && self.speed_std >= 0.0 && self.jitter_amp >= 0.0) {
            return Err(Error::Config(format!(
                "class {:?}: speeds and jitter must be non-negative",
                self.class_name
            )));
        }
        if !(0.0..=1.0).contains(&self.pause_prob) {
            return Err(Error::Config(format!(
                "class {:?}: pause probability {} outside [0, 1]",
                self.class_name, self.pause_prob
            )));
        }
        if !(self.blob_radius >= 1.0) {
            return Err(Error::Config(format!(
                "class {:?}: blob radius must be at least 1",
                self.class_name
            )));
        }
        Ok(())
    }

    pub fn with_distractor(mut self, distractor: Option<DistractorSpec>) -> Self {
        self.distractor = distractor;
        self
    }
}

/// Steady locomotion, frequent licking bouts, and slow low mobility.
pub fn default_specs() -> Vec<SynthClassSpec> {
    vec![
        SynthClassSpec {
            class_name: "no_pain".into(),
            speed_mean: 2.0,
            speed_std: 0.5,
            pause_prob: 0.05,
            jitter_amp: 0.0,
            blob_radius: 7.0,
            distractor: None,
        },
        SynthClassSpec {
            class_name: "inflammatory".into(),
            speed_mean: 1.2,
            speed_std: 0.4,
            pause_prob: 0.6,
            jitter_amp: 2.5,
            blob_radius: 7.0,
            distractor: None,
        },
        SynthClassSpec {
            class_name: "neuropathic".into(),
            speed_mean: 0.7,
            speed_std: 0.2,
            pause_prob: 0.2,
            jitter_amp: 0.0,
            blob_radius: 7.0,
            distractor: None,
        },
    ]
}

/// Recording geometry shared by every video of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub duration_s: f64,
    pub fps: Fps,
    pub width: usize,
    pub height: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            duration_s: 30.0,
            fps: Fps { num: 20, den: 1 },
            width: 112,
            height: 112,
        }
    }
}

impl SynthParams {
    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps.as_f64()).round() as usize
    }
}

/// Blob centroid per frame, before jitter.
fn walk(spec: &SynthClassSpec, p: &SynthParams, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let n = p.frame_count();
    let margin = spec.blob_radius + spec.jitter_amp;
    let (lo_x, hi_x) = (margin, p.width as f64 - 1.0 - margin);
    let (lo_y, hi_y) = (margin, p.height as f64 - 1.0 - margin);
    let speed = Normal::new(spec.speed_mean, spec.speed_std).expect("finite speed");
    let turn = Normal::new(0.0, TURN_STD).expect("finite turn");
    let mut x = rng.random_range(lo_x..=hi_x);
    let mut y = rng.random_range(lo_y..=hi_y);
    let mut heading = rng.random_range(0.0..TAU);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push((x, y));
        heading += turn.sample(rng);
        if rng.random::<f64>() < spec.pause_prob {
            continue;
        }
        let step = speed.sample(rng).max(0.0);
        x += step * heading.cos();
        y += step * heading.sin();
        if x < lo_x || x > hi_x {
            x = reflect(x, lo_x, hi_x);
            heading = std::f64::consts::PI - heading;
        }
        if y < lo_y || y > hi_y {
            y = reflect(y, lo_y, hi_y);
            heading = -heading;
        }
    }
    out
}

fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let span = hi - lo;
    let m = (v - lo).rem_euclid(2.0 * span);
    lo + if m > span { 2.0 * span - m } else { m }
}

/// Renders one recording. Identical inputs give identical videos.
pub fn generate_video(spec: &SynthClassSpec, params: &SynthParams, seed: u64) -> Result<RawVideo> {
    spec.validate()?;
    let (w, h) = (params.width, params.height);
    let margin = spec.blob_radius + spec.jitter_amp;
    if 2.0 * margin + 1.0 > w.min(h) as f64 {
        return Err(Error::Config(format!(
            "blob of radius {} with jitter {} does not fit a {w}x{h} frame",
            spec.blob_radius, spec.jitter_amp
        )));
    }
    if params.frame_count() == 0 {
        return Err(Error::Config("synthetic video would have no frames".into()));
    }
    if let Some(d) = &spec.distractor {
        d.validate(w, h)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = walk(spec, params, &mut rng);
    let jitter_phase = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
    let distractor = spec.distractor.as_ref().map(|d| {
        let scale = rng.random_range(d.min_scale..=1.0);
        let period = d.period_s * rng.random_range(1.0..=d.period_spread);
        let phase = rng.random_range(0.0..TAU);
        (d, scale * d.amplitude, period, phase)
    });

    let fps = params.fps.as_f64();
    let sigma = spec.blob_radius / 2.0;
    let reach = (2.0 * spec.blob_radius).ceil() as isize;
    let frames = centers
        .iter()
        .enumerate()
        .map(|(i, &(cx, cy))| {
            let t = i as f64 / fps;
            let mut img = vec![BACKGROUND_LEVEL; w * h];
            if let Some((d, amp, period, phase)) = distractor {
                let v = amp * (TAU * t / period + phase).sin();
                let [x0, y0, x1, y1] = d.region;
                for row in img[y0 * w..y1 * w].chunks_exact_mut(w) {
                    row[x0..x1].iter_mut().for_each(|p| *p += v);
                }
            }
            let w_t = TAU * JITTER_HZ * t;
            let bx = cx + spec.jitter_amp * (w_t + jitter_phase.0).sin();
            let by = cy + spec.jitter_amp * (1.3 * w_t + jitter_phase.1).sin();
            let (px, py) = (bx.round() as isize, by.round() as isize);
            for yy in (py - reach).max(0)..=(py + reach).min(h as isize - 1) {
                for xx in (px - reach).max(0)..=(px + reach).min(w as isize - 1) {
                    let d2 = (xx as f64 - bx).powi(2) + (yy as f64 - by).powi(2);
                    img[yy as usize * w + xx as usize] +=
                        BLOB_PEAK * (-d2 / (2.0 * sigma * sigma)).exp();
                }
            }
            Frame::new(
                img.iter()
                    .map(|v| v.round().clamp(0.0, 255.0) as u8)
                    .collect(),
            )
        })
        .collect();
    RawVideo::new(w, h, params.fps, frames)
}

/// How synthetic classes map onto the pain taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthLabeling {
    /// Exactly three specs, in the order no_pain, inflammatory, neuropathic,
    /// recorded as (control, D7), (formalin, 1min) and (sni, D7).
    Three,
    /// Exactly fifteen specs, spec `i` recorded as pain class `i`. Videos of
    /// one condition are split across mice that attend every timepoint.
    Fifteen,
}

/// Taxonomy label used for synthetic class `class` under `labeling`.
pub fn synth_label(labeling: SynthLabeling, class: usize) -> Result<PainLabel> {
    match labeling {
        SynthLabeling::Three => Ok(ThreeClass::from_id(class)?.representative()),
        SynthLabeling::Fifteen => PainLabel::from_id(class),
    }
}

fn mouse_for(
    labeling: SynthLabeling,
    label: PainLabel,
    video: usize,
) -> (Option<Condition>, Option<String>) {
    match labeling {
        SynthLabeling::Three => (label.condition(), None),
        SynthLabeling::Fifteen => {
            let (cond, mouse) = match label.condition() {
                Some(c) => (c, video),
                None => (Condition::ALL[video % 3], video / 3),
            };
            (Some(cond), Some(format!("{}-m{mouse}", cond.name())))
        }
    }
}

/// Writes `videos_per_class` recordings of every spec under
/// `out_dir/videos/` and a `manifest.csv` next to them.
///
/// Video `j` of class `c` is rendered from seed `mix_seed([seed, c, j])`.
pub fn generate_dataset(
    specs: &[SynthClassSpec],
    labeling: SynthLabeling,
    videos_per_class: usize,
    params: &SynthParams,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    let expected = match labeling {
        SynthLabeling::Three => 3,
        SynthLabeling::Fifteen => N_CLASSES,
    };
    if specs.len() != expected {
        return Err(Error::Config(format!(
            "{labeling:?} labeling needs {expected} class specs, got {}",
            specs.len()
        )));
    }
    if videos_per_class == 0 {
        return Err(Error::Config("videos_per_class must be at least 1".into()));
    }
    let out_dir = out_dir.as_ref();
    let video_dir = out_dir.join("videos");
    std::fs::create_dir_all(&video_dir).map_err(|e| Error::io(&video_dir, e))?;

    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|c| (0..videos_per_class).map(move |j| (c, j)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(c, j)| {
            let spec = &specs[c];
            let label = synth_label(labeling, c)?;
            let video = generate_video(spec, params, mix_seed(&[seed, c as u64, j as u64]))?;
            let name = format!("{:02}_{}_{j:03}.mpvr", c, sanitize(&spec.class_name));
            let path: PathBuf = video_dir.join(&name);
            save_video(&video, &path)?;
            let (condition, mouse) = mouse_for(labeling, label, j);
            ManifestRow::new(
                PathBuf::from("videos").join(name),
                condition,
                label.timepoint(),
                mouse,
                params.fps,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest::new(rows)?;
    manifest.write(out_dir.join("manifest.csv"), Some(out_dir))?;
    DatasetManifest::load(out_dir.join("manifest.csv"))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Fifteen specs for [`SynthLabeling::Fifteen`]: kinematics interpolate
/// along each condition's timeline, so neighbouring timepoints look alike.
pub fn fifteen_class_specs() -> Vec<SynthClassSpec> {
    let base = default_specs();
    PainLabel::all()
        .map(|label| {
            let (from, to, frac) = match label.condition() {
                None => (&base[0], &base[0], 0.0),
                Some(c) => {
                    let target = match c {
                        Condition::Formalin => &base[1],
                        Condition::Sni => &base[2],
                        Condition::Control => &base[0],
                    };
                    let rank = c.ordinal(label.timepoint()).unwrap_or(0) as f64;
                    let last = (c.timeline().len() - 1) as f64;
                    (&base[0], target, rank / last)
                }
            };
            let lerp = |a: f64, b: f64| a + (b - a) * frac;
            SynthClassSpec {
                class_name: label.short_name(),
                speed_mean: lerp(from.speed_mean, to.speed_mean),
                speed_std: lerp(from.speed_std, to.speed_std),
                pause_prob: lerp(from.pause_prob, to.pause_prob),
                jitter_amp: lerp(from.jitter_amp, to.jitter_amp),
                blob_radius: from.blob_radius,
                distractor: None,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{compute_background, extract_foreground};
    use crate::features::{extract_motion_energy, segment_clips, ClipSpec};
    use crate::mask::{select_window, MaskWindow};

    fn small() -> SynthParams {
        SynthParams {
            duration_s: 3.0,
            fps: Fps::new(20, 1).unwrap(),
            width: 56,
            height: 56,
        }
    }

    fn still() -> SynthClassSpec {
        SynthClassSpec {
            class_name: "still".into(),
            speed_mean: 0.0,
            speed_std: 0.0,
            pause_prob: 1.0,
            jitter_amp: 0.0,
            blob_radius: 4.0,
            distractor: None,
        }
    }

    #[test]
    fn static_blob_has_empty_foreground() {
        let v = generate_video(&still(), &small(), 3).unwrap();
        let bg = compute_background(&v);
        let fg = extract_foreground(&v, &bg, 0).unwrap();
        assert!(fg
            .frames()
            .iter()
            .all(|f| f.samples().iter().all(|&p| p == 0)));
        for f in &v.frames()[1..] {
            assert_eq!(f, &v.frames()[0]);
        }
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let spec = &default_specs()[1];
        let a = generate_video(spec, &small(), 9).unwrap();
        let b = generate_video(spec, &small(), 9).unwrap();
        let c = generate_video(spec, &small(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.frame_count(), 60);
    }

    #[test]
    fn walk_stays_in_bounds() {
        let mut spec = default_specs()[0].clone();
        spec.speed_mean = 9.0;
        let p = small();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (x, y) in walk(&spec, &p, &mut rng) {
                assert!(x >= spec.blob_radius && x <= p.width as f64 - 1.0 - spec.blob_radius);
                assert!(y >= spec.blob_radius && y <= p.height as f64 - 1.0 - spec.blob_radius);
            }
        }
    }

    #[test]
    fn oversized_blob_rejected() {
        let mut spec = still();
        spec.blob_radius = 40.0;
        assert!(matches!(
            generate_video(&spec, &small(), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn distractor_corner_is_not_selected() {
        let p = SynthParams {
            width: 70,
            height: 70,
            ..small()
        };
        let spec = SynthClassSpec {
            jitter_amp: 2.0,
            ..still()
        }
        .with_distractor(Some(DistractorSpec {
            region: [60, 0, 70, 10],
            amplitude: 6.0,
            period_s: 0.5,
            min_scale: 1.0,
            period_spread: 1.0,
        }));
        let mut checked = 0;
        for seed in 0..12 {
            let (cx, cy) = walk(&spec, &p, &mut ChaCha8Rng::seed_from_u64(seed))[0];
            if cx < 35.0 || cy > 35.0 {
                checked += 1;
            } else {
                continue;
            }
            let v = generate_video(&spec, &p, seed).unwrap();
            let fg = extract_foreground(&v, &compute_background(&v), 0).unwrap();
            for clip in segment_clips(&fg, &ClipSpec::default()).unwrap() {
                let grid = extract_motion_energy(&clip, 4).unwrap();
                assert!(grid.response_at(0, 6) > 0.0);
                let best = select_window(grid.response());
                // exhaustive check of the winner, then of the exclusion
                for r in 0..5 {
                    for c in 0..5 {
                        let w = MaskWindow::new(r, c).unwrap();
                        assert!(w.sum(grid.response()) <= best.sum(grid.response()));
                    }
                }
                assert!(!best.contains(0, 6));
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn reflect_folds_into_range() {
        assert_eq!(reflect(12.0, 0.0, 10.0), 8.0);
        assert_eq!(reflect(-3.0, 0.0, 10.0), 3.0);
        assert_eq!(reflect(5.0, 0.0, 10.0), 5.0);
    }

    #[test]
    fn three_class_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(
            &default_specs(),
            SynthLabeling::Three,
            8,
            &small(),
            1,
            dir.path(),
        )
        .unwrap();
        assert_eq!(m.len(), 24);
        let collapsed: Vec<usize> = m.rows.iter().map(|r| r.label.collapse().id()).collect();
        for c in 0..3 {
            assert_eq!(collapsed.iter().filter(|&&x| x == c).count(), 8);
        }
        assert!(m.rows.iter().all(|r| r.video_path.exists()));
    }

    #[test]
    fn fifteen_class_dataset_covers_taxonomy() {
        let dir = tempfile::tempdir().unwrap();
        let p = SynthParams {
            duration_s: 0.5,
            ..small()
        };
        let m = generate_dataset(
            &fifteen_class_specs(),
            SynthLabeling::Fifteen,
            3,
            &p,
            1,
            dir.path(),
        )
        .unwrap();
        let mut ids: Vec<usize> = m.labels();
        ids.sort();
        ids.dedup();
        assert_eq!(ids, (0..15).collect::<Vec<_>>());
        assert!(m.groups().is_some());
    }
}
