//! Clip segmentation and per-clip 7×7 feature grids.
//!
//! A [`FeatureGrid`] holds a `T × 7 × 7 × D` tensor plus a nonnegative
//! 7×7 response surface used to place the spatial mask. Grids come either
//! from the built-in motion-energy extractor or from `MPFG` files written
//! by an external feature model.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::MaskWindow;
use crate::video::RawVideo;

pub const GRID: usize = 7;
pub const CELLS: usize = GRID * GRID;
pub const MOTION_CHANNELS: usize = 4;
pub const DEFAULT_T_BINS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub clip_seconds: f64,
}

impl Default for ClipSpec {
    fn default() -> Self {
        ClipSpec { clip_seconds: 1.5 }
    }
}

impl ClipSpec {
    pub fn new(clip_seconds: f64) -> Result<Self> {
        if !(clip_seconds.is_finite() && clip_seconds > 0.0) {
            return Err(Error::Config(format!(
                "clip length {clip_seconds} s must be positive"
            )));
        }
        Ok(ClipSpec { clip_seconds })
    }

    /// `floor(clip_seconds * fps)`.
    pub fn frames_per_clip(&self, video: &RawVideo) -> usize {
        let fps = video.fps();
        (self.clip_seconds * fps.num as f64 / fps.den as f64 + 1e-9).floor() as usize
    }

    /// First frame of clip `index`: the first frame at or after `index * clip_seconds`.
    fn clip_start(&self, video: &RawVideo, index: usize) -> usize {
        let fps = video.fps();
        let x = index as f64 * self.clip_seconds * fps.num as f64 / fps.den as f64;
        (x - 1e-9).ceil().max(0.0) as usize
    }

    /// Frame ranges of every complete clip.
    pub fn clip_ranges(&self, video: &RawVideo) -> Result<Vec<std::ops::Range<usize>>> {
        let len = self.frames_per_clip(video);
        if len < 2 {
            return Err(Error::Config(format!(
                "{} s clips hold {len} frame(s) at {} fps; at least 2 are needed",
                self.clip_seconds,
                video.fps().as_f64()
            )));
        }
        let ranges: Vec<_> = (0..)
            .map(|i| {
                let start = self.clip_start(video, i);
                start..start + len
            })
            .take_while(|r| r.end <= video.frame_count())
            .collect();
        if ranges.is_empty() {
            return Err(Error::VideoTooShort {
                duration: video.duration(),
                clip: self.clip_seconds,
            });
        }
        Ok(ranges)
    }

    pub fn clips_per_video(&self, video: &RawVideo) -> Result<usize> {
        self.clip_ranges(video).map(|r| r.len())
    }
}

/// Splits `video` into fixed-length clips anchored at multiples of
/// `clip_seconds`. A trailing partial clip is dropped.
pub fn segment_clips(video: &RawVideo, spec: &ClipSpec) -> Result<Vec<RawVideo>> {
    spec.clip_ranges(video)?
        .into_iter()
        .map(|r| video.slice(r))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    t_bins: usize,
    channels: usize,
    data: Vec<f32>,
    response: [f32; CELLS],
    mask: Option<MaskWindow>,
}

impl FeatureGrid {
    /// Builds a grid, checking shape, finiteness and `response >= 0`.
    /// When `response` is `None` it is computed as the per-cell L1 energy.
    pub fn new(
        t_bins: usize,
        channels: usize,
        data: Vec<f32>,
        response: Option<[f32; CELLS]>,
    ) -> Result<Self> {
        if t_bins == 0 || channels == 0 {
            return Err(Error::InvalidFeatures(format!(
                "t_bins={t_bins} and channels={channels} must be positive"
            )));
        }
        if data.len() != t_bins * CELLS * channels {
            return Err(Error::InvalidFeatures(format!(
                "data has {} entries, expected {t_bins}x7x7x{channels}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeatures("non-finite feature value".into()));
        }
        let response = match response {
            Some(r) => {
                if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidFeatures(
                        "response must be finite and nonnegative".into(),
                    ));
                }
                r
            }
            None => l1_response(&data, t_bins, channels),
        };
        Ok(FeatureGrid {
            t_bins,
            channels,
            data,
            response,
            mask: None,
        })
    }

    pub fn zeros(t_bins: usize, channels: usize) -> Self {
        FeatureGrid::new(t_bins, channels, vec![0.0; t_bins * CELLS * channels], None)
            .expect("zero grid is valid")
    }

    pub fn t_bins(&self) -> usize {
        self.t_bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn response(&self) -> &[f32; CELLS] {
        &self.response
    }

    pub fn response_at(&self, row: usize, col: usize) -> f32 {
        self.response[row * GRID + col]
    }

    /// The window this grid was masked with, if any.
    pub fn mask(&self) -> Option<MaskWindow> {
        self.mask
    }

    pub fn set_mask(&mut self, mask: Option<MaskWindow>) {
        self.mask = mask;
    }

    pub fn index(&self, t: usize, row: usize, col: usize, ch: usize) -> usize {
        ((t * GRID + row) * GRID + col) * self.channels + ch
    }

    pub fn get(&self, t: usize, row: usize, col: usize, ch: usize) -> f32 {
        self.data[self.index(t, row, col, ch)]
    }

    /// Channel values of one `(t, cell)`.
    pub fn cell(&self, t: usize, row: usize, col: usize) -> &[f32] {
        let i = self.index(t, row, col, 0);
        &self.data[i..i + self.channels]
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f32], &mut [f32; CELLS]) {
        (&mut self.data, &mut self.response)
    }

    pub fn total_l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs() as f64).sum()
    }
}

/// Per-cell `sum |data|` over time bins and channels.
pub fn l1_response(data: &[f32], t_bins: usize, channels: usize) -> [f32; CELLS] {
    let mut acc = [0f64; CELLS];
    for t in 0..t_bins {
        for (cell, slot) in acc.iter_mut().enumerate() {
            let start = (t * CELLS + cell) * channels;
            *slot += data[start..start + channels]
                .iter()
                .map(|v| v.abs() as f64)
                .sum::<f64>();
        }
    }
    acc.map(|v| v as f32)
}

/// `[start, end)` of part `i` when `n` items are cut into `parts` near-equal runs.
fn even_split(n: usize, parts: usize, i: usize) -> (usize, usize) {
    (i * n / parts, (i + 1) * n / parts)
}

/// Cell index along one axis; the remainder goes to the last cell.
fn axis_cells(len: usize) -> Vec<usize> {
    let step = len / GRID;
    (0..len).map(|x| (x / step).min(GRID - 1)).collect()
}

#[derive(Clone, Copy, Default)]
struct CellAcc {
    sum: f64,
    sum_sq: f64,
    nonzero: u64,
    count: u64,
    diff_sum: f64,
    diff_count: u64,
}

/// Built-in motion-energy features with `D = 4` channels per `(bin, cell)`:
///
/// 0. mean absolute difference between consecutive frames,
/// 1. mean foreground luminance,
/// 2. fraction of nonzero pixels,
/// 3. standard deviation of luminance.
///
/// Frames are cut into `t_bins` near-equal bins for channels 1–3; the
/// `n - 1` consecutive-frame differences are cut the same way for channel 0.
pub fn extract_motion_energy(clip: &RawVideo, t_bins: usize) -> Result<FeatureGrid> {
    let (w, h) = (clip.width(), clip.height());
    if w < GRID || h < GRID {
        return Err(Error::InvalidFeatures(format!(
            "degenerate cell: {w}x{h} frame cannot hold a 7x7 grid"
        )));
    }
    let n = clip.frame_count();
    if t_bins == 0 || n < t_bins + 1 {
        return Err(Error::InvalidFeatures(format!(
            "{n} frames cannot fill {t_bins} temporal bins"
        )));
    }
    let col_of = axis_cells(w);
    let row_of = axis_cells(h);
    let cell_of: Vec<usize> = (0..h)
        .flat_map(|y| {
            let r = row_of[y];
            col_of.iter().map(move |&c| r * GRID + c)
        })
        .collect();

    let mut acc = vec![CellAcc::default(); t_bins * CELLS];
    for b in 0..t_bins {
        let bin = &mut acc[b * CELLS..(b + 1) * CELLS];
        let (f0, f1) = even_split(n, t_bins, b);
        for frame in &clip.frames()[f0..f1] {
            for (&v, &cell) in frame.samples().iter().zip(&cell_of) {
                let a = &mut bin[cell];
                let v = v as f64;
                a.sum += v;
                a.sum_sq += v * v;
                a.count += 1;
                if v != 0.0 {
                    a.nonzero += 1;
                }
            }
        }
        let (d0, d1) = even_split(n - 1, t_bins, b);
        for i in d0..d1 {
            let prev = clip.frames()[i].samples();
            let next = clip.frames()[i + 1].samples();
            for ((&p, &q), &cell) in prev.iter().zip(next).zip(&cell_of) {
                let a = &mut bin[cell];
                a.diff_sum += p.abs_diff(q) as f64;
                a.diff_count += 1;
            }
        }
    }

    let mut data = Vec::with_capacity(t_bins * CELLS * MOTION_CHANNELS);
    for a in &acc {
        let count = a.count as f64;
        let mean = a.sum / count;
        let var = (a.sum_sq / count - mean * mean).max(0.0);
        data.push((a.diff_sum / a.diff_count as f64) as f32);
        data.push(mean as f32);
        data.push((a.nonzero as f64 / count) as f32);
        data.push(var.sqrt() as f32);
    }
    FeatureGrid::new(t_bins, MOTION_CHANNELS, data, None)
}

pub const MPFG_MAGIC: &[u8; 4] = b"MPFG";
pub const MPFG_VERSION: u16 = 1;
const MPFG_HEADER_LEN: usize = 26;

/// Encodes one grid as an `MPFG` record.
///
/// Little-endian: magic `"MPFG"`, version u16 = 1, t_bins u32, grid_h u32,
/// grid_w u32, channels u32, has_response u8, 3 reserved zero bytes, the
/// data as f32 in `(t, row, col, channel)` order, then, when
/// `has_response` is 1, 49 f32 response values in row-major order.
pub fn encode_feature_grid(grid: &FeatureGrid, with_response: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(MPFG_HEADER_LEN + 4 * (grid.data.len() + CELLS));
    out.extend_from_slice(MPFG_MAGIC);
    out.extend_from_slice(&MPFG_VERSION.to_le_bytes());
    for v in [
        grid.t_bins as u32,
        GRID as u32,
        GRID as u32,
        grid.channels as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(with_response as u8);
    out.extend_from_slice(&[0, 0, 0]);
    for v in &grid.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if with_response {
        for v in &grid.response {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn read_exact_or(reader: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::TruncatedPayload {
                    expected: buf.len(),
                    found: filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) => return Err(Error::InvalidFeatures(format!("reading {what}: {e}"))),
        }
    }
    Ok(())
}

fn read_f32s(reader: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    read_exact_or(reader, &mut bytes, "feature data")?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Decodes one `MPFG` record from `reader`. Returns `Ok(None)` at a clean end of stream.
pub fn decode_feature_grid(reader: &mut impl Read) -> Result<Option<FeatureGrid>> {
    let mut head = [0u8; MPFG_HEADER_LEN];
    let first = reader
        .read(&mut head[..1])
        .map_err(|e| Error::InvalidFeatures(format!("reading header: {e}")))?;
    if first == 0 {
        return Ok(None);
    }
    read_exact_or(reader, &mut head[1..], "feature header")?;
    if &head[0..4] != MPFG_MAGIC {
        return Err(Error::Header("bad magic, expected \"MPFG\"".into()));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != MPFG_VERSION {
        return Err(Error::Header(format!("unsupported MPFG version {version}")));
    }
    let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
    let (t_bins, grid_h, grid_w, channels) = (u32_at(6), u32_at(10), u32_at(14), u32_at(18));
    if grid_h as usize != GRID || grid_w as usize != GRID {
        return Err(Error::UnsupportedLayout(grid_h, grid_w));
    }
    let has_response = match head[22] {
        0 => false,
        1 => true,
        other => return Err(Error::Header(format!("has_response byte {other}"))),
    };
    if t_bins == 0 || channels == 0 {
        return Err(Error::InvalidFeatures("empty feature tensor".into()));
    }
    let data = read_f32s(reader, t_bins as usize * CELLS * channels as usize)?;
    let response = if has_response {
        let r = read_f32s(reader, CELLS)?;
        Some(<[f32; CELLS]>::try_from(r).unwrap())
    } else {
        None
    };
    FeatureGrid::new(t_bins as usize, channels as usize, data, response).map(Some)
}

pub fn save_feature_grid(grid: &FeatureGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_feature_grid(grid, true)).map_err(|e| Error::io(path, e))
}

/// Loads a single-record `MPFG` file.
pub fn load_feature_grid(path: impl AsRef<Path>) -> Result<FeatureGrid> {
    let mut grids = load_feature_sequence(path)?;
    match grids.len() {
        1 => Ok(grids.pop().unwrap()),
        0 => Err(Error::Header("empty feature file".into())),
        n => Err(Error::InvalidFeatures(format!(
            "expected one grid, file holds {n}"
        ))),
    }
}

/// Writes grids as back-to-back `MPFG` records, one per clip, in clip order.
pub fn save_feature_sequence(grids: &[FeatureGrid], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = grids
        .iter()
        .flat_map(|g| encode_feature_grid(g, true))
        .collect();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_feature_sequence(path: impl AsRef<Path>) -> Result<Vec<FeatureGrid>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = std::io::Cursor::new(bytes);
    let mut grids = Vec::new();
    while let Some(g) = decode_feature_grid(&mut cursor)? {
        grids.push(g);
    }
    Ok(grids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::{Fps, Frame};

    fn video(w: usize, h: usize, fps: Fps, frames: Vec<Vec<u8>>) -> RawVideo {
        RawVideo::new(w, h, fps, frames.into_iter().map(Frame::new).collect()).unwrap()
    }

    fn numbered(n: usize, fps: Fps) -> RawVideo {
        video(1, 1, fps, (0..n).map(|i| vec![i as u8]).collect())
    }

    #[test]
    fn five_minutes_at_20fps_gives_200_clips() {
        let v = RawVideo::new(
            1,
            1,
            Fps { num: 20, den: 1 },
            vec![Frame::new(vec![0]); 6000],
        )
        .unwrap();
        let clips = segment_clips(&v, &ClipSpec::default()).unwrap();
        assert_eq!(clips.len(), 200);
        assert!(clips.iter().all(|c| c.frame_count() == 30));
    }

    #[test]
    fn five_minutes_at_ntsc_rate_gives_200_clips() {
        let fps = Fps {
            num: 30000,
            den: 1001,
        };
        let v = RawVideo::new(1, 1, fps, vec![Frame::new(vec![0]); 8991]).unwrap();
        assert_eq!(ClipSpec::default().clips_per_video(&v).unwrap(), 200);
    }

    #[test]
    fn trailing_partial_clip_dropped() {
        let v = numbered(8, Fps { num: 2, den: 1 });
        let clips = segment_clips(&v, &ClipSpec::default()).unwrap();
        let ids: Vec<Vec<u8>> = clips
            .iter()
            .map(|c| c.frames().iter().map(|f| f.samples()[0]).collect())
            .collect();
        assert_eq!(ids, vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn too_short_video_errors() {
        let v = numbered(20, Fps { num: 20, den: 1 });
        assert!(matches!(
            segment_clips(&v, &ClipSpec::default()),
            Err(Error::VideoTooShort { .. })
        ));
        assert!(ClipSpec::new(0.0).is_err());
    }

    #[test]
    fn zero_clip_has_zero_features() {
        let v = video(14, 14, Fps { num: 10, den: 1 }, vec![vec![0; 196]; 5]);
        let g = extract_motion_energy(&v, 4).unwrap();
        assert!(g.data().iter().all(|&x| x == 0.0));
        assert!(g.response().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn static_clip_has_no_temporal_channel() {
        let mut frame = vec![0u8; 196];
        frame[0] = 50;
        frame[15] = 90;
        let v = video(14, 14, Fps { num: 10, den: 1 }, vec![frame; 5]);
        let g = extract_motion_energy(&v, 2).unwrap();
        for t in 0..2 {
            let c = g.cell(t, 0, 0);
            assert_eq!(c[0], 0.0);
            assert!(c[1] > 0.0 && c[2] > 0.0 && c[3] > 0.0);
            assert_eq!(g.cell(t, 3, 3), &[0.0; 4]);
        }
    }

    #[test]
    fn two_frame_patch_hand_computed() {
        // 14x14 -> 2x2 pixel cells; a patch filling cell (0,0) dims from 200 to 100
        let mut a = vec![0u8; 196];
        let mut b = vec![0u8; 196];
        for (y, x) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            a[y * 14 + x] = 200;
            b[y * 14 + x] = 100;
        }
        let v = video(14, 14, Fps { num: 2, den: 1 }, vec![a, b]);
        let g = extract_motion_energy(&v, 1).unwrap();
        assert_eq!(g.cell(0, 0, 0), &[100.0, 150.0, 1.0, 50.0]);
        assert_eq!(g.response_at(0, 0), 301.0);
        let others: f32 = g.response().iter().skip(1).sum();
        assert_eq!(others, 0.0);
    }

    #[test]
    fn remainder_pixels_go_to_last_cell() {
        let cells = axis_cells(16);
        assert_eq!(cells[13], 6);
        assert_eq!(cells[15], 6);
        assert_eq!(cells[11], 5);
        let mut frame = vec![0u8; 16 * 16];
        frame[15 * 16 + 15] = 9;
        let v = video(16, 16, Fps { num: 2, den: 1 }, vec![frame.clone(), frame]);
        let g = extract_motion_energy(&v, 1).unwrap();
        assert!(g.response_at(6, 6) > 0.0);
    }

    #[test]
    fn degenerate_geometry_rejected() {
        let v = video(6, 14, Fps { num: 2, den: 1 }, vec![vec![0; 84]; 3]);
        assert!(extract_motion_energy(&v, 1).is_err());
        let v = video(14, 14, Fps { num: 2, den: 1 }, vec![vec![0; 196]; 3]);
        assert!(extract_motion_energy(&v, 3).is_err());
    }

    #[test]
    fn mpfg_round_trip_with_and_without_response() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f32> = (0..4 * CELLS * 4).map(|i| i as f32 * 0.25 - 3.0).collect();
        let mut response = [0f32; CELLS];
        response[10] = 7.5;
        let g = FeatureGrid::new(4, 4, data, Some(response)).unwrap();
        let path = dir.path().join("g.mpfg");
        save_feature_grid(&g, &path).unwrap();
        assert_eq!(load_feature_grid(&path).unwrap(), g);

        let zero = FeatureGrid::zeros(4, 4);
        std::fs::write(&path, encode_feature_grid(&zero, false)).unwrap();
        let loaded = load_feature_grid(&path).unwrap();
        assert!(loaded.response().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn mpfg_rejects_other_layouts_and_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.mpfg");
        let mut bytes = encode_feature_grid(&FeatureGrid::zeros(1, 1), false);
        bytes[10..14].copy_from_slice(&8u32.to_le_bytes());
        bytes[14..18].copy_from_slice(&8u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = load_feature_grid(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported spatial layout"));

        let mut bytes = encode_feature_grid(&FeatureGrid::zeros(1, 1), false);
        bytes[MPFG_HEADER_LEN..MPFG_HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_feature_grid(&path).is_err());

        let mut bytes = encode_feature_grid(&FeatureGrid::zeros(1, 1), false);
        bytes[0] = b'Z';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_feature_grid(&path), Err(Error::Header(_))));
    }

    #[test]
    fn feature_sequence_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let grids: Vec<FeatureGrid> = (0..3)
            .map(|k| FeatureGrid::new(1, 2, vec![k as f32; CELLS * 2], None).unwrap())
            .collect();
        let path = dir.path().join("seq.mpfg");
        save_feature_sequence(&grids, &path).unwrap();
        assert_eq!(load_feature_sequence(&path).unwrap(), grids);
    }
}
