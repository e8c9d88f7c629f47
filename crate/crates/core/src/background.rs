//! Per-pixel temporal-median background and foreground extraction.
//!
//! The background of a fixed-camera recording is the per-pixel median of
//! luminance over every frame. For even frame counts the lower median is
//! used so the result stays on the 8-bit lattice.

use std::path::Path;

use crate::error::{Error, Result};
use crate::video::container::ContainerReader;
use crate::video::{pnm, Frame, RawVideo};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackgroundModel {
    pub width: usize,
    pub height: usize,
    pub median_frame: Frame,
    pub source_frame_count: usize,
}

impl BackgroundModel {
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        pnm::write_pgm(path, self.width, self.height, self.median_frame.samples())
    }
}

/// Index of the lower median in a sorted series of `n` values.
fn lower_median_rank(n: usize) -> usize {
    (n - 1) / 2
}

/// Sort-based per-pixel lower median over all frames.
pub fn compute_background(video: &RawVideo) -> BackgroundModel {
    let n = video.frame_count();
    let rank = lower_median_rank(n);
    let mut column = vec![0u8; n];
    let median: Vec<u8> = (0..video.pixel_count())
        .map(|p| {
            for (slot, frame) in column.iter_mut().zip(video.frames()) {
                *slot = frame.samples()[p];
            }
            *column.select_nth_unstable(rank).1
        })
        .collect();
    BackgroundModel {
        width: video.width(),
        height: video.height(),
        median_frame: Frame::new(median),
        source_frame_count: n,
    }
}

/// Histogram bin counter width.
pub trait Counter: Copy + Default {
    fn bump(&mut self);
    fn get(self) -> u64;
    fn merge(&mut self, other: Self);
}

impl Counter for u16 {
    fn bump(&mut self) {
        *self += 1;
    }
    fn get(self) -> u64 {
        self as u64
    }
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

impl Counter for u32 {
    fn bump(&mut self) {
        *self += 1;
    }
    fn get(self) -> u64 {
        self as u64
    }
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

/// One 256-bin luminance histogram per pixel.
///
/// Histograms built over disjoint frame ranges can be merged, so frame
/// ranges may be accumulated independently.
#[derive(Debug, Clone)]
pub struct PixelHistograms<C = u32> {
    pixels: usize,
    frames: usize,
    bins: Vec<C>,
}

impl<C: Counter> PixelHistograms<C> {
    pub fn new(pixels: usize) -> Self {
        PixelHistograms {
            pixels,
            frames: 0,
            bins: vec![C::default(); pixels * 256],
        }
    }

    pub fn counter_cells(&self) -> usize {
        self.bins.len()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn add_frame(&mut self, samples: &[u8]) {
        debug_assert_eq!(samples.len(), self.pixels);
        for (hist, &v) in self.bins.chunks_exact_mut(256).zip(samples) {
            hist[v as usize].bump();
        }
        self.frames += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.pixels, other.pixels, "histogram geometry differs");
        for (a, &b) in self.bins.iter_mut().zip(&other.bins) {
            a.merge(b);
        }
        self.frames += other.frames;
    }

    /// Lower median per pixel. Panics when no frame was added.
    pub fn median(&self) -> Vec<u8> {
        assert!(self.frames > 0, "median of an empty histogram");
        let rank = lower_median_rank(self.frames) as u64;
        self.bins
            .chunks_exact(256)
            .map(|hist| {
                let mut seen = 0u64;
                for (value, &count) in hist.iter().enumerate() {
                    seen += count.get();
                    if seen > rank {
                        return value as u8;
                    }
                }
                unreachable!("histogram total below frame count")
            })
            .collect()
    }
}

fn stream_into<C: Counter>(mut reader: ContainerReader, pixels: usize) -> Result<Vec<u8>> {
    let mut hist = PixelHistograms::<C>::new(pixels);
    let mut buf = Vec::with_capacity(pixels);
    while reader.next_frame(&mut buf)? {
        hist.add_frame(&buf);
    }
    Ok(hist.median())
}

/// Single-pass histogram median over an `MPVR` file, without loading the
/// video. Uses 16-bit counters when the frame count allows it.
pub fn compute_background_streaming(path: impl AsRef<Path>) -> Result<BackgroundModel> {
    let reader = ContainerReader::open(path)?;
    let header = *reader.header();
    let pixels = header.frame_len();
    let median = if header.frame_count <= u16::MAX as u32 {
        stream_into::<u16>(reader, pixels)?
    } else {
        stream_into::<u32>(reader, pixels)?
    };
    Ok(BackgroundModel {
        width: header.width as usize,
        height: header.height as usize,
        median_frame: Frame::new(median),
        source_frame_count: header.frame_count as usize,
    })
}

/// Histogram median over an in-memory video.
pub fn compute_background_histogram(video: &RawVideo) -> BackgroundModel {
    let mut hist = PixelHistograms::<u32>::new(video.pixel_count());
    for frame in video.frames() {
        hist.add_frame(frame.samples());
    }
    BackgroundModel {
        width: video.width(),
        height: video.height(),
        median_frame: Frame::new(hist.median()),
        source_frame_count: video.frame_count(),
    }
}

/// Per pixel and frame `d = |frame - median|`, kept when `d >= threshold`.
pub fn extract_foreground(
    video: &RawVideo,
    bg: &BackgroundModel,
    threshold: u8,
) -> Result<RawVideo> {
    if bg.width != video.width() || bg.height != video.height() {
        return Err(Error::DimensionMismatch(format!(
            "video is {}x{}, background is {}x{}",
            video.width(),
            video.height(),
            bg.width,
            bg.height
        )));
    }
    let median = bg.median_frame.samples();
    let frames = video
        .frames()
        .iter()
        .map(|frame| {
            Frame::new(
                frame
                    .samples()
                    .iter()
                    .zip(median)
                    .map(|(&v, &m)| {
                        let d = v.abs_diff(m);
                        if d >= threshold {
                            d
                        } else {
                            0
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    RawVideo::new(video.width(), video.height(), video.fps(), frames)
}
