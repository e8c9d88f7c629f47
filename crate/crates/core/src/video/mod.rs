//! Grayscale video representation and on-disk formats.
//!
//! A [`RawVideo`] is an immutable, validated sequence of 8-bit luminance
//! frames with a uniform rational frame rate. Two sources are supported:
//! the `MPVR` container (see [`container`]) and directories of binary
//! PGM/PPM frames (see [`pnm`]).

pub mod container;
pub mod pnm;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use container::{read_container, write_container};

/// Frame rate used for frame directories when the caller gives none.
pub const DEFAULT_DIRECTORY_FPS: Fps = Fps { num: 20, den: 1 };

/// Rational frames-per-second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidVideo(format!(
                "fps {num}/{den} must have positive numerator and denominator"
            )));
        }
        Ok(Fps { num, den })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Timestamp of frame `index` in seconds.
    pub fn frame_time(self, index: usize) -> f64 {
        index as f64 * self.den as f64 / self.num as f64
    }
}

/// Row-major 8-bit luminance samples of one frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame(Vec<u8>);

impl Frame {
    pub fn new(samples: Vec<u8>) -> Self {
        Frame(samples)
    }

    pub fn filled(len: usize, value: u8) -> Self {
        Frame(vec![value; len])
    }

    pub fn samples(&self) -> &[u8] {
        &self.0
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A validated grayscale video: at least one frame, every frame `width * height`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawVideo {
    width: usize,
    height: usize,
    fps: Fps,
    frames: Vec<Frame>,
}

impl RawVideo {
    pub fn new(width: usize, height: usize, fps: Fps, frames: Vec<Frame>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidVideo(format!(
                "frame size {width}x{height} must be nonzero"
            )));
        }
        Fps::new(fps.num, fps.den)?;
        if frames.is_empty() {
            return Err(Error::NoFrames);
        }
        let expected = width * height;
        for frame in &frames {
            if frame.len() != expected {
                return Err(Error::InvalidVideo(format!(
                    "frame has {} samples, expected {expected}",
                    frame.len()
                )));
            }
        }
        Ok(RawVideo {
            width,
            height,
            fps,
            frames,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    /// Duration in seconds, `frame_count * den / num`.
    pub fn duration(&self) -> f64 {
        self.fps.frame_time(self.frames.len())
    }

    /// Exact duration as a reduced-free rational `(numerator, denominator)`.
    pub fn duration_rational(&self) -> (u64, u64) {
        (
            self.frames.len() as u64 * self.fps.den as u64,
            self.fps.num as u64,
        )
    }

    /// Frames `range` as a new video with the same geometry and frame rate.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<RawVideo> {
        if range.start >= range.end || range.end > self.frames.len() {
            return Err(Error::InvalidVideo(format!(
                "frame range {range:?} outside 0..{}",
                self.frames.len()
            )));
        }
        RawVideo::new(
            self.width,
            self.height,
            self.fps,
            self.frames[range].to_vec(),
        )
    }
}

/// Loads a video from an `MPVR` container file or a directory of PGM/PPM frames.
///
/// Frame directories carry no timing, so they are assigned
/// [`DEFAULT_DIRECTORY_FPS`]; use [`load_video_with_fps`] to override.
pub fn load_video(path: impl AsRef<Path>) -> Result<RawVideo> {
    load_video_with_fps(path, None)
}

/// As [`load_video`], with an explicit frame rate for frame directories.
/// Containers always use the frame rate stored in their header.
pub fn load_video_with_fps(path: impl AsRef<Path>, fps: Option<Fps>) -> Result<RawVideo> {
    let path = path.as_ref();
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        pnm::read_frame_dir(path, fps.unwrap_or(DEFAULT_DIRECTORY_FPS))
    } else {
        read_container(path)
    }
}

/// Writes `video` as an `MPVR` container.
pub fn save_video(video: &RawVideo, path: impl AsRef<Path>) -> Result<()> {
    write_container(video, path)
}

/// Keeps frames whose timestamp `i / fps` lies in `[start, end)`.
pub fn crop_time(video: &RawVideo, start: f64, end: f64) -> Result<RawVideo> {
    let duration = video.duration();
    if !(start.is_finite() && end.is_finite()) || start < 0.0 || end > duration + 1e-9 {
        return Err(Error::InvalidVideo(format!(
            "crop window [{start}, {end}) outside [0, {duration}]"
        )));
    }
    if start >= end {
        return Err(Error::EmptyWindow { start, end });
    }
    let fps = video.fps();
    let frames: Vec<Frame> = video
        .frames()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let t = fps.frame_time(*i);
            start <= t && t < end
        })
        .map(|(_, f)| f.clone())
        .collect();
    if frames.is_empty() {
        return Err(Error::EmptyWindow { start, end });
    }
    RawVideo::new(video.width(), video.height(), fps, frames)
}
