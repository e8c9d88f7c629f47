//! The `MPVR` video container.
//!
//! Little-endian layout:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "MPVR"
//!      4     2  version (u16) = 1
//!      6     4  width (u32)
//!     10     4  height (u32)
//!     14     4  fps numerator (u32)
//!     18     4  fps denominator (u32)
//!     22     4  frame count (u32)
//!     26     1  channels (u8) = 1
//!     27     7  reserved, zero
//!     34     -  frame_count * width * height luminance bytes, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Fps, Frame, RawVideo};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MPVR";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 34;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub width: u32,
    pub height: u32,
    pub fps: Fps,
    pub frame_count: u32,
}

impl ContainerHeader {
    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(MAGIC);
        out[4..6].copy_from_slice(&VERSION.to_le_bytes());
        out[6..10].copy_from_slice(&self.width.to_le_bytes());
        out[10..14].copy_from_slice(&self.height.to_le_bytes());
        out[14..18].copy_from_slice(&self.fps.num.to_le_bytes());
        out[18..22].copy_from_slice(&self.fps.den.to_le_bytes());
        out[22..26].copy_from_slice(&self.frame_count.to_le_bytes());
        out[26] = 1;
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Header(format!(
                "container header needs {HEADER_LEN} bytes, found {}",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Header("bad magic, expected \"MPVR\"".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Header(format!("unsupported version {version}")));
        }
        let channels = bytes[26];
        if channels != 1 {
            return Err(Error::Header(format!(
                "unsupported channel count {channels}"
            )));
        }
        if bytes[27..34].iter().any(|&b| b != 0) {
            return Err(Error::Header("reserved bytes must be zero".into()));
        }
        let header = ContainerHeader {
            width: u32_at(6),
            height: u32_at(10),
            fps: Fps {
                num: u32_at(14),
                den: u32_at(18),
            },
            frame_count: u32_at(22),
        };
        if header.width == 0 || header.height == 0 {
            return Err(Error::Header("zero frame dimension".into()));
        }
        if header.fps.num == 0 || header.fps.den == 0 {
            return Err(Error::Header("fps terms must be positive".into()));
        }
        if header.frame_count == 0 {
            return Err(Error::NoFrames);
        }
        Ok(header)
    }
}

/// Frame-at-a-time reader, used where holding the whole video is wasteful.
pub struct ContainerReader {
    path: PathBuf,
    reader: BufReader<File>,
    header: ContainerHeader,
    remaining: u32,
}

impl ContainerReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut reader = BufReader::with_capacity(1 << 16, file);
        let mut head = Vec::with_capacity(HEADER_LEN);
        (&mut reader)
            .take(HEADER_LEN as u64)
            .read_to_end(&mut head)
            .map_err(|e| Error::io(&path, e))?;
        let header = ContainerHeader::parse(&head)?;
        Ok(ContainerReader {
            path,
            reader,
            remaining: header.frame_count,
            header,
        })
    }

    pub fn header(&self) -> &ContainerHeader {
        &self.header
    }

    /// Fills `buf` (resized to one frame) with the next frame. Returns
    /// `Ok(false)` once all declared frames were read, after checking that
    /// no payload bytes remain.
    pub fn next_frame(&mut self, buf: &mut Vec<u8>) -> Result<bool> {
        let frame_len = self.header.frame_len();
        if self.remaining == 0 {
            let mut probe = [0u8; 1];
            let extra = self
                .reader
                .read(&mut probe)
                .map_err(|e| Error::io(&self.path, e))?;
            if extra != 0 {
                return Err(Error::Header("trailing bytes after payload".into()));
            }
            return Ok(false);
        }
        buf.resize(frame_len, 0);
        let mut filled = 0;
        while filled < frame_len {
            let n = self
                .reader
                .read(&mut buf[filled..])
                .map_err(|e| Error::io(&self.path, e))?;
            if n == 0 {
                let done = (self.header.frame_count - self.remaining) as usize;
                return Err(Error::TruncatedPayload {
                    expected: self.header.frame_count as usize * frame_len,
                    found: done * frame_len + filled,
                });
            }
            filled += n;
        }
        self.remaining -= 1;
        Ok(true)
    }
}

pub fn read_container(path: impl AsRef<Path>) -> Result<RawVideo> {
    let mut reader = ContainerReader::open(path)?;
    let header = *reader.header();
    let mut frames = Vec::with_capacity(header.frame_count as usize);
    let mut buf = Vec::new();
    while reader.next_frame(&mut buf)? {
        frames.push(Frame::new(std::mem::take(&mut buf)));
    }
    RawVideo::new(
        header.width as usize,
        header.height as usize,
        header.fps,
        frames,
    )
}

pub fn write_container(video: &RawVideo, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if video.frame_count() == 0 {
        return Err(Error::NoFrames);
    }
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidVideo(format!("{what} {v} exceeds u32")))
    };
    let header = ContainerHeader {
        width: to_u32(video.width(), "width")?,
        height: to_u32(video.height(), "height")?,
        fps: video.fps(),
        frame_count: to_u32(video.frame_count(), "frame count")?,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write =
        |w: &mut BufWriter<File>, bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(&mut w, &header.to_bytes())?;
    for frame in video.frames() {
        write(&mut w, frame.samples())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
