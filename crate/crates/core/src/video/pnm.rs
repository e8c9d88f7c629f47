//! Binary PGM (`P5`) and PPM (`P6`) frames with maxval 255.

use std::path::Path;

use super::{Fps, Frame, RawVideo};
use crate::error::{Error, Result};

/// ITU-R BT.601 luma, rounded half away from zero.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn next_token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Header("unexpected end of PNM header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn next_usize(&mut self) -> Result<usize> {
        let tok = self.next_token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::Header(format!(
                    "expected integer in PNM header, found {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

/// Decodes one binary PGM or PPM image to `(width, height, luminance)`.
pub fn decode_pnm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut tok = Tokens { bytes, pos: 0 };
    let magic = tok.next_token()?;
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::Header(format!(
                "unsupported PNM magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = tok.next_usize()?;
    let height = tok.next_usize()?;
    let maxval = tok.next_usize()?;
    if maxval != 255 {
        return Err(Error::Header(format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Header("zero PNM dimension".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    let data_start = tok.pos + 1;
    let need = width * height * channels;
    let raster = bytes.get(data_start..).unwrap_or(&[]);
    if raster.len() < need {
        return Err(Error::TruncatedPayload {
            expected: need,
            found: raster.len(),
        });
    }
    let raster = &raster[..need];
    let samples = if channels == 1 {
        raster.to_vec()
    } else {
        raster
            .chunks_exact(3)
            .map(|p| luminance(p[0], p[1], p[2]))
            .collect()
    };
    Ok((width, height, samples))
}

pub fn encode_pgm(width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

pub fn write_pgm(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    samples: &[u8],
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(width, height, samples)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes)
}

/// Reads every `.pgm`/`.ppm` file of `dir`, in lexicographic file-name order.
pub fn read_frame_dir(dir: &Path, fps: Fps) -> Result<RawVideo> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("ppm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::NoFrames);
    }
    let mut dims = None;
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let (w, h, samples) = read_pgm(p)?;
        match dims {
            None => dims = Some((w, h)),
            Some(expected) if expected != (w, h) => {
                return Err(Error::FrameDimensions {
                    expected,
                    got: (w, h),
                })
            }
            _ => {}
        }
        frames.push(Frame::new(samples));
    }
    let (w, h) = dims.unwrap();
    RawVideo::new(w, h, fps, frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_red_luminance() {
        assert_eq!(luminance(255, 0, 0), 76);
        assert_eq!(luminance(255, 255, 255), 255);
        assert_eq!(luminance(0, 0, 0), 0);
    }

    #[test]
    fn pgm_with_comment_parses() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([9, 200]);
        assert_eq!(decode_pnm(&bytes).unwrap(), (2, 1, vec![9, 200]));
    }

    #[test]
    fn ppm_is_reduced_to_luminance() {
        let mut bytes = b"P6 1 1 255\n".to_vec();
        bytes.extend([255, 0, 0]);
        assert_eq!(decode_pnm(&bytes).unwrap(), (1, 1, vec![76]));
    }

    #[test]
    fn bad_maxval_and_short_raster() {
        assert!(decode_pnm(b"P5 1 1 65535\n\0\0").is_err());
        assert!(matches!(
            decode_pnm(b"P5 2 2 255\n\0"),
            Err(Error::TruncatedPayload { .. })
        ));
        assert!(decode_pnm(b"P2 1 1 255\n0").is_err());
    }

    #[test]
    fn frame_dir_checks_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(dir.path().join("a.pgm"), 2, 2, &[1, 2, 3, 4]).unwrap();
        write_pgm(dir.path().join("b.pgm"), 1, 2, &[1, 2]).unwrap();
        assert!(matches!(
            read_frame_dir(dir.path(), Fps { num: 1, den: 1 }),
            Err(Error::FrameDimensions { .. })
        ));
    }

    #[test]
    fn empty_dir_has_no_frames() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_frame_dir(dir.path(), Fps { num: 1, den: 1 }),
            Err(Error::NoFrames)
        ));
    }
}
