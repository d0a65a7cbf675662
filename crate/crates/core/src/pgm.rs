//! PGM (portable graymap) reading and writing.
//!
//! Reads plain (`P2`) and binary (`P5`) files with `maxval` up to 65535;
//! 16-bit binary samples are big-endian. Writes `P5` only.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::GrayFrame;
use crate::io::atomic_write;

pub fn load_frame(path: &Path) -> Result<GrayFrame> {
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Pgm(msg) => Error::Pgm(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes `frame` as binary PGM.
///
/// With `normalize`, `[min, max]` maps linearly onto `[0, 255]` (a constant
/// frame becomes all zeros). Otherwise samples are rounded and clamped to
/// `[0, 65535]`; the file uses `maxval` 255 when every sample fits in a byte
/// and 65535 otherwise.
pub fn save_frame(frame: &GrayFrame, path: &Path, normalize: bool) -> Result<()> {
    atomic_write(path, &encode(frame, normalize))
}

pub fn encode(frame: &GrayFrame, normalize: bool) -> Vec<u8> {
    let samples: Vec<u16> = if normalize {
        let (lo, hi) = frame.min_max();
        let span = hi - lo;
        frame
            .data()
            .iter()
            .map(|&v| {
                if span > 0.0 {
                    ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u16
                } else {
                    0
                }
            })
            .collect()
    } else {
        frame
            .data()
            .iter()
            .map(|&v| v.round().clamp(0.0, 65535.0) as u16)
            .collect()
    };
    let wide = samples.iter().any(|&s| s > 255);
    let maxval = if wide { 65535 } else { 255 };
    let mut out = format!("P5\n{} {}\n{}\n", frame.width(), frame.height(), maxval).into_bytes();
    if wide {
        out.extend(samples.iter().flat_map(|s| s.to_be_bytes()));
    } else {
        out.extend(samples.iter().map(|&s| s as u8));
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<GrayFrame> {
    let mut cur = Cursor { bytes, pos: 0 };
    let binary = match cur.bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(Error::Pgm("unsupported format, expected P2 or P5".into())),
    };
    cur.pos = 2;
    let width = cur.header_int("width")?;
    let height = cur.header_int("height")?;
    let maxval = cur.header_int("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Pgm(format!("bad dimensions {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Pgm(format!("maxval {maxval} outside 1..=65535")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Pgm("dimensions overflow".into()))?;

    let data = if binary {
        // exactly one whitespace byte separates the header from the raster
        match cur.bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(Error::Pgm("missing whitespace after maxval".into())),
        }
        let raster = &cur.bytes[cur.pos..];
        let bps = if maxval > 255 { 2 } else { 1 };
        if raster.len() < n * bps {
            return Err(Error::Pgm(format!(
                "truncated raster: need {} bytes, have {}",
                n * bps,
                raster.len()
            )));
        }
        let samples: Vec<usize> = if bps == 2 {
            raster[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as usize)
                .collect()
        } else {
            raster[..n].iter().map(|&b| b as usize).collect()
        };
        if let Some(s) = samples.iter().find(|&&s| s > maxval) {
            return Err(Error::Pgm(format!("sample {s} exceeds maxval {maxval}")));
        }
        samples.into_iter().map(|s| s as f64).collect()
    } else {
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let s = cur
                .int()
                .map_err(|_| Error::Pgm(format!("truncated raster: sample {i} of {n}")))?;
            if s > maxval {
                return Err(Error::Pgm(format!("sample {s} exceeds maxval {maxval}")));
            }
            data.push(s as f64);
        }
        data
    };
    GrayFrame::new(width, height, data)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn int(&mut self) -> std::result::Result<usize, ()> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(())
    }

    fn header_int(&mut self, what: &str) -> Result<usize> {
        self.int()
            .map_err(|_| Error::Pgm(format!("malformed header: bad {what}")))
    }
}
