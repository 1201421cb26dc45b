//! Portable graymap (P2 ASCII / P5 binary) reading and writing.
//!
//! Samples map linearly between `0..=maxval` and `[0, 1]`. Binary files with
//! `maxval > 255` store two big-endian bytes per sample.

use std::fs;
use std::path::Path;

use tacmap_core::GrayImage;

use crate::error::{Error, Result};

pub const MAX_MAXVAL: u32 = 65535;

/// Encoding used by [`write_pgm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PgmFormat {
    Ascii,
    #[default]
    Binary,
}

pub fn load_gray_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.buf.get(self.pos) {
            if b == b'#' {
                while self.buf.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.buf.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            self.pos += 1;
        }
        (self.pos > start).then(|| std::str::from_utf8(&self.buf[start..self.pos]).ok()).flatten()
    }
}

/// Decodes a PGM held in memory; `path` only labels errors.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let header = |msg: &str| Error::MalformedHeader { path: path.to_path_buf(), msg: msg.into() };
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let binary = match cur.token() {
        Some("P2") => false,
        Some("P5") => true,
        _ => return Err(header("expected magic P2 or P5")),
    };
    let mut field = |name: &str| -> Result<u32> {
        let tok = cur.token().ok_or_else(|| header(&format!("missing {name}")))?;
        tok.parse::<u32>().map_err(|_| header(&format!("invalid {name} {tok:?}")))
    };
    let cols = field("width")? as usize;
    let rows = field("height")? as usize;
    let maxval = field("maxval")?;
    if rows == 0 || cols == 0 {
        return Err(header("zero dimension"));
    }
    if maxval == 0 || maxval > MAX_MAXVAL {
        return Err(Error::UnsupportedDepth { path: path.to_path_buf(), maxval });
    }
    let n = rows.checked_mul(cols).ok_or_else(|| header("dimensions overflow"))?;
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = cur.pos + 1;
        let width = if maxval > 255 { 2 } else { 1 };
        let raster = bytes
            .get(start..start + n * width)
            .ok_or_else(|| Error::parse(path, format!("raster truncated: expected {} bytes", n * width)))?;
        for chunk in raster.chunks_exact(width) {
            let v = if width == 2 { u16::from_be_bytes([chunk[0], chunk[1]]) as u32 } else { chunk[0] as u32 };
            if v > maxval {
                return Err(Error::parse(path, format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    } else {
        for i in 0..n {
            let tok = cur.token().ok_or_else(|| Error::parse(path, format!("expected {n} samples, found {i}")))?;
            let v: u32 = tok.parse().map_err(|_| Error::parse(path, format!("invalid sample {tok:?}")))?;
            if v > maxval {
                return Err(Error::parse(path, format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    }
    Ok(GrayImage::new(rows, cols, data)?)
}

pub fn encode_pgm(img: &GrayImage, maxval: u32, format: PgmFormat) -> Result<Vec<u8>> {
    if maxval == 0 || maxval > MAX_MAXVAL {
        return Err(Error::Config(format!("maxval {maxval} outside 1..={MAX_MAXVAL}")));
    }
    let quantize = |v: f64| (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
    let magic = match format {
        PgmFormat::Ascii => "P2",
        PgmFormat::Binary => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.cols(), img.rows()).into_bytes();
    match format {
        PgmFormat::Ascii => {
            for row in img.data().chunks(img.cols()) {
                let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        PgmFormat::Binary => {
            for &v in img.data() {
                let q = quantize(v);
                if maxval > 255 {
                    out.extend_from_slice(&(q as u16).to_be_bytes());
                } else {
                    out.push(q as u8);
                }
            }
        }
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, img: &GrayImage, maxval: u32, format: PgmFormat) -> Result<()> {
    let bytes = encode_pgm(img, maxval, format)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Scales non-negative grid values so the largest becomes 1. An all-zero grid stays zero.
pub fn heatmap_image(values: &[f64], rows: usize, cols: usize) -> Result<GrayImage> {
    let max = values.iter().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let data = values.iter().map(|&v| (v * scale).clamp(0.0, 1.0)).collect();
    Ok(GrayImage::new(rows, cols, data)?)
}

/// Writes a grid as a heatmap whose largest cell maps to `maxval`.
pub fn write_heatmap(path: &Path, values: &[f64], rows: usize, cols: usize, maxval: u32) -> Result<()> {
    write_pgm(path, &heatmap_image(values, rows, cols)?, maxval, PgmFormat::Binary)
}
