//! Image and tactile-frame containers, resampling and tactile preprocessing.
//!
//! Intensities are normalized to `[0, 1]` with bright meaning object or contact,
//! so visual-map crops and tactile images are directly comparable.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Rows of the tactile sensor array.
pub const SENSOR_ROWS: usize = 14;
/// Columns of the tactile sensor array.
pub const SENSOR_COLS: usize = 6;
/// Physical pitch of one sensing cell.
pub const SENSOR_CELL_MM: f64 = 3.4;
/// Default upsampling factor from the sensor grid to the visual-map scale.
pub const DEFAULT_SCALE_FACTOR: usize = 3;
/// Default visual map resolution (square).
pub const DEFAULT_MAP_SIZE: usize = 120;

/// Dense row-major grid of intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch { expected: rows * cols, actual: data.len() });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![clamp_unit(value); rows * cols] }
    }

    /// Builds an image from a per-pixel function. Values are clamped into `[0, 1]`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(clamp_unit(f(r, c)));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Copies the `rows x cols` region starting at `(row0, col0)`.
    pub fn crop(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions { rows, cols });
        }
        if row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(Error::ImageTooSmall {
                rows: self.rows,
                cols: self.cols,
                min_rows: row0 + rows,
                min_cols: col0 + cols,
            });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in row0..row0 + rows {
            let start = r * self.cols + col0;
            data.extend_from_slice(&self.data[start..start + cols]);
        }
        Ok(Self { rows, cols, data })
    }

    /// Mean of the `rows x cols` block at `(row0, col0)`, summed row-major.
    ///
    /// Panics if the block is empty or leaves the image.
    pub fn block_mean(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> f64 {
        assert!(rows > 0 && cols > 0 && row0 + rows <= self.rows && col0 + cols <= self.cols);
        let mut sum = 0.0;
        for r in row0..row0 + rows {
            let start = r * self.cols + col0;
            sum += self.data[start..start + cols].iter().sum::<f64>();
        }
        sum / (rows * cols) as f64
    }

    /// Like [`crop`](Self::crop), but every pixel takes the mean of its `cell x cell`
    /// block, blocks anchored at `(row0, col0)`. This is how a window looks to a
    /// sensor with `cell`-pixel pitch after nearest-neighbour upsampling.
    pub fn cell_averaged_crop(&self, row0: usize, col0: usize, rows: usize, cols: usize, cell: usize) -> Result<Self> {
        if cell == 0 || !rows.is_multiple_of(cell) || !cols.is_multiple_of(cell) {
            return Err(Error::InvalidParameter("crop size must be a multiple of the cell size"));
        }
        let mut out = self.crop(row0, col0, rows, cols)?;
        let (cr, cc) = (rows / cell, cols / cell);
        for br in 0..cr {
            for bc in 0..cc {
                let mean = self.block_mean(row0 + br * cell, col0 + bc * cell, cell, cell);
                for r in br * cell..(br + 1) * cell {
                    out.data[r * cols + bc * cell..r * cols + (bc + 1) * cell].fill(mean);
                }
            }
        }
        Ok(out)
    }

    /// Counter-clockwise quarter turn: `out(r, c) = self(c, cols - 1 - r)`.
    pub fn rotate90(&self) -> Self {
        let (rows, cols) = (self.cols, self.rows);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(self.get(c, self.cols - 1 - r));
            }
        }
        Self { rows, cols, data }
    }

    /// Multiplies every intensity by `factor`, clamping into `[0, 1]`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| clamp_unit(v * factor)).collect(),
        }
    }
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// One raw pressure reading from the sensor array.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileFrame {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TactileFrame {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch { expected: rows * cols, actual: data.len() });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * factor).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleKernel {
    #[default]
    Nearest,
    Bilinear,
}

/// Rejection thresholds and upsampling for raw tactile frames.
///
/// Thresholds are in raw pressure units; with the simulator full scale is `1.0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub max_threshold: f64,
    pub sum_threshold: f64,
    pub scale_factor: usize,
    pub kernel: ResampleKernel,
}

impl PreprocessConfig {
    /// Defaults scaled to a sensor with the given full-scale reading.
    pub fn for_full_scale(full_scale: f64) -> Self {
        let max_threshold = 0.05 * full_scale;
        Self {
            max_threshold,
            sum_threshold: 3.0 * max_threshold,
            scale_factor: DEFAULT_SCALE_FACTOR,
            kernel: ResampleKernel::Nearest,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale_factor == 0 {
            return Err(Error::InvalidParameter("scale_factor must be >= 1"));
        }
        if !(self.max_threshold >= 0.0 && self.sum_threshold >= 0.0) {
            return Err(Error::InvalidParameter("thresholds must be >= 0"));
        }
        Ok(())
    }
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self::for_full_scale(1.0)
    }
}

/// Resamples to `out_rows x out_cols` with pixel-center alignment.
pub fn resample(img: &GrayImage, out_rows: usize, out_cols: usize, kernel: ResampleKernel) -> Result<GrayImage> {
    if out_rows == 0 || out_cols == 0 {
        return Err(Error::InvalidDimensions { rows: out_rows, cols: out_cols });
    }
    if img.rows == 0 || img.cols == 0 {
        return Err(Error::InvalidDimensions { rows: img.rows, cols: img.cols });
    }
    if out_rows == img.rows && out_cols == img.cols {
        return Ok(img.clone());
    }
    let row_scale = (img.rows, out_rows);
    let col_scale = (img.cols, out_cols);
    let out = match kernel {
        ResampleKernel::Nearest => GrayImage::from_fn(out_rows, out_cols, |r, c| {
            let sr = nearest_source(r, row_scale, img.rows);
            let sc = nearest_source(c, col_scale, img.cols);
            img.get(sr, sc)
        }),
        ResampleKernel::Bilinear => GrayImage::from_fn(out_rows, out_cols, |r, c| {
            let (r0, r1, fr) = linear_source(r, row_scale, img.rows);
            let (c0, c1, fc) = linear_source(c, col_scale, img.cols);
            let top = lerp(img.get(r0, c0), img.get(r0, c1), fc);
            let bottom = lerp(img.get(r1, c0), img.get(r1, c1), fc);
            lerp(top, bottom, fr)
        }),
    };
    Ok(out)
}

/// Continuous source coordinate of output pixel center `i` for an `(in, out)` size pair.
/// Multiplying before dividing keeps integer-ratio upsampling exact.
#[inline]
fn source_coord(i: usize, (len_in, len_out): (usize, usize)) -> f64 {
    (i as f64 + 0.5) * len_in as f64 / len_out as f64
}

#[inline]
fn nearest_source(i: usize, scale: (usize, usize), len: usize) -> usize {
    let s = libm::floor(source_coord(i, scale)) as usize;
    s.min(len - 1)
}

#[inline]
fn linear_source(i: usize, scale: (usize, usize), len: usize) -> (usize, usize, f64) {
    let s = (source_coord(i, scale) - 0.5).clamp(0.0, (len - 1) as f64);
    let i0 = libm::floor(s) as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, s - i0 as f64)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Rejects unintentional contacts, normalizes by the frame maximum and upsamples.
///
/// Returns `None` when the maximum or the sum falls below its threshold, or when
/// the frame carries no pressure at all.
pub fn preprocess_tactile(frame: &TactileFrame, cfg: &PreprocessConfig) -> Option<GrayImage> {
    let max = frame.max();
    let sum = frame.sum();
    if max < cfg.max_threshold || sum < cfg.sum_threshold || max <= 0.0 || cfg.scale_factor == 0 {
        return None;
    }
    let normalized = GrayImage::from_fn(frame.rows, frame.cols, |r, c| frame.get(r, c) / max);
    resample(&normalized, frame.rows * cfg.scale_factor, frame.cols * cfg.scale_factor, cfg.kernel).ok()
}

/// Elementwise mean of same-shaped images, renormalized to a maximum of 1.
pub fn average_frames(frames: &[GrayImage]) -> Result<GrayImage> {
    let first = frames.first().ok_or(Error::Empty("average_frames needs at least one image"))?;
    let (rows, cols) = (first.rows, first.cols);
    let mut acc = vec![0.0; rows * cols];
    for img in frames {
        if img.rows != rows || img.cols != cols {
            return Err(Error::ShapeMismatch { expected: rows * cols, actual: img.data.len() });
        }
        for (a, v) in acc.iter_mut().zip(&img.data) {
            *a += v;
        }
    }
    let n = frames.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    let max = acc.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        acc.iter_mut().for_each(|a| *a /= max);
    }
    Ok(GrayImage::from_fn(rows, cols, |r, c| acc[r * cols + c]))
}
