//! Compact dense SIFT: a 2x2 spatial grid of 8-bin orientation histograms,
//! computed at fixed centers without scale space or keypoint detection.
//!
//! The same extraction runs on tactile images and on visual-map windows, which
//! is what makes the two modalities comparable.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

pub const DESCRIPTOR_LEN: usize = 32;
const SPATIAL_CELLS: usize = 2;
const ORIENTATION_BINS: usize = 8;
const DOMINANT_BINS: usize = 36;
/// Histogram norms at or below this describe as [`Descriptor32::ZERO`].
pub const ZERO_NORM: f64 = 1e-12;

/// Per-pixel gradient magnitude and orientation in `[0, 2pi)`.
///
/// Orientation is `atan2(d/drow, d/dcol)`, so a left-to-right ramp points at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    rows: usize,
    cols: usize,
    magnitude: Vec<f64>,
    orientation: Vec<f64>,
}

impl GradientField {
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn magnitude(&self, row: usize, col: usize) -> f64 {
        self.magnitude[row * self.cols + col]
    }
    #[inline]
    pub fn orientation(&self, row: usize, col: usize) -> f64 {
        self.orientation[row * self.cols + col]
    }
}

/// Central differences with replicated edges.
pub fn gradient_field(img: &GrayImage) -> Result<GradientField> {
    let (rows, cols) = (img.rows(), img.cols());
    if rows < 3 || cols < 3 {
        return Err(Error::ImageTooSmall { rows, cols, min_rows: 3, min_cols: 3 });
    }
    let mut magnitude = Vec::with_capacity(rows * cols);
    let mut orientation = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let up = r.saturating_sub(1);
        let down = (r + 1).min(rows - 1);
        for c in 0..cols {
            let left = c.saturating_sub(1);
            let right = (c + 1).min(cols - 1);
            let gx = 0.5 * (img.get(r, right) - img.get(r, left));
            let gy = 0.5 * (img.get(down, c) - img.get(up, c));
            magnitude.push(libm::sqrt(gx * gx + gy * gy));
            orientation.push(wrap_angle(libm::atan2(gy, gx)));
        }
    }
    Ok(GradientField { rows, cols, magnitude, orientation })
}

#[inline]
fn wrap_angle(a: f64) -> f64 {
    let w = a - TAU * libm::floor(a / TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftConfig {
    /// Measure orientations (and the spatial grid) relative to the dominant gradient orientation.
    pub align_orientation: bool,
    /// Weight contributions by a Gaussian of sigma = half the patch size.
    pub gaussian_window: bool,
    /// Ceiling applied after the first normalization.
    pub clip: f64,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self { align_orientation: true, gaussian_window: false, clip: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptor32(pub [f64; DESCRIPTOR_LEN]);

impl Descriptor32 {
    pub const ZERO: Self = Self([0.0; DESCRIPTOR_LEN]);

    #[inline]
    pub fn values(&self) -> &[f64; DESCRIPTOR_LEN] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| v * v).sum())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    #[inline]
    pub fn squared_distance(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for k in 0..DESCRIPTOR_LEN {
            let d = self.0[k] - other.0[k];
            acc += d * d;
        }
        acc
    }

    #[inline]
    pub fn distance(&self, other: &Self) -> f64 {
        libm::sqrt(self.squared_distance(other))
    }
}

/// Dominant gradient orientation of a patch: peak of a 36-bin magnitude-weighted
/// histogram (linear voting) refined by a parabola through the peak and its neighbours.
pub fn dominant_orientation(field: &GradientField, row0: usize, col0: usize, size: usize) -> f64 {
    let mut hist = [0.0f64; DOMINANT_BINS];
    let bin_width = TAU / DOMINANT_BINS as f64;
    for r in row0..row0 + size {
        for c in col0..col0 + size {
            let m = field.magnitude(r, c);
            if m == 0.0 {
                continue;
            }
            let pos = field.orientation(r, c) / bin_width;
            let b0 = libm::floor(pos);
            let frac = pos - b0;
            let b0 = (b0 as usize) % DOMINANT_BINS;
            hist[b0] += m * (1.0 - frac);
            hist[(b0 + 1) % DOMINANT_BINS] += m * frac;
        }
    }
    let mut peak = 0;
    for (i, &v) in hist.iter().enumerate() {
        if v > hist[peak] {
            peak = i;
        }
    }
    let left = hist[(peak + DOMINANT_BINS - 1) % DOMINANT_BINS];
    let right = hist[(peak + 1) % DOMINANT_BINS];
    let center = hist[peak];
    let denom = left - 2.0 * center + right;
    let offset = if denom < 0.0 { 0.5 * (left - right) / denom } else { 0.0 };
    wrap_angle((peak as f64 + offset) * bin_width)
}

/// 32-element descriptor of the `patch_size` square whose top-left corner is
/// `center - patch_size / 2`.
///
/// Votes are trilinearly interpolated over the 2x2 cells and 8 orientation bins.
/// The result is L2-normalized, clipped, and renormalized; an empty patch gives
/// [`Descriptor32::ZERO`].
pub fn sift32(field: &GradientField, center: (usize, usize), patch_size: usize, cfg: &SiftConfig) -> Result<Descriptor32> {
    let (cr, cc) = center;
    let half = patch_size / 2;
    let oob = Error::PatchOutOfBounds { row: cr, col: cc, size: patch_size };
    if patch_size < 2 || cr < half || cc < half {
        return Err(oob);
    }
    let (row0, col0) = (cr - half, cc - half);
    if row0 + patch_size > field.rows || col0 + patch_size > field.cols {
        return Err(oob);
    }

    let theta0 = if cfg.align_orientation { dominant_orientation(field, row0, col0, patch_size) } else { 0.0 };
    let (sin0, cos0) = libm::sincos(theta0);
    let extent = patch_size as f64;
    let half_extent = 0.5 * extent;
    let cell_width = extent / SPATIAL_CELLS as f64;
    let window_sigma = half_extent;
    let bin_width = TAU / ORIENTATION_BINS as f64;

    let mut hist = [0.0f64; DESCRIPTOR_LEN];
    for r in row0..row0 + patch_size {
        for c in col0..col0 + patch_size {
            let mut m = field.magnitude(r, c);
            if m == 0.0 {
                continue;
            }
            let dx = (c - col0) as f64 + 0.5 - half_extent;
            let dy = (r - row0) as f64 + 0.5 - half_extent;
            if cfg.gaussian_window {
                m *= libm::exp(-(dx * dx + dy * dy) / (2.0 * window_sigma * window_sigma));
            }
            let (x, y) = (cos0 * dx + sin0 * dy, -sin0 * dx + cos0 * dy);
            let u = (x + half_extent) / cell_width - 0.5;
            let v = (y + half_extent) / cell_width - 0.5;
            let o = wrap_angle(field.orientation(r, c) - theta0) / bin_width;

            let (u0, fu) = split(u);
            let (v0, fv) = split(v);
            let (o0, fo) = split(o);
            for (dv, wv) in [(0, 1.0 - fv), (1, fv)] {
                let Some(cv) = cell_index(v0 + dv) else { continue };
                for (du, wu) in [(0, 1.0 - fu), (1, fu)] {
                    let Some(cu) = cell_index(u0 + du) else { continue };
                    let base = (cv * SPATIAL_CELLS + cu) * ORIENTATION_BINS;
                    for (d_o, wo) in [(0, 1.0 - fo), (1, fo)] {
                        let bin = (o0 + d_o).rem_euclid(ORIENTATION_BINS as i64) as usize;
                        hist[base + bin] += m * wv * wu * wo;
                    }
                }
            }
        }
    }
    Ok(normalize_clip(hist, cfg.clip))
}

#[inline]
fn split(x: f64) -> (i64, f64) {
    let f = libm::floor(x);
    (f as i64, x - f)
}

#[inline]
fn cell_index(i: i64) -> Option<usize> {
    (0..SPATIAL_CELLS as i64).contains(&i).then_some(i as usize)
}

fn normalize_clip(mut v: [f64; DESCRIPTOR_LEN], clip: f64) -> Descriptor32 {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
    if norm <= ZERO_NORM {
        return Descriptor32::ZERO;
    }
    for x in v.iter_mut() {
        *x = (*x / norm).min(clip);
    }
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
    for x in v.iter_mut() {
        *x /= norm;
    }
    Descriptor32(v)
}

/// Row placement of the three sub-patches within a tactile-sized region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TripletLayout {
    /// Offsets `0, spacing, 2 * spacing`.
    #[default]
    Spaced,
    /// First and last patches flush with the region edges, middle patch centered.
    Covering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripletConfig {
    pub patch_size: usize,
    pub spacing: usize,
    pub layout: TripletLayout,
}

impl Default for TripletConfig {
    fn default() -> Self {
        Self { patch_size: 18, spacing: 9, layout: TripletLayout::Spaced }
    }
}

impl TripletConfig {
    /// Row offsets of the three patches for a region of `rows x cols`.
    pub fn offsets(&self, rows: usize, cols: usize) -> Result<[usize; 3]> {
        let p = self.patch_size;
        let offsets = match self.layout {
            TripletLayout::Spaced => [0, self.spacing, 2 * self.spacing],
            TripletLayout::Covering if rows >= p => {
                let last = rows - p;
                [0, last / 2, last]
            }
            TripletLayout::Covering => [0, 0, 0],
        };
        if p < 2 || cols < p || rows < offsets[2] + p {
            return Err(Error::ImageTooSmall { rows, cols, min_rows: offsets[2] + p, min_cols: p });
        }
        Ok(offsets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureConfig {
    pub triplet: TripletConfig,
    pub sift: SiftConfig,
}

/// The three descriptors of one tactile-sized region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub descriptors: [Descriptor32; 3],
    pub patch_offsets: [usize; 3],
}

/// Describes the `size x size` patch at `(row0, col0)` from its own pixels only:
/// gradients are taken inside the cropped patch, so equal content gives equal
/// descriptors wherever the patch sits.
pub fn describe_patch(img: &GrayImage, row0: usize, col0: usize, size: usize, cfg: &SiftConfig) -> Result<Descriptor32> {
    let patch = img.crop(row0, col0, size, size)?;
    let field = gradient_field(&patch)?;
    sift32(&field, (size / 2, size / 2), size, cfg)
}

/// Splits a region into three overlapping square patches stacked along the rows
/// and describes each one.
pub fn extract_triplet(img: &GrayImage, cfg: &FeatureConfig) -> Result<Triplet> {
    let offsets = cfg.triplet.offsets(img.rows(), img.cols())?;
    let p = cfg.triplet.patch_size;
    let col0 = (img.cols() - p) / 2;
    let mut descriptors = [Descriptor32::ZERO; 3];
    for (d, &row0) in descriptors.iter_mut().zip(&offsets) {
        *d = describe_patch(img, row0, col0, p, &cfg.sift)?;
    }
    Ok(Triplet { descriptors, patch_offsets: offsets })
}

const _: () = assert!(SPATIAL_CELLS * SPATIAL_CELLS * ORIENTATION_BINS == DESCRIPTOR_LEN);
