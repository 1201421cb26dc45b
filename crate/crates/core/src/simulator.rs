//! Synthetic stand-in for the physical rig: a rendered object map, a tactile
//! array pressing on it, noisy odometry and exploration paths.
//!
//! Every random draw comes from a ChaCha8 stream seeded explicitly, so results
//! are reproducible across runs and platforms.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::filter::Control;
use crate::imaging::{GrayImage, TactileFrame, DEFAULT_SCALE_FACTOR, SENSOR_CELL_MM, SENSOR_COLS, SENSOR_ROWS};
use crate::measurement::{State, StateSpace};

/// Millimetres per map pixel for a map at the upsampled sensor scale.
pub const DEFAULT_MM_PER_PIXEL: f64 = SENSOR_CELL_MM / DEFAULT_SCALE_FACTOR as f64;
/// Intensity at or above which a map pixel counts as object.
pub const BRIGHT_LEVEL: f64 = 0.5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with stream coordinates (SplitMix64 finalizer per word).
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    let mut h = splitmix(base ^ 0x243F_6A88_85A3_08D3);
    for &w in words {
        h = splitmix(h ^ splitmix(w.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Built-in object shapes, rendered bright on a dark background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShapeSpec {
    Blank,
    /// Articulated lizard-like body: head, curved trunk, tail, four jointed legs with toes.
    #[default]
    Gecko,
    /// Two ring handles and two crossing blades.
    Scissors,
    /// Random star-shaped polygons linked by bars.
    PolygonChain,
}

impl ShapeSpec {
    pub fn name(self) -> &'static str {
        match self {
            Self::Blank => "blank",
            Self::Gecko => "gecko",
            Self::Scissors => "scissors",
            Self::PolygonChain => "polygon-chain",
        }
    }
}

impl FromStr for ShapeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blank" => Ok(Self::Blank),
            "gecko" => Ok(Self::Gecko),
            "scissors" => Ok(Self::Scissors),
            "polygon-chain" | "polygon_chain" | "chain" => Ok(Self::PolygonChain),
            _ => Err(Error::UnknownShape),
        }
    }
}

/// The visual map of an object and its physical scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub map: GrayImage,
    pub mm_per_pixel: f64,
}

impl Scene {
    pub fn new(map: GrayImage, mm_per_pixel: f64) -> Result<Self> {
        if !(mm_per_pixel > 0.0 && mm_per_pixel.is_finite()) {
            return Err(Error::InvalidParameter("mm_per_pixel must be > 0"));
        }
        Ok(Self { map, mm_per_pixel })
    }

    /// Fraction of map pixels counted as object.
    pub fn shape_fraction(&self) -> f64 {
        let d = self.map.data();
        d.iter().filter(|&&v| v >= BRIGHT_LEVEL).count() as f64 / d.len() as f64
    }
}

type Point = (f64, f64);

#[derive(Debug, Clone, Copy)]
enum Primitive {
    /// Segment with radius interpolated from `ra` at `a` to `rb` at `b`.
    Capsule { a: Point, b: Point, ra: f64, rb: f64 },
    Ellipse { center: Point, radii: (f64, f64), angle: f64 },
    Ring { center: Point, radius: f64, half_width: f64 },
    Polygon { vertices: [Point; 8], len: usize },
}

impl Primitive {
    /// Signed distance in pixels (negative inside).
    fn distance(&self, p: Point) -> f64 {
        match *self {
            Primitive::Capsule { a, b, ra, rb } => {
                let (pa, ba) = ((p.0 - a.0, p.1 - a.1), (b.0 - a.0, b.1 - a.1));
                let len2 = ba.0 * ba.0 + ba.1 * ba.1;
                let t = if len2 > 0.0 { ((pa.0 * ba.0 + pa.1 * ba.1) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let d = libm::hypot(pa.0 - t * ba.0, pa.1 - t * ba.1);
                d - (ra + (rb - ra) * t)
            }
            Primitive::Ellipse { center, radii, angle } => {
                let (s, c) = libm::sincos(angle);
                let (dy, dx) = (p.0 - center.0, p.1 - center.1);
                let (u, v) = (c * dy + s * dx, -s * dy + c * dx);
                let k = libm::hypot(u / radii.0, v / radii.1);
                // first-order distance estimate, adequate for a one-pixel antialiasing band
                (k - 1.0) * radii.0.min(radii.1)
            }
            Primitive::Ring { center, radius, half_width } => {
                (libm::hypot(p.0 - center.0, p.1 - center.1) - radius).abs() - half_width
            }
            Primitive::Polygon { vertices, len } => polygon_distance(&vertices[..len], p),
        }
    }
}

fn polygon_distance(v: &[Point], p: Point) -> f64 {
    let mut best = f64::INFINITY;
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (a, b) = (v[j], v[i]);
        let (ba, pa) = ((b.0 - a.0, b.1 - a.1), (p.0 - a.0, p.1 - a.1));
        let len2 = ba.0 * ba.0 + ba.1 * ba.1;
        let t = if len2 > 0.0 { ((pa.0 * ba.0 + pa.1 * ba.1) / len2).clamp(0.0, 1.0) } else { 0.0 };
        best = best.min(libm::hypot(pa.0 - t * ba.0, pa.1 - t * ba.1));
        if (a.0 > p.0) != (b.0 > p.0) && p.1 < (b.1 - a.1) * (p.0 - a.0) / (b.0 - a.0) + a.1 {
            inside = !inside;
        }
        j = i;
    }
    if inside {
        -best
    } else {
        best
    }
}

fn render(rows: usize, cols: usize, parts: &[Primitive]) -> GrayImage {
    GrayImage::from_fn(rows, cols, |r, c| {
        let p = (r as f64 + 0.5, c as f64 + 0.5);
        let d = parts.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min);
        0.5 - d
    })
}

struct Jitter(ChaCha8Rng);

impl Jitter {
    /// Uniform in `[center - spread, center + spread]`.
    fn around(&mut self, center: f64, spread: f64) -> f64 {
        center + spread * (2.0 * self.0.random::<f64>() - 1.0)
    }
}

fn polar(origin: Point, angle: f64, length: f64) -> Point {
    let (s, c) = libm::sincos(angle);
    (origin.0 + length * s, origin.1 + length * c)
}

/// Angles are measured from the +column axis towards +row (screen coordinates).
fn gecko(rows: usize, cols: usize, j: &mut Jitter) -> Vec<Primitive> {
    let scale = rows.min(cols) as f64;
    let (h, w) = (rows as f64, cols as f64);
    let mid = 0.5 * w;
    let sway = j.around(0.0, 0.06) * w;
    let phase = j.around(0.0, 0.6);
    let spine = |t: f64| -> Point { (h * (0.16 + 0.5 * t), mid + sway * libm::sin(PI * t + phase)) };

    let mut parts = Vec::new();
    parts.push(Primitive::Ellipse {
        center: (h * 0.11, spine(0.0).1),
        radii: (0.095 * scale, 0.076 * scale),
        angle: j.around(0.0, 0.15),
    });
    let steps = 6;
    for k in 0..steps {
        let (t0, t1) = (k as f64 / steps as f64, (k + 1) as f64 / steps as f64);
        let girth = |t: f64| scale * (0.05 + 0.018 * libm::sin(PI * (0.15 + 0.7 * t)));
        parts.push(Primitive::Capsule { a: spine(t0), b: spine(t1), ra: girth(t0), rb: girth(t1) });
    }
    // tail curls to one side
    let side = if j.0.random::<bool>() { 1.0 } else { -1.0 };
    let mut tail_at = spine(1.0);
    let mut tail_angle = PI / 2.0;
    let mut radius = 0.05 * scale;
    for _ in 0..5 {
        tail_angle += side * j.around(0.28, 0.08);
        let next = polar(tail_at, tail_angle, 0.09 * scale);
        parts.push(Primitive::Capsule { a: tail_at, b: next, ra: radius, rb: radius * 0.8 });
        tail_at = next;
        radius *= 0.8;
    }
    for (t, forward) in [(0.22, true), (0.82, false)] {
        let shoulder = spine(t);
        for outward in [-1.0, 1.0] {
            // upper limb sweeps forward for front legs and backward for hind legs
            let sweep = if forward { -0.35 } else { 0.35 };
            let a1 = if outward > 0.0 { j.around(sweep, 0.2) } else { PI - j.around(sweep, 0.2) };
            let elbow = polar(shoulder, a1, j.around(0.22, 0.02) * scale);
            parts.push(Primitive::Capsule { a: shoulder, b: elbow, ra: 0.05 * scale, rb: 0.042 * scale });
            let bend = if forward { -1.0 } else { 1.0 } * outward * j.around(0.9, 0.2);
            let a2 = a1 + bend;
            let wrist = polar(elbow, a2, j.around(0.15, 0.02) * scale);
            parts.push(Primitive::Capsule { a: elbow, b: wrist, ra: 0.042 * scale, rb: 0.035 * scale });
            for toe in 0..4 {
                let a3 = a2 + (toe as f64 - 1.5) * 0.55;
                let tip = polar(wrist, a3, j.around(0.075, 0.01) * scale);
                parts.push(Primitive::Capsule { a: wrist, b: tip, ra: 0.02 * scale, rb: 0.017 * scale });
            }
        }
    }
    parts
}

fn scissors(rows: usize, cols: usize, j: &mut Jitter) -> Vec<Primitive> {
    let scale = rows.min(cols) as f64;
    let (h, w) = (rows as f64, cols as f64);
    let pivot = (h * j.around(0.45, 0.03), w * j.around(0.5, 0.03));
    let spread = j.around(0.32, 0.06);
    let mut parts = vec![Primitive::Ellipse { center: pivot, radii: (0.05 * scale, 0.05 * scale), angle: 0.0 }];
    for side in [-1.0, 1.0] {
        let handle_angle = PI / 2.0 + side * spread;
        let handle = polar(pivot, handle_angle, 0.3 * scale);
        parts.push(Primitive::Ring { center: handle, radius: 0.12 * scale, half_width: 0.045 * scale });
        parts.push(Primitive::Capsule { a: pivot, b: polar(pivot, handle_angle, 0.19 * scale), ra: 0.07 * scale, rb: 0.06 * scale });
        let tip = polar(pivot, -PI / 2.0 - side * spread * 0.35, j.around(0.42, 0.03) * scale);
        parts.push(Primitive::Capsule { a: pivot, b: tip, ra: 0.11 * scale, rb: 0.025 * scale });
    }
    parts
}

fn polygon_chain(rows: usize, cols: usize, j: &mut Jitter) -> Vec<Primitive> {
    let scale = rows.min(cols) as f64;
    let (h, w) = (rows as f64, cols as f64);
    let count = 3 + (j.0.random::<u32>() % 3) as usize;
    let mut centers: Vec<Point> = Vec::new();
    let mut parts = Vec::new();
    for k in 0..count {
        let t = (k as f64 + 0.5) / count as f64;
        let center = (h * (0.12 + 0.76 * t), w * j.around(0.5, 0.2));
        let mut vertices = [(0.0, 0.0); 8];
        let len = 5 + (j.0.random::<u32>() % 4) as usize;
        let rot = j.around(0.0, PI);
        for (i, v) in vertices.iter_mut().take(len).enumerate() {
            let angle = rot + 2.0 * PI * i as f64 / len as f64;
            *v = polar(center, angle, j.around(0.19, 0.05) * scale);
        }
        parts.push(Primitive::Polygon { vertices, len });
        if let Some(&prev) = centers.last() {
            parts.push(Primitive::Capsule { a: prev, b: center, ra: 0.035 * scale, rb: 0.035 * scale });
        }
        centers.push(center);
    }
    parts
}

/// Renders a built-in shape. Deterministic in `(spec, rows, cols, seed)`.
pub fn make_shape_map(spec: ShapeSpec, rows: usize, cols: usize, seed: u64) -> Result<Scene> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimensions { rows, cols });
    }
    let mut j = Jitter(rng(seed));
    let parts = match spec {
        ShapeSpec::Blank => Vec::new(),
        ShapeSpec::Gecko => gecko(rows, cols, &mut j),
        ShapeSpec::Scissors => scissors(rows, cols, &mut j),
        ShapeSpec::PolygonChain => polygon_chain(rows, cols, &mut j),
    };
    let map = if parts.is_empty() { GrayImage::zeros(rows, cols) } else { render(rows, cols, &parts) };
    Scene::new(map, DEFAULT_MM_PER_PIXEL)
}

/// Tactile sensor response model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub rows: usize,
    pub cols: usize,
    /// Additive Gaussian noise, as a fraction of full scale (1.0).
    pub noise_sigma: f64,
    /// Number of output levels over `[0, 1]`; 0 disables quantization.
    pub quantization_levels: u32,
    /// Per-cell probability of reading zero.
    pub dropout_prob: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { rows: SENSOR_ROWS, cols: SENSOR_COLS, noise_sigma: 0.05, quantization_levels: 0, dropout_prob: 0.0 }
    }
}

impl SensorModel {
    pub fn noise_free() -> Self {
        Self { noise_sigma: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidDimensions { rows: self.rows, cols: self.cols });
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter("noise_sigma must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return Err(Error::InvalidParameter("dropout_prob must lie in [0, 1]"));
        }
        if self.quantization_levels == 1 {
            return Err(Error::InvalidParameter("quantization_levels must be 0 or >= 2"));
        }
        Ok(())
    }

    /// Pixels per sensing cell for a window of the given size.
    pub fn block_size(&self, space: &StateSpace) -> Result<usize> {
        let (wr, wc) = space.window_dims();
        let block = wr / self.rows;
        if block == 0 || wr != block * self.rows || wc != block * self.cols {
            return Err(Error::InvalidParameter("window must be an integer multiple of the sensor grid"));
        }
        Ok(block)
    }
}

/// Noise on reported odometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryModel {
    /// Per-axis Gaussian standard deviation in pixels.
    pub trans_sigma: f64,
}

impl Default for OdometryModel {
    fn default() -> Self {
        Self { trans_sigma: 1.0 }
    }
}

/// Presses the sensor onto the window at `pose`: each cell averages its block of
/// map pixels, then noise, dropout, clamping and quantization are applied.
pub fn simulate_touch(scene: &Scene, space: &StateSpace, pose: State, sensor: &SensorModel, seed: u64) -> Result<TactileFrame> {
    sensor.validate()?;
    space.check(pose)?;
    if scene.map.rows() != space.map_dims().0 || scene.map.cols() != space.map_dims().1 {
        return Err(Error::StateSpaceMismatch);
    }
    let block = sensor.block_size(space)?;
    let mut rng = rng(seed);
    let mut data = Vec::with_capacity(sensor.rows * sensor.cols);
    for r in 0..sensor.rows {
        for c in 0..sensor.cols {
            let mut v = scene.map.block_mean(pose.row + r * block, pose.col + c * block, block, block);
            if sensor.noise_sigma > 0.0 {
                let n: f64 = StandardNormal.sample(&mut rng);
                v += sensor.noise_sigma * n;
            }
            if sensor.dropout_prob > 0.0 && rng.random::<f64>() < sensor.dropout_prob {
                v = 0.0;
            }
            v = v.max(0.0);
            if sensor.quantization_levels >= 2 {
                let steps = (sensor.quantization_levels - 1) as f64;
                v = libm::round(v * steps) / steps;
            }
            data.push(v);
        }
    }
    TactileFrame::new(sensor.rows, sensor.cols, data)
}

/// Reported displacement between two poses: truth plus per-axis Gaussian noise.
pub fn simulate_odometry(from: State, to: State, odom: &OdometryModel, seed: u64) -> Control {
    let dx = to.row as f64 - from.row as f64;
    let dy = to.col as f64 - from.col as f64;
    if odom.trans_sigma <= 0.0 {
        return Control::new(dx, dy);
    }
    let mut rng = rng(seed);
    let nx: f64 = StandardNormal.sample(&mut rng);
    let ny: f64 = StandardNormal.sample(&mut rng);
    Control::new(dx + odom.trans_sigma * nx, dy + odom.trans_sigma * ny)
}

/// Ordered ground-truth poses of one exploration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    poses: Vec<State>,
}

impl Path {
    pub fn new(poses: Vec<State>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::Empty("path needs at least one pose"));
        }
        if poses.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("consecutive path poses must differ"));
        }
        Ok(Self { poses })
    }

    #[inline]
    pub fn poses(&self) -> &[State] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub n_locations: usize,
    pub min_shape_fraction: f64,
    /// When set, the location set is drawn with this seed and only the visiting
    /// order depends on the run seed.
    pub location_seed: Option<u64>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { n_locations: 7, min_shape_fraction: 0.15, location_seed: None }
    }
}

/// Fraction of object pixels under the window at every state, row-major.
pub fn window_shape_fractions(scene: &Scene, space: &StateSpace) -> Vec<f64> {
    let (rows, cols) = (scene.map.rows(), scene.map.cols());
    // summed-area table of the object mask
    let mut sat = vec![0u32; (rows + 1) * (cols + 1)];
    for r in 0..rows {
        let mut run = 0;
        for c in 0..cols {
            run += u32::from(scene.map.get(r, c) >= BRIGHT_LEVEL);
            sat[(r + 1) * (cols + 1) + c + 1] = sat[r * (cols + 1) + c + 1] + run;
        }
    }
    let (wr, wc) = space.window_dims();
    let area = (wr * wc) as f64;
    space
        .states()
        .map(|s| {
            let at = |r: usize, c: usize| sat[r * (cols + 1) + c];
            let (r0, c0, r1, c1) = (s.row, s.col, s.row + wr, s.col + wc);
            (at(r1, c1) + at(r0, c0) - at(r0, c1) - at(r1, c0)) as f64 / area
        })
        .collect()
}

/// Draws `n` distinct states whose windows are at least `min_fraction` object.
pub fn select_locations(scene: &Scene, space: &StateSpace, n: usize, min_fraction: f64, seed: u64) -> Result<Vec<State>> {
    if n == 0 {
        return Err(Error::Empty("at least one location is required"));
    }
    let fractions = window_shape_fractions(scene, space);
    let mut candidates: Vec<State> =
        space.states().zip(&fractions).filter(|(_, &f)| f >= min_fraction && f > 0.0).map(|(s, _)| s).collect();
    if candidates.len() < n {
        return Err(Error::InsufficientPositions { required: n, available: candidates.len() });
    }
    let mut rng = rng(seed);
    let (chosen, _) = candidates.partial_shuffle(&mut rng, n);
    Ok(chosen.to_vec())
}

/// Visits `locations` in a seeded random order.
pub fn permute_locations(locations: &[State], seed: u64) -> Result<Path> {
    let mut poses = locations.to_vec();
    poses.shuffle(&mut rng(seed));
    Path::new(poses)
}

pub fn generate_path(scene: &Scene, space: &StateSpace, cfg: &PathConfig, seed: u64) -> Result<Path> {
    let location_seed = cfg.location_seed.unwrap_or(seed);
    let locations = select_locations(scene, space, cfg.n_locations, cfg.min_shape_fraction, location_seed)?;
    permute_locations(&locations, derive_seed(seed, &[0xbde7_u64]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{preprocess_tactile, resample, PreprocessConfig, ResampleKernel};

    fn space() -> StateSpace {
        StateSpace::new(120, 120, 42, 18).unwrap()
    }

    #[test]
    fn maps_are_deterministic() {
        for spec in [ShapeSpec::Gecko, ShapeSpec::Scissors, ShapeSpec::PolygonChain] {
            let a = make_shape_map(spec, 120, 120, 9).unwrap();
            let b = make_shape_map(spec, 120, 120, 9).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.map, make_shape_map(spec, 120, 120, 10).unwrap().map);
        }
        let blank = make_shape_map(ShapeSpec::Blank, 120, 120, 1).unwrap();
        assert!(blank.map.data().iter().all(|&v| v == 0.0));
        assert!("dragon".parse::<ShapeSpec>().is_err());
        assert_eq!("gecko".parse::<ShapeSpec>().unwrap(), ShapeSpec::Gecko);
    }

    #[test]
    fn gecko_fraction_in_range() {
        for seed in 0..40 {
            let f = make_shape_map(ShapeSpec::Gecko, 120, 120, seed).unwrap().shape_fraction();
            assert!((0.2..=0.6).contains(&f), "seed {seed}: {f}");
        }
    }

    #[test]
    fn other_shapes_fraction_in_range() {
        for spec in [ShapeSpec::Scissors, ShapeSpec::PolygonChain] {
            for seed in 0..20 {
                let f = make_shape_map(spec, 120, 120, seed).unwrap().shape_fraction();
                assert!((0.2..=0.6).contains(&f), "{spec:?} seed {seed}: {f}");
            }
        }
    }

    #[test]
    fn touch_on_dark_and_bright_windows() {
        let sp = space();
        let dark = Scene::new(GrayImage::zeros(120, 120), DEFAULT_MM_PER_PIXEL).unwrap();
        let f = simulate_touch(&dark, &sp, State::new(3, 4), &SensorModel::noise_free(), 1).unwrap();
        assert!(f.data().iter().all(|&v| v == 0.0));
        assert!(preprocess_tactile(&f, &PreprocessConfig::default()).is_none());

        let bright = Scene::new(GrayImage::filled(120, 120, 1.0), DEFAULT_MM_PER_PIXEL).unwrap();
        let f = simulate_touch(&bright, &sp, State::new(3, 4), &SensorModel::noise_free(), 1).unwrap();
        assert_eq!((f.rows(), f.cols()), (14, 6));
        assert!(f.data().iter().all(|&v| v == 1.0));
        assert!(simulate_touch(&bright, &sp, State::new(79, 0), &SensorModel::noise_free(), 1).is_err());
    }

    #[test]
    fn noise_free_touch_round_trips_to_block_average() {
        let sp = space();
        let scene = make_shape_map(ShapeSpec::Gecko, 120, 120, 3).unwrap();
        let pose = State::new(30, 50);
        let f = simulate_touch(&scene, &sp, pose, &SensorModel::noise_free(), 7).unwrap();
        let cell = GrayImage::from_fn(14, 6, |r, c| f.get(r, c));
        let up = resample(&cell, 42, 18, ResampleKernel::Nearest).unwrap();
        for r in 0..42 {
            for c in 0..18 {
                let (br, bc) = (r / 3 * 3, c / 3 * 3);
                let mut s = 0.0;
                for i in 0..3 {
                    for k in 0..3 {
                        s += scene.map.get(pose.row + br + i, pose.col + bc + k);
                    }
                }
                assert_eq!(up.get(r, c), s / 9.0);
            }
        }
        let pre = preprocess_tactile(&f, &PreprocessConfig::default()).unwrap();
        let m = f.max();
        for r in 0..42 {
            for c in 0..18 {
                assert!((pre.get(r, c) - up.get(r, c) / m).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn touch_noise_models() {
        let sp = space();
        let scene = make_shape_map(ShapeSpec::Gecko, 120, 120, 3).unwrap();
        let pose = State::new(30, 50);
        let noisy = SensorModel { quantization_levels: 16, dropout_prob: 0.2, ..SensorModel::default() };
        let a = simulate_touch(&scene, &sp, pose, &noisy, 5).unwrap();
        assert_eq!(a, simulate_touch(&scene, &sp, pose, &noisy, 5).unwrap());
        assert_ne!(a, simulate_touch(&scene, &sp, pose, &noisy, 6).unwrap());
        assert!(a.data().iter().all(|&v| v >= 0.0 && (v * 15.0 - libm::round(v * 15.0)).abs() < 1e-9));
        assert!(a.data().contains(&0.0));
        let bad = SensorModel { dropout_prob: 1.5, ..SensorModel::default() };
        assert!(simulate_touch(&scene, &sp, pose, &bad, 1).is_err());
    }

    #[test]
    fn odometry() {
        let (a, b) = (State::new(10, 20), State::new(14, 17));
        let exact = OdometryModel { trans_sigma: 0.0 };
        assert_eq!(simulate_odometry(a, b, &exact, 3), Control::new(4.0, -3.0));
        assert_eq!(simulate_odometry(a, a, &exact, 3), Control::ZERO);
        let noisy = OdometryModel { trans_sigma: 0.5 };
        assert_eq!(simulate_odometry(a, b, &noisy, 3), simulate_odometry(a, b, &noisy, 3));
    }

    #[test]
    fn odometry_noise_is_unbiased() {
        let (a, b) = (State::new(10, 20), State::new(14, 17));
        let noisy = OdometryModel { trans_sigma: 0.5 };
        let n = 10_000;
        let mean: f64 = (0..n).map(|s| simulate_odometry(a, b, &noisy, s).dx).sum::<f64>() / n as f64;
        assert!((mean - 4.0).abs() < 3.0 * 0.5 / 100.0, "mean {mean}");
    }

    #[test]
    fn paths() {
        let sp = space();
        let scene = make_shape_map(ShapeSpec::Gecko, 120, 120, 3).unwrap();
        let fractions = window_shape_fractions(&scene, &sp);
        let path = generate_path(&scene, &sp, &PathConfig::default(), 11).unwrap();
        assert_eq!(path.len(), 7);
        let mut sorted = path.poses().to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 7);
        assert!(path.poses().iter().all(|&s| fractions[sp.index(s)] >= 0.15));
        assert_eq!(path, generate_path(&scene, &sp, &PathConfig::default(), 11).unwrap());

        let fixed = PathConfig { location_seed: Some(99), ..PathConfig::default() };
        let p1 = generate_path(&scene, &sp, &fixed, 1).unwrap();
        let p2 = generate_path(&scene, &sp, &fixed, 2).unwrap();
        let (mut s1, mut s2) = (p1.poses().to_vec(), p2.poses().to_vec());
        s1.sort();
        s2.sort();
        assert_eq!(s1, s2);
        assert_ne!(p1, p2);

        let blank = make_shape_map(ShapeSpec::Blank, 120, 120, 0).unwrap();
        assert!(matches!(
            generate_path(&blank, &sp, &PathConfig::default(), 1),
            Err(Error::InsufficientPositions { available: 0, .. })
        ));
    }

    #[test]
    fn shape_fractions_match_direct_count() {
        let sp = StateSpace::new(60, 50, 42, 18).unwrap();
        let scene = make_shape_map(ShapeSpec::Scissors, 60, 50, 2).unwrap();
        let fr = window_shape_fractions(&scene, &sp);
        for s in [State::new(0, 0), State::new(18, 32), State::new(7, 11)] {
            let crop = scene.map.crop(s.row, s.col, 42, 18).unwrap();
            let direct = crop.data().iter().filter(|&&v| v >= BRIGHT_LEVEL).count() as f64 / (42.0 * 18.0);
            assert_eq!(fr[sp.index(s)], direct);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(5, &[2]), derive_seed(5, &[2]));
    }
}
