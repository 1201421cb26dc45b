//! Sliding-window state space, the precomputed window descriptor field, and the
//! inverse-distance likelihood grid.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::features::{describe_patch, Descriptor32, FeatureConfig, Triplet};
use crate::imaging::GrayImage;

/// Default regularizer added to distances before inversion.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// A window-start pixel in the visual map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    pub row: usize,
    pub col: usize,
}

impl State {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// All window-start positions of a `win_rows x win_cols` window inside the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    map_rows: usize,
    map_cols: usize,
    win_rows: usize,
    win_cols: usize,
}

impl StateSpace {
    pub fn new(map_rows: usize, map_cols: usize, win_rows: usize, win_cols: usize) -> Result<Self> {
        if win_rows == 0 || win_cols == 0 {
            return Err(Error::InvalidDimensions { rows: win_rows, cols: win_cols });
        }
        if map_rows < win_rows || map_cols < win_cols {
            return Err(Error::MapSmallerThanWindow { map_rows, map_cols, win_rows, win_cols });
        }
        Ok(Self { map_rows, map_cols, win_rows, win_cols })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.map_rows - self.win_rows + 1
    }
    #[inline]
    pub fn n_cols(&self) -> usize {
        self.map_cols - self.win_cols + 1
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.n_rows() * self.n_cols()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }
    #[inline]
    pub fn map_dims(&self) -> (usize, usize) {
        (self.map_rows, self.map_cols)
    }
    #[inline]
    pub fn window_dims(&self) -> (usize, usize) {
        (self.win_rows, self.win_cols)
    }
    #[inline]
    pub fn contains(&self, s: State) -> bool {
        s.row < self.n_rows() && s.col < self.n_cols()
    }
    #[inline]
    pub fn index(&self, s: State) -> usize {
        s.row * self.n_cols() + s.col
    }
    #[inline]
    pub fn state(&self, index: usize) -> State {
        State { row: index / self.n_cols(), col: index % self.n_cols() }
    }

    pub fn check(&self, s: State) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::StateOutOfBounds { row: s.row, col: s.col })
        }
    }

    /// Continuous center of the window starting at `s`.
    pub fn window_center(&self, s: State) -> (f64, f64) {
        (
            s.row as f64 + 0.5 * (self.win_rows as f64 - 1.0),
            s.col as f64 + 0.5 * (self.win_cols as f64 - 1.0),
        )
    }

    /// Row-major iterator over all states.
    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }
}

pub fn build_state_space(map: &GrayImage, win_rows: usize, win_cols: usize) -> Result<StateSpace> {
    StateSpace::new(map.rows(), map.cols(), win_rows, win_cols)
}

/// The window triplet for every state, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowField {
    space: StateSpace,
    triplets: Vec<Triplet>,
}

impl WindowField {
    pub fn from_triplets(space: StateSpace, triplets: Vec<Triplet>) -> Result<Self> {
        if triplets.len() != space.len() {
            return Err(Error::ShapeMismatch { expected: space.len(), actual: triplets.len() });
        }
        Ok(Self { space, triplets })
    }

    #[inline]
    pub fn space(&self) -> &StateSpace {
        &self.space
    }
    #[inline]
    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }
    #[inline]
    pub fn get(&self, s: State) -> &Triplet {
        &self.triplets[self.space.index(s)]
    }
}

/// How a map window is presented to the descriptor before matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowModel {
    /// The window pixels as rendered.
    Raw,
    /// The window as a sensor with the given cell pitch (in map pixels) would report
    /// it after nearest-neighbour upsampling: every cell holds its block mean.
    SensorCells(usize),
}

impl Default for WindowModel {
    fn default() -> Self {
        WindowModel::SensorCells(crate::imaging::DEFAULT_SCALE_FACTOR)
    }
}

/// Layout of the per-patch descriptor grid a window field is assembled from.
///
/// Each window's three patches start at rows `i + offsets[m]` and column
/// `j + col_offset`; adjacent windows share patches, so descriptors are computed
/// once per patch position and then gathered. Under [`WindowModel::SensorCells`]
/// the patches must sit on the cell grid so that a patch's cell means equal those
/// of the enclosing window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchPlan {
    pub space: StateSpace,
    pub offsets: [usize; 3],
    pub col_offset: usize,
    pub patch_size: usize,
    pub window: WindowModel,
}

impl PatchPlan {
    pub fn new(space: &StateSpace, cfg: &FeatureConfig, window: WindowModel) -> Result<Self> {
        let (win_rows, win_cols) = space.window_dims();
        let offsets = cfg.triplet.offsets(win_rows, win_cols)?;
        let patch_size = cfg.triplet.patch_size;
        let col_offset = (win_cols - patch_size) / 2;
        if let WindowModel::SensorCells(cell) = window {
            let aligned = |v: usize| cell > 0 && v.is_multiple_of(cell);
            if !(aligned(patch_size) && aligned(col_offset) && offsets.iter().all(|&o| aligned(o))) {
                return Err(Error::InvalidParameter("patches must lie on the sensor cell grid"));
            }
        }
        Ok(Self { space: *space, offsets, col_offset, patch_size, window })
    }

    /// Number of patch rows needed to cover every window.
    pub fn patch_rows(&self) -> usize {
        self.space.n_rows() + self.offsets[2]
    }

    /// Descriptors for patch rows in `rows`, each row holding one descriptor per state column.
    pub fn describe_rows(&self, map: &GrayImage, rows: Range<usize>, cfg: &FeatureConfig) -> Result<Vec<Descriptor32>> {
        let n_cols = self.space.n_cols();
        let mut out = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            for j in 0..n_cols {
                let (c, p) = (j + self.col_offset, self.patch_size);
                let d = match self.window {
                    WindowModel::Raw => describe_patch(map, r, c, p, &cfg.sift)?,
                    WindowModel::SensorCells(cell) => {
                        describe_patch(&map.cell_averaged_crop(r, c, p, p, cell)?, 0, 0, p, &cfg.sift)?
                    }
                };
                out.push(d);
            }
        }
        Ok(out)
    }

    /// Gathers window triplets from a complete patch descriptor grid.
    pub fn assemble(&self, patches: &[Descriptor32]) -> Result<WindowField> {
        let n_cols = self.space.n_cols();
        let expected = self.patch_rows() * n_cols;
        if patches.len() != expected {
            return Err(Error::ShapeMismatch { expected, actual: patches.len() });
        }
        let triplets = self
            .space
            .states()
            .map(|s| Triplet {
                descriptors: self.offsets.map(|o| patches[(s.row + o) * n_cols + s.col]),
                patch_offsets: self.offsets,
            })
            .collect();
        WindowField::from_triplets(self.space, triplets)
    }
}

/// Serial window field over raw windows.
pub fn precompute_window_field(map: &GrayImage, space: &StateSpace, cfg: &FeatureConfig) -> Result<WindowField> {
    precompute_window_field_with(map, space, cfg, WindowModel::Raw)
}

/// Serial window field construction. See `tacmap::parallel` for the partitioned form.
pub fn precompute_window_field_with(
    map: &GrayImage,
    space: &StateSpace,
    cfg: &FeatureConfig,
    window: WindowModel,
) -> Result<WindowField> {
    if map.rows() != space.map_dims().0 || map.cols() != space.map_dims().1 {
        return Err(Error::StateSpaceMismatch);
    }
    let plan = PatchPlan::new(space, cfg, window)?;
    let patches = plan.describe_rows(map, 0..plan.patch_rows(), cfg)?;
    plan.assemble(&patches)
}

/// How two triplets are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TripletMetric {
    /// Sum of all nine pairwise Euclidean distances.
    PairwiseL2,
    /// Sum of all nine pairwise squared differences.
    PairwiseSquared,
    /// Euclidean distances between corresponding patches only (three terms).
    ///
    /// The only variant whose self-distance is zero, so a window always matches
    /// itself best.
    #[default]
    Matched,
}

pub fn triplet_distance(a: &Triplet, b: &Triplet, metric: TripletMetric) -> f64 {
    let mut d = 0.0;
    match metric {
        TripletMetric::PairwiseL2 => {
            for x in &a.descriptors {
                for y in &b.descriptors {
                    d += x.distance(y);
                }
            }
        }
        TripletMetric::PairwiseSquared => {
            for x in &a.descriptors {
                for y in &b.descriptors {
                    d += x.squared_distance(y);
                }
            }
        }
        TripletMetric::Matched => {
            for (x, y) in a.descriptors.iter().zip(&b.descriptors) {
                d += x.distance(y);
            }
        }
    }
    d
}

/// Distances from `z` to the window triplets of the states in `range`.
pub fn distances_into(z: &Triplet, field: &WindowField, metric: TripletMetric, range: Range<usize>, out: &mut Vec<f64>) {
    out.extend(field.triplets[range].iter().map(|t| triplet_distance(t, z, metric)));
}

/// Which measurement model produces the distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasurementKind {
    #[default]
    Descriptor,
    /// Baseline: `1 - NCC` between the tactile image and the raw window.
    CrossCorrelation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig {
    pub kind: MeasurementKind,
    pub metric: TripletMetric,
    pub epsilon: f64,
    pub window: WindowModel,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            kind: MeasurementKind::Descriptor,
            metric: TripletMetric::default(),
            epsilon: DEFAULT_EPSILON,
            window: WindowModel::default(),
        }
    }
}

/// Per-state measurement probabilities, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodGrid {
    space: StateSpace,
    values: Vec<f64>,
}

impl LikelihoodGrid {
    /// `p(s) = eta / (d(s) + epsilon)`, with `eta` normalizing the grid.
    ///
    /// The normalizer is summed serially in state order, so the result does not
    /// depend on how `distances` was produced.
    pub fn from_distances(space: StateSpace, distances: &[f64], epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter("epsilon must be > 0"));
        }
        if distances.len() != space.len() {
            return Err(Error::ShapeMismatch { expected: space.len(), actual: distances.len() });
        }
        let mut values = Vec::with_capacity(distances.len());
        for (index, &d) in distances.iter().enumerate() {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::ValueOutOfRange { index, value: d });
            }
            values.push(1.0 / (d + epsilon));
        }
        let total: f64 = values.iter().sum();
        values.iter_mut().for_each(|v| *v /= total);
        Ok(Self { space, values })
    }

    /// Normalizes arbitrary non-negative scores.
    pub fn from_scores(space: StateSpace, mut scores: Vec<f64>) -> Result<Self> {
        if scores.len() != space.len() {
            return Err(Error::ShapeMismatch { expected: space.len(), actual: scores.len() });
        }
        if let Some((index, &value)) = scores.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::ValueOutOfRange { index, value });
        }
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateUpdate);
        }
        scores.iter_mut().for_each(|v| *v /= total);
        Ok(Self { space, values: scores })
    }

    #[inline]
    pub fn space(&self) -> &StateSpace {
        &self.space
    }
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    #[inline]
    pub fn get(&self, s: State) -> f64 {
        self.values[self.space.index(s)]
    }
}

/// Descriptor likelihood of tactile triplet `z` against every window.
pub fn likelihood(z: &Triplet, field: &WindowField, metric: TripletMetric, epsilon: f64) -> Result<LikelihoodGrid> {
    let mut d = Vec::with_capacity(field.space.len());
    distances_into(z, field, metric, 0..field.space.len(), &mut d);
    LikelihoodGrid::from_distances(field.space, &d, epsilon)
}

/// `1 - NCC` for the states in `range`. Zero-variance images correlate as 0.
pub fn ncc_distances_into(tactile: &GrayImage, map: &GrayImage, space: &StateSpace, range: Range<usize>, out: &mut Vec<f64>) -> Result<()> {
    let (wr, wc) = space.window_dims();
    if tactile.rows() != wr || tactile.cols() != wc {
        return Err(Error::ShapeMismatch { expected: wr * wc, actual: tactile.data().len() });
    }
    let n = (wr * wc) as f64;
    let t_mean = tactile.sum() / n;
    let t_var: f64 = tactile.data().iter().map(|v| (v - t_mean) * (v - t_mean)).sum();
    for index in range {
        let s = space.state(index);
        let mut sum = 0.0;
        for r in 0..wr {
            for c in 0..wc {
                sum += map.get(s.row + r, s.col + c);
            }
        }
        let w_mean = sum / n;
        let (mut cross, mut w_var) = (0.0, 0.0);
        for r in 0..wr {
            for c in 0..wc {
                let w = map.get(s.row + r, s.col + c) - w_mean;
                cross += w * (tactile.get(r, c) - t_mean);
                w_var += w * w;
            }
        }
        let denom = libm::sqrt(t_var * w_var);
        let ncc = if denom > 0.0 { (cross / denom).clamp(-1.0, 1.0) } else { 0.0 };
        out.push(1.0 - ncc);
    }
    Ok(())
}

/// Baseline likelihood from normalized cross-correlation.
pub fn ncc_likelihood(tactile: &GrayImage, map: &GrayImage, space: &StateSpace, epsilon: f64) -> Result<LikelihoodGrid> {
    let mut d = Vec::with_capacity(space.len());
    ncc_distances_into(tactile, map, space, 0..space.len(), &mut d)?;
    LikelihoodGrid::from_distances(*space, &d, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_triplet, DESCRIPTOR_LEN};
    use alloc::vec;
    use proptest::prelude::*;

    fn desc(v: &[f64]) -> Descriptor32 {
        let mut a = [0.0; DESCRIPTOR_LEN];
        a[..v.len()].copy_from_slice(v);
        Descriptor32(a)
    }

    fn triplet(d: [Descriptor32; 3]) -> Triplet {
        Triplet { descriptors: d, patch_offsets: [0, 9, 18] }
    }

    fn textured_map(rows: usize, cols: usize) -> GrayImage {
        GrayImage::from_fn(rows, cols, |r, c| {
            let (x, y) = (c as f64, r as f64);
            0.5 + 0.25 * libm::sin(0.31 * x + 0.17 * y) * libm::cos(0.23 * y - 0.05 * x * x / 9.0)
                + 0.2 * libm::sin(0.11 * x * y / 5.0)
        })
    }

    #[test]
    fn state_space_sizes() {
        let s = StateSpace::new(120, 120, 42, 18).unwrap();
        assert_eq!((s.n_rows(), s.n_cols(), s.len()), (79, 103, 8137));
        let one = build_state_space(&GrayImage::zeros(42, 18), 42, 18).unwrap();
        assert_eq!(one.len(), 1);
        assert!(matches!(
            build_state_space(&GrayImage::zeros(30, 30), 42, 18),
            Err(Error::MapSmallerThanWindow { .. })
        ));
        let st = State::new(5, 77);
        assert_eq!(s.state(s.index(st)), st);
    }

    #[test]
    fn single_state_field_matches_extract() {
        let map = textured_map(42, 18);
        let space = build_state_space(&map, 42, 18).unwrap();
        let cfg = FeatureConfig::default();
        let field = precompute_window_field(&map, &space, &cfg).unwrap();
        assert_eq!(field.triplets().len(), 1);
        assert_eq!(field.triplets()[0], extract_triplet(&map, &cfg).unwrap());
    }

    #[test]
    fn constant_map_field_is_zero() {
        let map = GrayImage::filled(50, 30, 0.8);
        let space = build_state_space(&map, 42, 18).unwrap();
        let field = precompute_window_field(&map, &space, &FeatureConfig::default()).unwrap();
        assert!(field.triplets().iter().all(|t| t.descriptors.iter().all(Descriptor32::is_zero)));
    }

    #[test]
    fn field_matches_cropped_windows() {
        let map = textured_map(60, 40);
        let space = build_state_space(&map, 42, 18).unwrap();
        let cfg = FeatureConfig::default();
        let field = precompute_window_field(&map, &space, &cfg).unwrap();
        // fixed pseudo-random probe states
        let mut x = 12345u64;
        for _ in 0..10 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let s = space.state((x >> 33) as usize % space.len());
            let crop = map.crop(s.row, s.col, 42, 18).unwrap();
            assert_eq!(*field.get(s), extract_triplet(&crop, &cfg).unwrap());
        }
    }

    #[test]
    fn sensor_cell_field_matches_cell_averaged_windows() {
        let map = textured_map(60, 40);
        let space = build_state_space(&map, 42, 18).unwrap();
        let cfg = FeatureConfig::default();
        let field = precompute_window_field_with(&map, &space, &cfg, WindowModel::SensorCells(3)).unwrap();
        let mut x = 99u64;
        for _ in 0..10 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let s = space.state((x >> 33) as usize % space.len());
            let view = map.cell_averaged_crop(s.row, s.col, 42, 18, 3).unwrap();
            assert_eq!(*field.get(s), extract_triplet(&view, &cfg).unwrap());
        }
        // patch offsets not on the cell grid
        let odd = FeatureConfig { triplet: crate::features::TripletConfig { spacing: 8, ..Default::default() }, ..cfg };
        assert!(PatchPlan::new(&space, &odd, WindowModel::SensorCells(3)).is_err());
    }

    #[test]
    fn toy_distances() {
        let a = triplet([desc(&[1.0, 0.0]); 3]);
        let b = triplet([desc(&[0.0, 1.0]); 3]);
        let d = triplet_distance(&a, &b, TripletMetric::PairwiseL2);
        assert!((d - 9.0 * core::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(triplet_distance(&a, &a, TripletMetric::PairwiseL2), 0.0);
        assert!((triplet_distance(&a, &b, TripletMetric::PairwiseSquared) - 18.0).abs() < 1e-12);
        assert!((triplet_distance(&a, &b, TripletMetric::Matched) - 3.0 * core::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn likelihood_cases() {
        let space = StateSpace::new(4, 5, 2, 2).unwrap();
        let uniform = LikelihoodGrid::from_distances(space, &vec![0.7; space.len()], 1e-6).unwrap();
        assert!(uniform.values().iter().all(|&v| (v - 1.0 / 12.0).abs() < 1e-15));

        let mut d = vec![3.0; space.len()];
        d[5] = 0.0;
        let peaked = LikelihoodGrid::from_distances(space, &d, 1e-6).unwrap();
        assert!(peaked.values()[5] > 0.9999);

        assert!(LikelihoodGrid::from_distances(space, &d, 0.0).is_err());
        assert!(LikelihoodGrid::from_distances(space, &d[1..], 1e-6).is_err());
    }

    #[test]
    fn self_match_is_maximal_on_noise_free_crop() {
        let map = textured_map(70, 50);
        let space = build_state_space(&map, 42, 18).unwrap();
        let cfg = FeatureConfig::default();
        let field = precompute_window_field(&map, &space, &cfg).unwrap();
        for s in [State::new(3, 4), State::new(20, 31), State::new(28, 0)] {
            let z = extract_triplet(&map.crop(s.row, s.col, 42, 18).unwrap(), &cfg).unwrap();
            let like = likelihood(&z, &field, TripletMetric::Matched, DEFAULT_EPSILON).unwrap();
            let best = (0..space.len()).fold(0, |b, i| if like.values()[i] > like.values()[b] { i } else { b });
            assert_eq!(space.state(best), s);
        }
    }

    #[test]
    fn ncc_prefers_exact_window() {
        let map = textured_map(60, 40);
        let space = build_state_space(&map, 42, 18).unwrap();
        let s = State::new(7, 13);
        let tactile = map.crop(s.row, s.col, 42, 18).unwrap();
        let like = ncc_likelihood(&tactile, &map, &space, 1e-6).unwrap();
        let best = (0..space.len()).fold(0, |b, i| if like.values()[i] > like.values()[b] { i } else { b });
        assert_eq!(space.state(best), s);
        assert!(ncc_likelihood(&GrayImage::zeros(10, 10), &map, &space, 1e-6).is_err());
    }

    fn arb_desc() -> impl Strategy<Value = Descriptor32> {
        proptest::collection::vec(0.0f64..1.0, DESCRIPTOR_LEN).prop_map(|v| desc(&v))
    }

    fn arb_triplet() -> impl Strategy<Value = Triplet> {
        (arb_desc(), arb_desc(), arb_desc()).prop_map(|(a, b, c)| triplet([a, b, c]))
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in arb_triplet(), b in arb_triplet()) {
            for m in [TripletMetric::PairwiseL2, TripletMetric::PairwiseSquared, TripletMetric::Matched] {
                prop_assert!((triplet_distance(&a, &b, m) - triplet_distance(&b, &a, m)).abs() < 1e-12);
            }
        }

        #[test]
        fn likelihood_is_pmf_and_monotone(d in proptest::collection::vec(0.0f64..20.0, 12)) {
            let space = StateSpace::new(4, 5, 2, 2).unwrap();
            let like = LikelihoodGrid::from_distances(space, &d, DEFAULT_EPSILON).unwrap();
            let sum: f64 = like.values().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(like.values().iter().all(|&v| v >= 0.0));
            for i in 0..12 {
                for j in 0..12 {
                    if d[i] < d[j] {
                        prop_assert!(like.values()[i] > like.values()[j]);
                    }
                }
            }
        }
    }
}
