//! Recursive Bayes filter over window-start states.
//!
//! `bel'(x) = sum_x' p(x | u, x') bel(x')` then `bel(x) = eta p(z | x) bel'(x)`,
//! starting from a uniform prior.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::Triplet;
use crate::measurement::{likelihood, LikelihoodGrid, State, StateSpace, TripletMetric, WindowField};

/// Probability mass over the states of a [`StateSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    space: StateSpace,
    mass: Vec<f64>,
}

impl Belief {
    /// Wraps and normalizes non-negative masses.
    pub fn from_mass(space: StateSpace, mut mass: Vec<f64>) -> Result<Self> {
        if mass.len() != space.len() {
            return Err(Error::ShapeMismatch { expected: space.len(), actual: mass.len() });
        }
        if let Some((index, &value)) = mass.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::ValueOutOfRange { index, value });
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateUpdate);
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Self { space, mass })
    }

    pub fn delta(space: StateSpace, s: State) -> Result<Self> {
        space.check(s)?;
        let mut mass = vec![0.0; space.len()];
        mass[space.index(s)] = 1.0;
        Ok(Self { space, mass })
    }

    #[inline]
    pub fn space(&self) -> &StateSpace {
        &self.space
    }
    #[inline]
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
    #[inline]
    pub fn get(&self, s: State) -> f64 {
        self.mass[self.space.index(s)]
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.mass.iter().filter(|&&p| p > 0.0).map(|&p| p * libm::log(p)).sum::<f64>()
    }
}

pub fn init_uniform(space: &StateSpace) -> Belief {
    let n = space.len();
    Belief { space: *space, mass: vec![1.0 / n as f64; n] }
}

/// Odometry displacement between touches, in map pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Control {
    /// Row displacement.
    pub dx: f64,
    /// Column displacement.
    pub dy: f64,
}

impl Control {
    pub const ZERO: Self = Self { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }
}

/// Destination set around the state nearest the predicted location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Neighborhood {
    /// Nearest state plus its 4-connected neighbours.
    Four,
    /// Nearest state plus its 8-connected neighbours.
    #[default]
    Eight,
    /// Nearest state plus the 24 others of its 5x5 block.
    TwentyFour,
}

impl Neighborhood {
    pub fn from_count(k: usize) -> Result<Self> {
        match k {
            4 => Ok(Self::Four),
            8 => Ok(Self::Eight),
            24 => Ok(Self::TwentyFour),
            _ => Err(Error::InvalidParameter("neighbor count must be 4, 8 or 24")),
        }
    }

    pub fn count(self) -> usize {
        match self {
            Self::Four => 4,
            Self::Eight => 8,
            Self::TwentyFour => 24,
        }
    }

    fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 5] = [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)];
        const EIGHT: [(i64, i64); 9] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1), (1, -1), (1, 0), (1, 1)];
        const TWENTY_FOUR: [(i64, i64); 25] = {
            let mut out = [(0i64, 0i64); 25];
            let mut i = 0;
            while i < 25 {
                out[i] = ((i / 5) as i64 - 2, (i % 5) as i64 - 2);
                i += 1;
            }
            out
        };
        match self {
            Self::Four => &FOUR,
            Self::Eight => &EIGHT,
            Self::TwentyFour => &TWENTY_FOUR,
        }
    }
}

/// What happens to mass predicted to land outside the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// The kernel is centred on the nearest in-bounds state and renormalized over
    /// in-bounds destinations; no mass is lost.
    #[default]
    Clamp,
    /// Off-map destinations keep their share of the kernel and that mass is
    /// dropped; the prediction is renormalized globally.
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionConfig {
    pub sigma_row: f64,
    pub sigma_col: f64,
    pub neighborhood: Neighborhood,
    pub boundary: BoundaryPolicy,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self { sigma_row: 1.0, sigma_col: 1.0, neighborhood: Neighborhood::Eight, boundary: BoundaryPolicy::Clamp }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_row >= 0.0 && self.sigma_col >= 0.0 && self.sigma_row.is_finite() && self.sigma_col.is_finite()) {
            return Err(Error::InvalidParameter("motion sigmas must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Squared-offset exponent for one axis; `None` excludes the destination.
#[inline]
fn axis_exponent(delta: f64, offset: i64, sigma: f64) -> Option<f64> {
    if sigma > 0.0 {
        Some(delta * delta / (2.0 * sigma * sigma))
    } else if offset == 0 {
        Some(0.0)
    } else {
        None
    }
}

/// Transition weights from `src` under control `u`: destinations around the state
/// nearest `src + u`, Gaussian in their offset from the continuous prediction.
/// Appends `(state index, weight)` for in-bounds destinations.
fn transition(space: &StateSpace, src: State, u: Control, cfg: &MotionConfig, out: &mut Vec<(usize, f64)>) {
    let (n_rows, n_cols) = (space.n_rows() as i64, space.n_cols() as i64);
    let pred_r = src.row as f64 + u.dx;
    let pred_c = src.col as f64 + u.dy;
    let mut near_r = libm::floor(pred_r + 0.5) as i64;
    let mut near_c = libm::floor(pred_c + 0.5) as i64;
    let clamp = cfg.boundary == BoundaryPolicy::Clamp;
    if clamp {
        near_r = near_r.clamp(0, n_rows - 1);
        near_c = near_c.clamp(0, n_cols - 1);
    }

    let start = out.len();
    let mut min_q = f64::INFINITY;
    // off-map destinations only count towards the normalizer under Discard
    let mut off_map = [0.0f64; 25];
    let mut n_off = 0;
    for &(or, oc) in cfg.neighborhood.offsets() {
        let (r, c) = (near_r + or, near_c + oc);
        let inside = r >= 0 && c >= 0 && r < n_rows && c < n_cols;
        if !inside && clamp {
            continue;
        }
        let (Some(qr), Some(qc)) = (
            axis_exponent(r as f64 - pred_r, or, cfg.sigma_row),
            axis_exponent(c as f64 - pred_c, oc, cfg.sigma_col),
        ) else {
            continue;
        };
        let q = qr + qc;
        min_q = min_q.min(q);
        if inside {
            out.push(((r * n_cols + c) as usize, q));
        } else {
            off_map[n_off] = q;
            n_off += 1;
        }
    }
    // exponents are shifted by their minimum so far-off predictions cannot underflow to all zeros
    let mut total = 0.0;
    for entry in &mut out[start..] {
        entry.1 = libm::exp(-(entry.1 - min_q));
        total += entry.1;
    }
    for &q in &off_map[..n_off] {
        total += libm::exp(-(q - min_q));
    }
    for entry in &mut out[start..] {
        entry.1 /= total;
    }
}

/// Motion (control) update. Under [`BoundaryPolicy::Clamp`] mass leaving the
/// state space is redistributed among the in-bounds destinations of the same
/// source, so total mass is conserved; under `Discard` it is dropped and the
/// result renormalized, failing with [`Error::DegenerateUpdate`] if nothing is left.
pub fn control_update(bel: &Belief, u: Control, cfg: &MotionConfig) -> Result<Belief> {
    cfg.validate()?;
    if !(u.dx.is_finite() && u.dy.is_finite()) {
        return Err(Error::InvalidParameter("control must be finite"));
    }
    let space = bel.space;
    let mut next = vec![0.0; space.len()];
    let mut weights = Vec::with_capacity(25);
    for (index, &m) in bel.mass.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        weights.clear();
        transition(&space, space.state(index), u, cfg, &mut weights);
        for &(dst, w) in &weights {
            next[dst] += m * w;
        }
    }
    let total: f64 = next.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateUpdate);
    }
    next.iter_mut().for_each(|m| *m /= total);
    Ok(Belief { space, mass: next })
}

/// Multiplies by the likelihood and renormalizes.
pub fn measurement_update(bel: &Belief, like: &LikelihoodGrid) -> Result<Belief> {
    if bel.space != *like.space() {
        return Err(Error::StateSpaceMismatch);
    }
    let mut mass: Vec<f64> = bel.mass.iter().zip(like.values()).map(|(b, l)| b * l).collect();
    let total: f64 = mass.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateUpdate);
    }
    mass.iter_mut().for_each(|m| *m /= total);
    Ok(Belief { space: bel.space, mass })
}

/// Most probable state; ties go to the lexicographically smallest `(row, col)`.
pub fn map_estimate(bel: &Belief) -> (State, f64) {
    let mut best = 0;
    for (i, &m) in bel.mass.iter().enumerate() {
        if m > bel.mass[best] {
            best = i;
        }
    }
    (bel.space.state(best), bel.mass[best])
}

/// One full filter iteration against the descriptor measurement model.
pub fn step(
    bel: &Belief,
    u: Control,
    z: &Triplet,
    field: &WindowField,
    motion: &MotionConfig,
    metric: TripletMetric,
    epsilon: f64,
) -> Result<Belief> {
    if bel.space != *field.space() {
        return Err(Error::StateSpaceMismatch);
    }
    let predicted = control_update(bel, u, motion)?;
    let like = likelihood(z, field, metric, epsilon)?;
    measurement_update(&predicted, &like)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationError {
    pub pixels: f64,
    pub mm: f64,
}

/// Euclidean distance between the window centers of two states.
pub fn localization_error(space: &StateSpace, est: State, truth: State, mm_per_pixel: f64) -> LocalizationError {
    let (er, ec) = space.window_center(est);
    let (tr, tc) = space.window_center(truth);
    let pixels = libm::hypot(er - tr, ec - tc);
    LocalizationError { pixels, mm: pixels * mm_per_pixel }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space(n: usize) -> StateSpace {
        StateSpace::new(n, n, 1, 1).unwrap()
    }

    fn lcg_belief(space: StateSpace, seed: u64) -> Belief {
        let mut x = seed;
        let mass = (0..space.len())
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((x >> 11) as f64 / (1u64 << 53) as f64) + 1e-3
            })
            .collect();
        Belief::from_mass(space, mass).unwrap()
    }

    fn sum(b: &Belief) -> f64 {
        b.mass().iter().sum()
    }

    #[test]
    fn uniform_prior() {
        let s = StateSpace::new(120, 120, 42, 18).unwrap();
        let b = init_uniform(&s);
        assert!(b.mass().iter().all(|&m| m == 1.0 / 8137.0));
        assert!((sum(&b) - 1.0).abs() < 1e-12);
        let one = init_uniform(&space(1));
        assert_eq!(one.mass(), &[1.0]);
        assert_eq!(map_estimate(&b), (State::new(0, 0), 1.0 / 8137.0));
    }

    #[test]
    fn zero_sigma_zero_control_is_identity() {
        let cfg = MotionConfig { sigma_row: 0.0, sigma_col: 0.0, ..MotionConfig::default() };
        let b = lcg_belief(space(6), 3);
        let out = control_update(&b, Control::ZERO, &cfg).unwrap();
        for (x, y) in out.mass().iter().zip(b.mass()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_sigma_integer_control_shifts_delta() {
        let sp = space(20);
        let cfg = MotionConfig { sigma_row: 0.0, sigma_col: 0.0, ..MotionConfig::default() };
        let b = Belief::delta(sp, State::new(10, 10)).unwrap();
        let out = control_update(&b, Control::new(3.0, 0.0), &cfg).unwrap();
        assert_eq!(out.get(State::new(13, 10)), 1.0);
        // clamped at the boundary
        let out = control_update(&b, Control::new(30.0, -15.0), &cfg).unwrap();
        assert_eq!(out.get(State::new(19, 0)), 1.0);
    }

    /// Dense `N x N` transition matrix written directly from the kernel definition.
    fn dense_transition(sp: &StateSpace, u: Control, sr: f64, sc: f64) -> Vec<Vec<f64>> {
        let n = sp.len();
        let mut t = vec![vec![0.0; n]; n];
        for src in 0..n {
            let s = sp.state(src);
            let (pr, pc) = (s.row as f64 + u.dx, s.col as f64 + u.dy);
            let nr = (pr.round() as i64).clamp(0, sp.n_rows() as i64 - 1);
            let nc = (pc.round() as i64).clamp(0, sp.n_cols() as i64 - 1);
            let mut col = vec![0.0; n];
            for dst in 0..n {
                let d = sp.state(dst);
                if (d.row as i64 - nr).abs() <= 1 && (d.col as i64 - nc).abs() <= 1 {
                    let (dr, dc) = (d.row as f64 - pr, d.col as f64 - pc);
                    col[dst] = (-(dr * dr) / (2.0 * sr * sr) - (dc * dc) / (2.0 * sc * sc)).exp();
                }
            }
            let z: f64 = col.iter().sum();
            for dst in 0..n {
                t[dst][src] = col[dst] / z;
            }
        }
        t
    }

    #[test]
    fn control_update_matches_dense_matrix() {
        let sp = space(5);
        let b = lcg_belief(sp, 11);
        let u = Control::new(1.0, 1.0);
        let cfg = MotionConfig { sigma_row: 0.7, sigma_col: 0.7, ..MotionConfig::default() };
        let out = control_update(&b, u, &cfg).unwrap();
        let t = dense_transition(&sp, u, 0.7, 0.7);
        for dst in 0..sp.len() {
            let expect: f64 = (0..sp.len()).map(|src| t[dst][src] * b.mass()[src]).sum();
            assert!((out.mass()[dst] - expect).abs() < 1e-12, "state {dst}");
        }
    }

    #[test]
    fn discard_drops_off_map_mass() {
        // half the mass sits on the top edge and moves up one row: two thirds of
        // its kernel rows fall off the map
        let sp = space(5);
        let mut mass = vec![0.0; sp.len()];
        mass[sp.index(State::new(0, 2))] = 0.5;
        mass[sp.index(State::new(4, 2))] = 0.5;
        let bel = Belief::from_mass(sp, mass).unwrap();
        let cfg = MotionConfig { boundary: BoundaryPolicy::Discard, ..MotionConfig::default() };
        let out = control_update(&bel, Control::new(-1.0, 0.0), &cfg).unwrap();
        let a = libm::exp(-0.5);
        let z = (1.0 + 2.0 * a) * (1.0 + 2.0 * a);
        let kept = 0.5 * a * (1.0 + 2.0 * a) / z + 0.5;
        assert!((out.get(State::new(0, 2)) - 0.5 * a / z / kept).abs() < 1e-15);
        assert!((out.get(State::new(3, 2)) - 0.5 / z / kept).abs() < 1e-15);
        assert!((out.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let gone = Belief::delta(sp, State::new(0, 0)).unwrap();
        assert!(matches!(control_update(&gone, Control::new(-10.0, 0.0), &cfg), Err(Error::DegenerateUpdate)));
        // clamping keeps everything
        let clamped = control_update(&gone, Control::new(-10.0, 0.0), &MotionConfig::default()).unwrap();
        assert!(clamped.get(State::new(0, 0)) > 0.3);
    }

    #[test]
    fn fractional_control_spreads_mass() {
        let sp = space(9);
        let b = Belief::delta(sp, State::new(4, 4)).unwrap();
        let out = control_update(&b, Control::new(0.5, 0.0), &MotionConfig::default()).unwrap();
        // prediction at row 4.5: rows 4 and 5 are equidistant
        assert!((out.get(State::new(4, 4)) - out.get(State::new(5, 4))).abs() < 1e-12);
        assert!(out.get(State::new(5, 4)) > out.get(State::new(6, 4)));
    }

    #[test]
    fn far_off_prediction_does_not_underflow() {
        let sp = space(4);
        let b = Belief::delta(sp, State::new(0, 0)).unwrap();
        let cfg = MotionConfig { sigma_row: 0.1, sigma_col: 0.1, ..MotionConfig::default() };
        let out = control_update(&b, Control::new(500.0, -500.0), &cfg).unwrap();
        assert!((sum(&out) - 1.0).abs() < 1e-12);
        assert_eq!(map_estimate(&out).0, State::new(3, 0));
    }

    #[test]
    fn neighborhoods() {
        let sp = space(9);
        let b = Belief::delta(sp, State::new(4, 4)).unwrap();
        for (k, support) in [(4, 5), (8, 9), (24, 25)] {
            let cfg = MotionConfig { neighborhood: Neighborhood::from_count(k).unwrap(), ..MotionConfig::default() };
            let out = control_update(&b, Control::ZERO, &cfg).unwrap();
            assert_eq!(out.mass().iter().filter(|&&m| m > 0.0).count(), support);
        }
        assert!(Neighborhood::from_count(6).is_err());
    }

    #[test]
    fn measurement_update_cases() {
        let sp = space(5);
        let like = LikelihoodGrid::from_distances(sp, &(0..25).map(|i| i as f64 * 0.1).collect::<Vec<_>>(), 1e-6).unwrap();
        let post = measurement_update(&init_uniform(&sp), &like).unwrap();
        for (a, b) in post.mass().iter().zip(like.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        let delta = Belief::delta(sp, State::new(2, 3)).unwrap();
        assert_eq!(measurement_update(&delta, &like).unwrap(), delta);

        let prior = lcg_belief(sp, 5);
        let post = measurement_update(&prior, &like).unwrap();
        let prod: Vec<f64> = prior.mass().iter().zip(like.values()).map(|(a, b)| a * b).collect();
        let z: f64 = prod.iter().sum();
        for (a, b) in post.mass().iter().zip(&prod) {
            assert!((a - b / z).abs() < 1e-12);
        }

        let other = space(4);
        assert_eq!(measurement_update(&init_uniform(&other), &like), Err(Error::StateSpaceMismatch));

        let sparse = LikelihoodGrid::from_scores(sp, (0..25).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()).unwrap();
        assert_eq!(measurement_update(&delta, &sparse), Err(Error::DegenerateUpdate));
    }

    #[test]
    fn map_estimate_ties() {
        let sp = StateSpace::new(10, 20, 1, 1).unwrap();
        let b = Belief::delta(sp, State::new(4, 7)).unwrap();
        assert_eq!(map_estimate(&b), (State::new(4, 7), 1.0));
        let mut mass = vec![0.0; sp.len()];
        mass[sp.index(State::new(2, 9))] = 0.5;
        mass[sp.index(State::new(2, 3))] = 0.5;
        let b = Belief::from_mass(sp, mass).unwrap();
        assert_eq!(map_estimate(&b).0, State::new(2, 3));
    }

    #[test]
    fn localization_errors() {
        let sp = StateSpace::new(120, 120, 42, 18).unwrap();
        let e = localization_error(&sp, State::new(10, 10), State::new(10, 10), 3.4 / 3.0);
        assert_eq!((e.pixels, e.mm), (0.0, 0.0));
        let e = localization_error(&sp, State::new(10, 10), State::new(13, 14), 3.4 / 3.0);
        assert!((e.pixels - 5.0).abs() < 1e-12);
        assert!((e.mm - 5.0 * 3.4 / 3.0).abs() < 1e-12);
        assert!((e.mm - 5.667).abs() < 1e-3);
    }

    #[test]
    fn entropy_bounds() {
        let sp = space(4);
        assert!((init_uniform(&sp).entropy() - (16.0f64).ln()).abs() < 1e-12);
        assert_eq!(Belief::delta(sp, State::new(1, 1)).unwrap().entropy(), 0.0);
    }

    proptest! {
        #[test]
        fn control_update_keeps_pmf(seed in any::<u64>(), dx in -6.0f64..6.0, dy in -6.0f64..6.0,
                                    sr in 0.0f64..3.0, sc in 0.0f64..3.0, k in prop::sample::select(vec![4usize, 8, 24])) {
            let sp = StateSpace::new(9, 7, 1, 1).unwrap();
            let b = lcg_belief(sp, seed);
            let cfg = MotionConfig { sigma_row: sr, sigma_col: sc, neighborhood: Neighborhood::from_count(k).unwrap(), ..Default::default() };
            let out = control_update(&b, Control::new(dx, dy), &cfg).unwrap();
            prop_assert!((sum(&out) - 1.0).abs() < 1e-9);
            prop_assert!(out.mass().iter().all(|&m| m >= 0.0));
        }

        #[test]
        fn measurement_update_ignores_prior_scale(seed in any::<u64>(), c in 0.01f64..100.0) {
            let sp = space(5);
            let prior = lcg_belief(sp, seed);
            let scaled = Belief::from_mass(sp, prior.mass().iter().map(|m| m * c).collect()).unwrap();
            let like = LikelihoodGrid::from_distances(sp, &lcg_belief(sp, seed ^ 7).mass().to_vec(), 1e-6).unwrap();
            let a = measurement_update(&prior, &like).unwrap();
            let b = measurement_update(&scaled, &like).unwrap();
            for (x, y) in a.mass().iter().zip(b.mass()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let scaled_map = map_estimate(&Belief { space: sp, mass: a.mass().iter().map(|m| m * c).collect() }).0;
            prop_assert_eq!(map_estimate(&a).0, scaled_map);
        }
    }
}
