//! Brute-force reference implementations used to cross-check the fast paths.
//!
//! * a dense HMM forward recursion with an explicitly built transition matrix,
//!   compared against the grid filter on a tiny scripted run;
//! * a gather-style 32-bin SIFT that evaluates every descriptor bin as a direct
//!   sum over all patch pixels, compared against the scatter implementation.

use std::f64::consts::TAU;

use tacmap_core::features::{describe_patch, ZERO_NORM};
use tacmap_core::filter::{control_update, init_uniform, measurement_update, BoundaryPolicy, MotionConfig, Neighborhood};
use tacmap_core::measurement::ncc_likelihood;
use tacmap_core::simulator::derive_seed;
use tacmap_core::{Control, Descriptor32, GrayImage, LikelihoodGrid, SiftConfig, State, StateSpace};

use crate::error::Result;

fn in_neighborhood(n: Neighborhood, dr: i64, dc: i64) -> bool {
    match n {
        Neighborhood::Four => dr.abs() + dc.abs() <= 1,
        Neighborhood::Eight => dr.abs() <= 1 && dc.abs() <= 1,
        Neighborhood::TwentyFour => dr.abs() <= 2 && dc.abs() <= 2,
    }
}

/// `N x N` transition matrix, `t[src * N + dst]`, for strictly positive sigmas.
///
/// Rows sum to one under [`BoundaryPolicy::Clamp`]; under `Discard` a row keeps
/// only the in-bounds share of a kernel that is normalized over all its cells.
pub fn dense_transition(space: &StateSpace, u: Control, cfg: &MotionConfig) -> Vec<f64> {
    assert!(cfg.sigma_row > 0.0 && cfg.sigma_col > 0.0, "dense oracle needs positive sigmas");
    let n = space.len();
    let (max_r, max_c) = (space.n_rows() as f64 - 1.0, space.n_cols() as f64 - 1.0);
    let gauss = |er: f64, ec: f64| {
        (-(er * er) / (2.0 * cfg.sigma_row * cfg.sigma_row) - (ec * ec) / (2.0 * cfg.sigma_col * cfg.sigma_col)).exp()
    };
    let mut t = vec![0.0; n * n];
    for src in 0..n {
        let s = space.state(src);
        let (pr, pc) = (s.row as f64 + u.dx, s.col as f64 + u.dy);
        let (mut nr, mut nc) = ((pr + 0.5).floor(), (pc + 0.5).floor());
        if cfg.boundary == BoundaryPolicy::Clamp {
            (nr, nc) = (nr.clamp(0.0, max_r), nc.clamp(0.0, max_c));
        }
        let row = &mut t[src * n..(src + 1) * n];
        for (dst, w) in row.iter_mut().enumerate() {
            let d = space.state(dst);
            if in_neighborhood(cfg.neighborhood, d.row as i64 - nr as i64, d.col as i64 - nc as i64) {
                *w = gauss(d.row as f64 - pr, d.col as f64 - pc);
            }
        }
        let total = match cfg.boundary {
            BoundaryPolicy::Clamp => row.iter().sum::<f64>(),
            BoundaryPolicy::Discard => {
                let mut z = 0.0;
                for dr in -2i64..=2 {
                    for dc in -2i64..=2 {
                        if in_neighborhood(cfg.neighborhood, dr, dc) {
                            z += gauss(nr + dr as f64 - pr, nc + dc as f64 - pc);
                        }
                    }
                }
                z
            }
        };
        row.iter_mut().for_each(|w| *w /= total);
    }
    t
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// Forward recursion: `alpha_0 ∝ prior ⊙ L_0`, `alpha_t ∝ L_t ⊙ (T_tᵀ alpha_{t-1})`.
/// `transitions[t - 1]` moves from step `t - 1` to step `t`.
pub fn forward(prior: &[f64], transitions: &[Vec<f64>], likelihoods: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = prior.len();
    let mut alphas = Vec::with_capacity(likelihoods.len());
    let mut alpha = normalized(prior.iter().zip(&likelihoods[0]).map(|(p, l)| p * l).collect());
    alphas.push(alpha.clone());
    for (t, like) in transitions.iter().zip(&likelihoods[1..]) {
        let mut predicted = vec![0.0; n];
        for (src, &a) in alpha.iter().enumerate() {
            for (dst, p) in predicted.iter_mut().enumerate() {
                *p += a * t[src * n + dst];
            }
        }
        alpha = normalized(predicted.iter().zip(like).map(|(p, l)| p * l).collect());
        alphas.push(alpha.clone());
    }
    alphas
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCheck {
    /// Largest absolute per-state difference at each step (initial touch first).
    pub max_abs_diff: Vec<f64>,
    pub states: usize,
}

impl ForwardCheck {
    pub fn worst(&self) -> f64 {
        self.max_abs_diff.iter().copied().fold(0.0, f64::max)
    }
}

fn hashed_unit(seed: u64, a: u64, b: u64) -> f64 {
    (derive_seed(seed, &[a, b]) >> 11) as f64 / (1u64 << 53) as f64
}

/// Scripted run on a 12x12 random map with a 3x3 window (100 states): an
/// initial touch and three moves with fractional controls. Likelihoods come
/// from the cross-correlation model on slightly perturbed window crops, and the
/// same grids feed both the filter and the dense forward recursion.
pub fn scripted_forward_check(seed: u64) -> Result<ForwardCheck> {
    scripted_forward_check_with(seed, BoundaryPolicy::Clamp)
}

pub fn scripted_forward_check_with(seed: u64, boundary: BoundaryPolicy) -> Result<ForwardCheck> {
    let map = GrayImage::from_fn(12, 12, |r, c| hashed_unit(seed, r as u64, c as u64));
    let space = StateSpace::new(12, 12, 3, 3)?;
    let motion = MotionConfig { sigma_row: 0.8, sigma_col: 1.1, neighborhood: Neighborhood::Eight, boundary };
    let truth = [State::new(1, 1), State::new(3, 4), State::new(6, 5), State::new(8, 8)];
    let controls = [Control::new(2.3, 2.8), Control::new(2.6, 1.2), Control::new(1.8, 3.4)];

    let mut likes: Vec<LikelihoodGrid> = Vec::new();
    for (k, s) in truth.iter().enumerate() {
        let touch = GrayImage::from_fn(3, 3, |r, c| {
            let v = map.get(s.row + r, s.col + c) + 0.05 * (hashed_unit(seed ^ 0x5eed, k as u64, (r * 3 + c) as u64) - 0.5);
            v.clamp(0.0, 1.0)
        });
        likes.push(ncc_likelihood(&touch, &map, &space, 1e-6)?);
    }

    let mut bel = measurement_update(&init_uniform(&space), &likes[0])?;
    let mut filtered = vec![bel.mass().to_vec()];
    for (u, like) in controls.iter().zip(&likes[1..]) {
        bel = measurement_update(&control_update(&bel, *u, &motion)?, like)?;
        filtered.push(bel.mass().to_vec());
    }

    let prior = vec![1.0 / space.len() as f64; space.len()];
    let transitions: Vec<Vec<f64>> = controls.iter().map(|u| dense_transition(&space, *u, &motion)).collect();
    let grids: Vec<Vec<f64>> = likes.iter().map(|l| l.values().to_vec()).collect();
    let reference = forward(&prior, &transitions, &grids);

    let max_abs_diff = filtered
        .iter()
        .zip(&reference)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        .collect();
    Ok(ForwardCheck { max_abs_diff, states: space.len() })
}

#[inline]
fn tri(t: f64) -> f64 {
    (1.0 - t.abs()).max(0.0)
}

/// Circular triangle weight on a ring of `n` bins.
#[inline]
fn tri_circ(t: f64, n: f64) -> f64 {
    let d = t.rem_euclid(n);
    tri(d.min(n - d))
}

/// Reference descriptor of a whole square image, computed bin by bin.
pub fn reference_sift32(patch: &GrayImage, cfg: &SiftConfig) -> Descriptor32 {
    const CELLS: usize = 2;
    const BINS: usize = 8;
    const DOMINANT: usize = 36;
    let n = patch.rows();
    assert_eq!(n, patch.cols(), "reference descriptor needs a square patch");
    let at = |r: i64, c: i64| patch.get(r.clamp(0, n as i64 - 1) as usize, c.clamp(0, n as i64 - 1) as usize);

    // (dx, dy, magnitude, orientation) per pixel
    let mut px = Vec::with_capacity(n * n);
    for r in 0..n as i64 {
        for c in 0..n as i64 {
            let gx = (at(r, c + 1) - at(r, c - 1)) / 2.0;
            let gy = (at(r + 1, c) - at(r - 1, c)) / 2.0;
            let half = n as f64 / 2.0;
            px.push((c as f64 + 0.5 - half, r as f64 + 0.5 - half, gx.hypot(gy), gy.atan2(gx).rem_euclid(TAU)));
        }
    }

    let theta0 = if cfg.align_orientation {
        let width = TAU / DOMINANT as f64;
        let hist: Vec<f64> = (0..DOMINANT)
            .map(|b| px.iter().map(|&(_, _, m, o)| m * tri_circ(o / width - b as f64, DOMINANT as f64)).sum())
            .collect();
        let peak = (0..DOMINANT).fold(0, |best, b| if hist[b] > hist[best] { b } else { best });
        let (l, c, r) = (hist[(peak + DOMINANT - 1) % DOMINANT], hist[peak], hist[(peak + 1) % DOMINANT]);
        let denom = l - 2.0 * c + r;
        let offset = if denom < 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
        ((peak as f64 + offset) * width).rem_euclid(TAU)
    } else {
        0.0
    };

    let extent = n as f64;
    let cell = extent / CELLS as f64;
    let sigma = extent / 2.0;
    let mut v = [0.0; CELLS * CELLS * BINS];
    for j in 0..CELLS {
        for i in 0..CELLS {
            for o in 0..BINS {
                let mut acc = 0.0;
                for &(dx, dy, m, ori) in &px {
                    let g = if cfg.gaussian_window { (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp() } else { 1.0 };
                    let x = theta0.cos() * dx + theta0.sin() * dy;
                    let y = -theta0.sin() * dx + theta0.cos() * dy;
                    let u = (x + extent / 2.0) / cell - 0.5;
                    let w = (y + extent / 2.0) / cell - 0.5;
                    let rel = (ori - theta0).rem_euclid(TAU) / (TAU / BINS as f64);
                    acc += m * g * tri(u - i as f64) * tri(w - j as f64) * tri_circ(rel - o as f64, BINS as f64);
                }
                v[(j * CELLS + i) * BINS + o] = acc;
            }
        }
    }

    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= ZERO_NORM {
        return Descriptor32::ZERO;
    }
    v.iter_mut().for_each(|x| *x = (*x / norm).min(cfg.clip));
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Descriptor32(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiftCheck {
    pub patches: usize,
    /// Largest element difference between the fast descriptor and the reference.
    pub max_reference_diff: f64,
    /// Largest element difference between the fast descriptor of the quarter-turned
    /// patch and the reference descriptor of the original.
    pub max_rotation_diff: f64,
}

/// Smooth random patch: a few seeded Gaussian blobs.
pub fn blob_patch(size: usize, seed: u64) -> GrayImage {
    let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|k| {
            let h = |j: u64| hashed_unit(seed, k, j);
            (h(0) * size as f64, h(1) * size as f64, 2.0 + 4.0 * h(2), 0.3 + 0.7 * h(3))
        })
        .collect();
    GrayImage::from_fn(size, size, |r, c| {
        let v: f64 = blobs
            .iter()
            .map(|&(br, bc, s, a)| a * (-((r as f64 - br).powi(2) + (c as f64 - bc).powi(2)) / (2.0 * s * s)).exp())
            .sum();
        v.min(1.0)
    })
}

/// Compares fast and reference descriptors on `count` random patches, unrotated and quarter-turned.
pub fn sift_check(count: usize, size: usize, cfg: &SiftConfig, seed: u64) -> Result<SiftCheck> {
    let mut max_reference_diff: f64 = 0.0;
    let mut max_rotation_diff: f64 = 0.0;
    for k in 0..count {
        let patch = blob_patch(size, derive_seed(seed, &[k as u64]));
        let reference = reference_sift32(&patch, cfg);
        let fast = describe_patch(&patch, 0, 0, size, cfg)?;
        let turned = describe_patch(&patch.rotate90(), 0, 0, size, cfg)?;
        for ((r, f), t) in reference.values().iter().zip(fast.values()).zip(turned.values()) {
            max_reference_diff = max_reference_diff.max((r - f).abs());
            max_rotation_diff = max_rotation_diff.max((r - t).abs());
        }
    }
    Ok(SiftCheck { patches: count, max_reference_diff, max_rotation_diff })
}
