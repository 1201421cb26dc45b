//! Worker-count-independent parallel evaluation of the window field and likelihoods.
//!
//! Work is split into contiguous index ranges, each worker fills its own buffer,
//! and buffers are concatenated in range order. Per-item arithmetic is the same
//! code the serial path runs, and grid normalization is summed serially, so
//! results are bitwise identical for any worker count.

use std::num::NonZeroUsize;
use std::ops::Range;
use std::thread;

use tacmap_core::measurement::{distances_into, ncc_distances_into, PatchPlan};
use tacmap_core::{FeatureConfig, GrayImage, LikelihoodGrid, StateSpace, Triplet, TripletMetric, WindowField, WindowModel};

use crate::error::Result;

/// `0` means one worker per available core.
pub fn resolve_workers(workers: usize) -> usize {
    if workers > 0 {
        workers
    } else {
        thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1)
    }
}

/// Splits `0..n` into at most `parts` contiguous, nearly equal ranges.
pub fn chunks(n: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.clamp(1, n.max(1));
    let (base, extra) = (n / parts, n % parts);
    let mut start = 0;
    (0..parts)
        .map(|k| {
            let len = base + usize::from(k < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Runs `f` over contiguous ranges of `0..n` on `workers` threads and concatenates in order.
pub fn partitioned<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<usize>) -> Result<Vec<T>> + Sync,
{
    let ranges = chunks(n, resolve_workers(workers));
    if ranges.len() == 1 {
        return f(0..n);
    }
    let parts: Vec<Result<Vec<T>>> = thread::scope(|scope| {
        let handles: Vec<_> = ranges.into_iter().map(|r| scope.spawn(|| f(r))).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Window field with patch rows partitioned across workers.
pub fn window_field(
    map: &GrayImage,
    space: &StateSpace,
    cfg: &FeatureConfig,
    window: WindowModel,
    workers: usize,
) -> Result<WindowField> {
    if (map.rows(), map.cols()) != space.map_dims() {
        return Err(tacmap_core::Error::StateSpaceMismatch.into());
    }
    let plan = PatchPlan::new(space, cfg, window)?;
    let patches = partitioned(plan.patch_rows(), workers, |rows| Ok(plan.describe_rows(map, rows, cfg)?))?;
    Ok(plan.assemble(&patches)?)
}

pub fn likelihood(
    z: &Triplet,
    field: &WindowField,
    metric: TripletMetric,
    epsilon: f64,
    workers: usize,
) -> Result<LikelihoodGrid> {
    let space = *field.space();
    let d = partitioned(space.len(), workers, |r| {
        let mut out = Vec::with_capacity(r.len());
        distances_into(z, field, metric, r, &mut out);
        Ok(out)
    })?;
    Ok(LikelihoodGrid::from_distances(space, &d, epsilon)?)
}

pub fn ncc_likelihood(
    tactile: &GrayImage,
    map: &GrayImage,
    space: &StateSpace,
    epsilon: f64,
    workers: usize,
) -> Result<LikelihoodGrid> {
    let d = partitioned(space.len(), workers, |r| {
        let mut out = Vec::with_capacity(r.len());
        ncc_distances_into(tactile, map, space, r, &mut out)?;
        Ok(out)
    })?;
    Ok(LikelihoodGrid::from_distances(*space, &d, epsilon)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_exactly() {
        for n in [0, 1, 7, 100] {
            for parts in [1, 3, 8, 200] {
                let c = chunks(n, parts);
                assert_eq!(c.first().unwrap().start, 0);
                assert_eq!(c.last().unwrap().end, n);
                assert!(c.windows(2).all(|w| w[0].end == w[1].start));
                let (lo, hi) = (c.iter().map(|r| r.len()).min().unwrap(), c.iter().map(|r| r.len()).max().unwrap());
                assert!(hi - lo <= 1);
            }
        }
    }

    #[test]
    fn partitioned_preserves_order() {
        let v = partitioned(1000, 7, |r| Ok(r.collect())).unwrap();
        assert_eq!(v, (0..1000).collect::<Vec<_>>());
    }
}
