use std::f64::consts::{PI, TAU};

use super::angle::Angle;
use crate::error::{Error, Result};

/// Circular median: the data point minimizing the summed arc distance to all
/// points. Ties resolve to the smallest angle.
///
/// Runs in `O(n log n)` by sorting and sweeping prefix sums over the
/// unrolled circle.
pub fn circular_median(angles: &[Angle]) -> Result<Angle> {
    if angles.is_empty() {
        return Err(Error::Empty("angles"));
    }
    let mut sorted: Vec<f64> = angles.iter().map(|a| a.radians()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();

    // ext[i] = sorted[i] for i < n, sorted[i - n] + 2π after
    let ext: Vec<f64> = sorted.iter().copied().chain(sorted.iter().map(|x| x + TAU)).collect();
    let mut prefix = Vec::with_capacity(2 * n + 1);
    prefix.push(0.0);
    for &x in &ext {
        prefix.push(prefix.last().unwrap() + x);
    }
    let range_sum = |a: usize, b: usize| prefix[b] - prefix[a];

    let mut best = (f64::INFINITY, sorted[0]);
    let mut split = 0usize;
    for k in 0..n {
        let m = sorted[k];
        // window ext[k..k+n] covers each point once at offsets in [0, 2π)
        split = split.max(k);
        while split < k + n && ext[split] - m <= PI {
            split += 1;
        }
        let near = (split - k) as f64;
        let far = (k + n - split) as f64;
        let cost = (range_sum(k, split) - near * m) + (far * (m + TAU) - range_sum(split, k + n));
        let tol = 1e-12 * cost.abs().max(1.0);
        if cost < best.0 - tol {
            best = (cost, m);
        }
    }
    Ok(Angle(best.1))
}
