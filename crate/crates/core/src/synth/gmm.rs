use rand::Rng;

use super::truth::{eigenvalues, GaussianComponent, GaussianMixtureTruth};
use crate::error::{Error, Result};
use crate::rng::{seeded, stream_seed};

const EIGEN_FLOOR: f64 = 1e-6;
const MAX_ITERATIONS: usize = 500;
const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GaussianMixtureFit {
    pub truth: GaussianMixtureTruth,
    pub log_likelihood: f64,
    pub bic: f64,
    pub iterations: usize,
}

/// Raises covariance eigenvalues to at least `EIGEN_FLOOR`.
fn regularize(cov: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let (l1, l2) = eigenvalues(&cov);
    if l1 >= EIGEN_FLOOR {
        return cov;
    }
    // eigenvector of the larger eigenvalue
    let (x, y) = if cov[0][1].abs() > 1e-300 {
        (l2 - cov[1][1], cov[0][1])
    } else if cov[0][0] >= cov[1][1] {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let norm = x.hypot(y);
    let (x, y) = (x / norm, y / norm);
    let (a, b) = (l1.max(EIGEN_FLOOR), l2.max(EIGEN_FLOOR));
    // V diag(b, a) Vᵀ with V = [(x, y), (−y, x)]
    [
        [b * x * x + a * y * y, (b - a) * x * y],
        [(b - a) * x * y, b * y * y + a * x * x],
    ]
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn initial_means(points: &[(f64, f64)], k: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = seeded(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = vec![f64::INFINITY; points.len()];
    while centers.len() < k {
        let last = *centers.last().expect("non-empty");
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min((p.0 - last.0).powi(2) + (p.1 - last.1).powi(2));
        }
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[next]);
    }
    centers.into_iter().map(|c| [c.0, c.1]).collect()
}

/// EM fit of a `k`-component bivariate normal mixture.
pub fn fit_gaussian_mixture(points: &[(f64, f64)], k: usize, seed: u64) -> Result<GaussianMixtureFit> {
    if k == 0 {
        return Err(Error::invalid("k", "must be positive"));
    }
    let n = points.len();
    if n < 6 * k {
        return Err(Error::InsufficientData { needed: 6 * k, got: n });
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::NonFinite("points"));
    }
    let (mu, mv) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mu, mv) = (mu / n as f64, mv / n as f64);
    let mut pooled = [[0.0; 2]; 2];
    for p in points {
        let (du, dv) = (p.0 - mu, p.1 - mv);
        pooled[0][0] += du * du;
        pooled[0][1] += du * dv;
        pooled[1][1] += dv * dv;
    }
    pooled[1][0] = pooled[0][1];
    let pooled = regularize(pooled.map(|row| row.map(|v| v / n as f64)));

    let means = initial_means(points, k, stream_seed(seed, 0));
    let mut comps: Vec<GaussianComponent> = means
        .into_iter()
        .map(|m| GaussianComponent::new(1.0 / k as f64, m, pooled))
        .collect::<Result<_>>()?;

    let mut resp = vec![0.0; n * k];
    let mut prev = f64::NEG_INFINITY;
    let mut ll = prev;
    let mut iterations = 0;
    let mut scratch = vec![0.0; k];
    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        ll = 0.0;
        for (i, p) in points.iter().enumerate() {
            for (j, c) in comps.iter().enumerate() {
                scratch[j] = c.weight.ln() + c.ln_pdf(p.0, p.1);
            }
            let lse = log_sum_exp(&scratch);
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (scratch[j] - lse).exp();
            }
        }
        if (ll - prev).abs() < TOLERANCE * ll.abs().max(1.0) {
            break;
        }
        prev = ll;
        let mut next = Vec::with_capacity(k);
        for j in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nk < 1e-8 {
                // collapsed: restart at a random point with the pooled covariance
                let mut rng = seeded(stream_seed(seed, 1 + it as u64 * k as u64 + j as u64));
                let p = points[rng.random_range(0..n)];
                next.push(GaussianComponent::new(1.0 / n as f64, [p.0, p.1], pooled)?);
                continue;
            }
            let mut m = [0.0; 2];
            for (i, p) in points.iter().enumerate() {
                let r = resp[i * k + j];
                m[0] += r * p.0;
                m[1] += r * p.1;
            }
            m[0] /= nk;
            m[1] /= nk;
            let mut c = [[0.0; 2]; 2];
            for (i, p) in points.iter().enumerate() {
                let r = resp[i * k + j];
                let (du, dv) = (p.0 - m[0], p.1 - m[1]);
                c[0][0] += r * du * du;
                c[0][1] += r * du * dv;
                c[1][1] += r * dv * dv;
            }
            c[1][0] = c[0][1];
            let c = regularize(c.map(|row| row.map(|v| v / nk)));
            next.push(GaussianComponent::new(nk / n as f64, m, c)?);
        }
        let total: f64 = next.iter().map(|c| c.weight).sum();
        comps = next
            .into_iter()
            .map(|c| GaussianComponent::new(c.weight / total, c.mean, c.cov))
            .collect::<Result<_>>()?;
    }
    let p = 6 * k - 1;
    Ok(GaussianMixtureFit {
        truth: GaussianMixtureTruth::new(comps)?,
        log_likelihood: ll,
        bic: -2.0 * ll + p as f64 * (n as f64).ln(),
        iterations,
    })
}

/// Fits each candidate count and keeps the lowest BIC (ties to fewer components).
pub fn select_gaussian_mixture(
    points: &[(f64, f64)],
    candidates: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<GaussianMixtureFit> {
    let mut best: Option<GaussianMixtureFit> = None;
    let mut last_err = None;
    for k in candidates {
        match fit_gaussian_mixture(points, k, seed) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.bic < b.bic) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::Empty("candidate range")))
}
