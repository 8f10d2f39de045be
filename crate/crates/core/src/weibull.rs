//! Two-parameter Weibull distribution with maximum-likelihood fitting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Shape `α` and scale `β` of a Weibull law, both positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    shape: f64,
    scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::invalid("shape", format!("must be positive, got {shape}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", format!("must be positive, got {scale}")));
        }
        Ok(WeibullParams { shape, scale })
    }

    #[inline]
    pub fn shape(&self) -> f64 {
        self.shape
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn pdf(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("Weibull density needs r > 0, got {r}")));
        }
        Ok(self.pdf_unchecked(r))
    }

    #[inline]
    pub(crate) fn pdf_unchecked(&self, r: f64) -> f64 {
        let z = r / self.scale;
        (self.shape / self.scale) * z.powf(self.shape - 1.0) * (-z.powf(self.shape)).exp()
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        -(-(r / self.scale).powf(self.shape)).exp_m1()
    }

    /// `β (−ln(1 − τ))^{1/α}`.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(quantile_unchecked(self.shape, self.scale, tau))
    }

    pub fn log_likelihood(&self, speeds: &[f64]) -> f64 {
        log_likelihood(self.shape, self.scale, speeds)
    }

    pub fn mean(&self) -> f64 {
        self.scale * gamma(1.0 + 1.0 / self.shape)
    }

    /// Inverse-CDF draw from a single uniform.
    #[inline]
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.scale * (-(-u).ln_1p()).powf(1.0 / self.shape)
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Range(format!("probability level must lie in (0, 1), got {tau}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn quantile_unchecked(shape: f64, scale: f64, tau: f64) -> f64 {
    scale * (-(-tau).ln_1p()).powf(1.0 / shape)
}

pub fn weibull_pdf(r: f64, params: &WeibullParams) -> Result<f64> {
    params.pdf(r)
}

pub fn weibull_quantile(tau: f64, params: &WeibullParams) -> Result<f64> {
    params.quantile(tau)
}

pub fn weibull_sample(params: &WeibullParams, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..count).map(|_| params.draw(&mut rng)).collect()
}

/// Maximum-likelihood fit with observed-information standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullFit {
    pub params: WeibullParams,
    pub se_shape: f64,
    pub se_scale: f64,
    pub loglik: f64,
    pub n: usize,
}

pub const MIN_FIT_SIZE: usize = 5;
const SHAPE_BRACKET: (f64, f64) = (1e-3, 1e3);
const SCORE_TOLERANCE: f64 = 1e-10;

/// Fits `(α, β)` by maximizing the profile likelihood in `α`.
///
/// The profile score `Σ r^α ln r / Σ r^α − 1/α − mean(ln r)` is increasing in
/// `α`; it is solved by Newton steps kept inside a shrinking bracket on
/// `[1e-3, 1e3]`, then `β = (Σ r^α / n)^{1/α}`.
pub fn weibull_mle(speeds: &[f64]) -> Result<WeibullFit> {
    let n = speeds.len();
    if n < MIN_FIT_SIZE {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_SIZE,
            got: n,
        });
    }
    if let Some(&bad) = speeds.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!("Weibull fit needs finite speeds > 0, got {bad}")));
    }
    let logs: Vec<f64> = speeds.iter().map(|r| r.ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = logs.iter().map(|y| y - mean_log).collect();
    let dmax = centered.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let var = centered.iter().map(|d| d * d).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Err(Error::DegenerateSample("all speeds are equal".into()));
    }

    // (score, derivative) of the centered profile equation
    let score = |alpha: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &d in &centered {
            let w = (alpha * (d - dmax)).exp();
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
        }
        let m1 = s1 / s0;
        (m1 - 1.0 / alpha, s2 / s0 - m1 * m1 + 1.0 / (alpha * alpha))
    };

    let (mut lo, mut hi) = SHAPE_BRACKET;
    if score(hi).0 < 0.0 {
        return Err(Error::DegenerateSample(format!(
            "shape estimate exceeds {hi}; speeds are nearly constant"
        )));
    }
    if score(lo).0 > 0.0 {
        return Err(Error::DegenerateSample(format!("shape estimate below {lo}")));
    }
    // sd(ln R) = π / (α √6)
    let mut alpha = (std::f64::consts::PI / (6.0 * var).sqrt()).clamp(lo, hi);
    let mut converged = false;
    for _ in 0..200 {
        let (g, dg) = score(alpha);
        if g.abs() < SCORE_TOLERANCE {
            converged = true;
            break;
        }
        if g < 0.0 {
            lo = alpha;
        } else {
            hi = alpha;
        }
        let newton = alpha - g / dg;
        alpha = if newton > lo && newton < hi && dg > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * alpha {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: 200,
            last_iterate: vec![alpha],
        });
    }

    // ln β = mean ln r + (1/α) ln mean exp(α d)
    let lse = {
        let s: f64 = centered.iter().map(|&d| (alpha * (d - dmax)).exp()).sum();
        alpha * dmax + (s / n as f64).ln()
    };
    let scale = (mean_log + lse / alpha).exp();
    let params = WeibullParams::new(alpha, scale)?;
    let (se_shape, se_scale) = standard_errors(alpha, scale, speeds)?;
    Ok(WeibullFit {
        params,
        se_shape,
        se_scale,
        loglik: log_likelihood(alpha, scale, speeds),
        n,
    })
}

pub fn log_likelihood(shape: f64, scale: f64, speeds: &[f64]) -> f64 {
    let n = speeds.len() as f64;
    let (mut sum_log, mut sum_pow) = (0.0, 0.0);
    for &r in speeds {
        sum_log += r.ln();
        sum_pow += (r / scale).powf(shape);
    }
    n * shape.ln() - n * shape * scale.ln() + (shape - 1.0) * sum_log - sum_pow
}

/// Analytic Hessian of the log-likelihood in `(α, β)`.
pub fn log_likelihood_hessian(shape: f64, scale: f64, speeds: &[f64]) -> [[f64; 2]; 2] {
    let n = speeds.len() as f64;
    let (mut s_pow, mut s_pow_log, mut s_pow_log2) = (0.0, 0.0, 0.0);
    for &r in speeds {
        let l = (r / scale).ln();
        let p = (shape * l).exp();
        s_pow += p;
        s_pow_log += p * l;
        s_pow_log2 += p * l * l;
    }
    let b2 = scale * scale;
    let haa = -n / (shape * shape) - s_pow_log2;
    let hbb = (shape / b2) * (n - (shape + 1.0) * s_pow);
    let hab = (-n + s_pow + shape * s_pow_log) / scale;
    [[haa, hab], [hab, hbb]]
}

fn standard_errors(shape: f64, scale: f64, speeds: &[f64]) -> Result<(f64, f64)> {
    let h = log_likelihood_hessian(shape, scale, speeds);
    // observed information J = −H; covariance = J⁻¹
    let (jaa, jab, jbb) = (-h[0][0], -h[0][1], -h[1][1]);
    let det = jaa * jbb - jab * jab;
    if !(det > 0.0 && jaa > 0.0) || !det.is_finite() {
        return Err(Error::DegenerateSample("observed information is singular".into()));
    }
    let se_shape = (jbb / det).sqrt();
    let se_scale = (jaa / det).sqrt();
    if !(se_shape.is_finite() && se_scale.is_finite() && se_shape > 0.0 && se_scale > 0.0) {
        return Err(Error::DegenerateSample("standard errors not computable".into()));
    }
    Ok((se_shape, se_scale))
}

/// Lanczos approximation of Γ(x) for x > 0 (g = 7, 9 terms).
pub(crate) fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}
