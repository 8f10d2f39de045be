use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{to_polar, WindSample};
use crate::circstats::Angle;
use crate::error::{Error, Result};
use crate::metrics::{CurveSample, DirectionGrid};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::rng::seeded;
use crate::weibull::check_tau;

const EIGEN_FLOOR: f64 = 1e-10;
const QUANTILE_TOLERANCE: f64 = 1e-8;

/// One bivariate normal component with cached precision and Cholesky factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    precision: [[f64; 2]; 2],
    chol: [[f64; 2]; 2],
    log_norm: f64,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::invalid("weight", format!("must be >= 0, got {weight}")));
        }
        if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gaussian component"));
        }
        if (cov[0][1] - cov[1][0]).abs() > 1e-12 * (cov[0][0].abs() + cov[1][1].abs()) {
            return Err(Error::invalid("cov", "covariance must be symmetric"));
        }
        let (l1, l2) = eigenvalues(&cov);
        if !(l1 > EIGEN_FLOOR && l2 > EIGEN_FLOOR) {
            return Err(Error::invalid(
                "cov",
                format!("covariance not positive definite (eigenvalues {l1:e}, {l2:e})"),
            ));
        }
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        let precision = [[cov[1][1] / det, -cov[0][1] / det], [-cov[1][0] / det, cov[0][0] / det]];
        let l11 = cov[0][0].sqrt();
        let l21 = cov[1][0] / l11;
        let l22 = (cov[1][1] - l21 * l21).sqrt();
        Ok(GaussianComponent {
            weight,
            mean,
            cov,
            precision,
            chol: [[l11, 0.0], [l21, l22]],
            log_norm: -(TAU.ln()) - 0.5 * det.ln(),
        })
    }

    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        let du = u - self.mean[0];
        let dv = v - self.mean[1];
        let p = &self.precision;
        let q = du * du * p[0][0] + 2.0 * du * dv * p[0][1] + dv * dv * p[1][1];
        self.log_norm - 0.5 * q
    }

    pub fn spectral_radius(&self) -> f64 {
        eigenvalues(&self.cov).1
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let c = &self.chol;
        (self.mean[0] + c[0][0] * z1, self.mean[1] + c[1][0] * z1 + c[1][1] * z2)
    }
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub(crate) fn eigenvalues(m: &[[f64; 2]; 2]) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let half_gap = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[1][0]).max(0.0).sqrt();
    (0.5 * tr - half_gap, 0.5 * tr + half_gap)
}

/// Bivariate normal mixture for the `(u, v)` wind components.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureTruth {
    components: Vec<GaussianComponent>,
    r_max: f64,
}

#[derive(Serialize, Deserialize)]
struct TruthJson {
    weights: Vec<f64>,
    means: Vec<[f64; 2]>,
    covs: Vec<[[f64; 2]; 2]>,
}

impl GaussianMixtureTruth {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("mixture components"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("weights", format!("must sum to 1, got {total}")));
        }
        let mut components = components;
        for c in &mut components {
            c.weight /= total;
        }
        let max_mean = components
            .iter()
            .map(|c| c.mean[0].hypot(c.mean[1]))
            .fold(0.0, f64::max);
        let max_radius = components.iter().map(|c| c.spectral_radius()).fold(0.0, f64::max);
        Ok(GaussianMixtureTruth {
            components,
            r_max: max_mean + 10.0 * max_radius.sqrt(),
        })
    }

    pub fn from_parts(weights: &[f64], means: &[[f64; 2]], covs: &[[[f64; 2]; 2]]) -> Result<Self> {
        if weights.len() != means.len() || weights.len() != covs.len() {
            return Err(Error::invalid(
                "truth",
                "weights, means and covs must have equal length",
            ));
        }
        let components = weights
            .iter()
            .zip(means)
            .zip(covs)
            .map(|((&w, &m), &c)| GaussianComponent::new(w, m, c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    /// Standard isotropic normal centred at the origin, scaled by `sigma`.
    pub fn isotropic(sigma: f64) -> Result<Self> {
        let s2 = sigma * sigma;
        Self::from_parts(&[1.0], &[[0.0, 0.0]], &[[[s2, 0.0], [0.0, s2]]])
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    /// Upper speed limit used by the numeric oracles.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn pdf(&self, u: f64, v: f64) -> f64 {
        self.components.iter().map(|c| c.weight * c.ln_pdf(u, v).exp()).sum()
    }

    /// Scales means by `c` and covariances by `c²`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let comps = self
            .components
            .iter()
            .map(|g| {
                let cov = [
                    [g.cov[0][0] * c * c, g.cov[0][1] * c * c],
                    [g.cov[1][0] * c * c, g.cov[1][1] * c * c],
                ];
                GaussianComponent::new(g.weight, [g.mean[0] * c, g.mean[1] * c], cov)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn sample_uv(&self, count: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = seeded(seed);
        (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = self.components.len() - 1;
                for (j, c) in self.components.iter().enumerate() {
                    acc += c.weight;
                    if u < acc {
                        chosen = j;
                        break;
                    }
                }
                self.components[chosen].draw(&mut rng)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let raw = TruthJson {
            weights: self.components.iter().map(|c| c.weight).collect(),
            means: self.components.iter().map(|c| c.mean).collect(),
            covs: self.components.iter().map(|c| c.cov).collect(),
        };
        serde_json::to_string_pretty(&raw).expect("plain numeric struct")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: TruthJson = serde_json::from_str(text)?;
        Self::from_parts(&raw.weights, &raw.means, &raw.covs)
    }

    /// `r·f_UV(r sin φ, r cos φ)`, the joint density of `(R, Φ)`.
    fn polar_density(&self, r: f64, sin: f64, cos: f64) -> f64 {
        r * self.pdf(r * sin, r * cos)
    }
}

/// Draws `count` samples with year labels `1..=years` in equal consecutive
/// runs; any remainder goes to the last year.
pub fn truth_sample(truth: &GaussianMixtureTruth, count: usize, years: usize, seed: u64) -> Result<Vec<WindSample>> {
    if years == 0 {
        return Err(Error::invalid("years", "must be positive"));
    }
    let per_year = (count / years).max(1);
    truth
        .sample_uv(count, seed)
        .into_iter()
        .enumerate()
        .map(|(i, (u, v))| {
            let year = (i / per_year).min(years - 1) + 1;
            let (speed, direction) = to_polar(u, v)?;
            Ok(WindSample {
                speed,
                direction,
                year: year as i32,
            })
        })
        .collect()
}

fn density_config() -> QuadratureConfig {
    QuadratureConfig {
        abs_tol: 1e-9,
        ..Default::default()
    }
}

fn cdf_config() -> QuadratureConfig {
    QuadratureConfig {
        abs_tol: 1e-12,
        ..Default::default()
    }
}

/// `f_Φ(φ) = ∫₀^∞ r·f_UV(r sin φ, r cos φ) dr` by adaptive quadrature.
pub fn truth_direction_density(truth: &GaussianMixtureTruth, phi: Angle) -> Result<f64> {
    let (sin, cos) = phi.radians().sin_cos();
    Ok(integrate(
        |r| truth.polar_density(r, sin, cos),
        0.0,
        truth.r_max,
        &density_config(),
    )?
    .value)
}

/// Conditional CDF `F(r | φ)`.
pub fn truth_conditional_cdf(truth: &GaussianMixtureTruth, phi: Angle, r: f64) -> Result<f64> {
    let (sin, cos) = phi.radians().sin_cos();
    let f = |s| truth.polar_density(s, sin, cos);
    let cfg = cdf_config();
    let total = integrate(f, 0.0, truth.r_max, &cfg)?.value;
    if r <= 0.0 {
        return Ok(0.0);
    }
    let part = integrate(f, 0.0, r.min(truth.r_max), &cfg)?.value;
    Ok((part / total).clamp(0.0, 1.0))
}

/// Conditional `τ`-quantile of speed given direction, by bisection on the
/// numerically integrated conditional CDF.
pub fn truth_conditional_quantile(truth: &GaussianMixtureTruth, phi: Angle, tau: f64) -> Result<f64> {
    Ok(conditional_quantiles(truth, phi.radians(), &[tau])?[0])
}

fn conditional_quantiles(truth: &GaussianMixtureTruth, phi: f64, taus: &[f64]) -> Result<Vec<f64>> {
    for &t in taus {
        check_tau(t)?;
    }
    let (sin, cos) = phi.sin_cos();
    let f = |s| truth.polar_density(s, sin, cos);
    let cfg = cdf_config();
    let total = integrate(f, 0.0, truth.r_max, &cfg)?.value;
    if !(total > 0.0) {
        return Err(Error::Domain(format!(
            "direction {phi} has zero density under the truth"
        )));
    }
    taus.iter()
        .map(|&tau| {
            let target = tau * total;
            // F is built up piecewise so each bisection step integrates one short segment
            let (mut lo, mut hi) = (0.0, truth.r_max);
            let mut mass_lo = 0.0;
            while hi - lo > QUANTILE_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                let mass_mid = mass_lo + integrate(f, lo, mid, &cfg)?.value;
                if mass_mid < target {
                    lo = mid;
                    mass_lo = mass_mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        })
        .collect()
}

/// Oracle curves of a truth on a grid, computed once and reused.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthCurves {
    pub density: CurveSample,
    pub quantiles: Vec<(f64, CurveSample)>,
}

impl TruthCurves {
    pub fn compute(truth: &GaussianMixtureTruth, grid: DirectionGrid, taus: &[f64]) -> Result<Self> {
        let rows: Vec<Result<(f64, Vec<f64>)>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let phi = grid.angle(i);
                let d = truth_direction_density(truth, Angle(phi))?;
                let q = conditional_quantiles(truth, phi, taus)?;
                Ok((d, q))
            })
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let density = CurveSample::new(grid, rows.iter().map(|r| r.0).collect())?;
        let quantiles = taus
            .iter()
            .enumerate()
            .map(|(k, &t)| Ok((t, CurveSample::new(grid, rows.iter().map(|r| r.1[k]).collect())?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TruthCurves { density, quantiles })
    }

    pub fn quantile(&self, tau: f64) -> Option<&CurveSample> {
        self.quantiles
            .iter()
            .find(|(t, _)| (t - tau).abs() < 1e-12)
            .map(|(_, c)| c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Closed-form `∫₀^R r exp(−a r²/2 + b r) dr` pieces for one Gaussian:
    /// the direction density needs the normal CDF, written here via erfc.
    fn erfc(x: f64) -> f64 {
        // continued fraction for large |x|, Taylor series otherwise
        if x.abs() < 3.0 {
            let mut sum = x;
            let mut term = x;
            let mut n = 0.0;
            loop {
                n += 1.0;
                term *= -x * x / n;
                let add = term / (2.0 * n + 1.0);
                sum += add;
                if add.abs() < 1e-17 * sum.abs() {
                    break;
                }
            }
            1.0 - 2.0 / PI.sqrt() * sum
        } else if x > 0.0 {
            let mut f = 0.0;
            for k in (1..200).rev() {
                f = (k as f64 / 2.0) / (x + f);
            }
            (-x * x).exp() / PI.sqrt() / (x + f)
        } else {
            2.0 - erfc(-x)
        }
    }

    fn normal_cdf(x: f64) -> f64 {
        0.5 * erfc(-x / 2f64.sqrt())
    }

    fn closed_form_direction_density(truth: &GaussianMixtureTruth, phi: f64) -> f64 {
        let e = [phi.sin(), phi.cos()];
        truth
            .components()
            .iter()
            .map(|c| {
                let p = c.precision;
                let pe = [p[0][0] * e[0] + p[0][1] * e[1], p[1][0] * e[0] + p[1][1] * e[1]];
                let a = e[0] * pe[0] + e[1] * pe[1];
                let b = c.mean[0] * pe[0] + c.mean[1] * pe[1];
                let pm = [
                    p[0][0] * c.mean[0] + p[0][1] * c.mean[1],
                    p[1][0] * c.mean[0] + p[1][1] * c.mean[1],
                ];
                let cc = c.mean[0] * pm[0] + c.mean[1] * pm[1];
                let inner = 1.0 / a + b / a * (TAU / a).sqrt() * (b * b / (2.0 * a)).exp() * normal_cdf(b / a.sqrt());
                c.weight * c.log_norm.exp() * (-0.5 * cc).exp() * inner
            })
            .sum()
    }

    fn two_component() -> GaussianMixtureTruth {
        GaussianMixtureTruth::from_parts(
            &[0.6, 0.4],
            &[[2.0, 5.0], [-3.0, -1.0]],
            &[[[4.0, 1.0], [1.0, 6.0]], [[3.0, -0.5], [-0.5, 2.0]]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_covariance() {
        assert!(GaussianComponent::new(1.0, [0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(GaussianComponent::new(1.0, [0.0, 0.0], [[1.0, 0.5], [0.2, 1.0]]).is_err());
        assert!(GaussianMixtureTruth::from_parts(&[0.5], &[[0.0, 0.0]], &[[[1.0, 0.0], [0.0, 1.0]]]).is_err());
    }

    #[test]
    fn density_matches_closed_form() {
        let t = two_component();
        for phi in DirectionGrid::new(40).unwrap().angles() {
            let q = truth_direction_density(&t, Angle(phi)).unwrap();
            let exact = closed_form_direction_density(&t, phi);
            assert!((q - exact).abs() < 1e-9, "{phi}: {q} vs {exact}");
        }
    }

    #[test]
    fn isotropic_is_uniform_and_rayleigh() {
        let t = GaussianMixtureTruth::isotropic(1.0).unwrap();
        let rayleigh = |tau: f64| (-2.0 * (1.0 - tau).ln()).sqrt();
        for phi in DirectionGrid::new(20).unwrap().angles() {
            assert!((truth_direction_density(&t, Angle(phi)).unwrap() - 1.0 / TAU).abs() < 1e-8);
            for tau in [0.5, 0.75, 0.95] {
                let q = truth_conditional_quantile(&t, Angle(phi), tau).unwrap();
                assert!((q - rayleigh(tau)).abs() < 1e-6, "{q}");
            }
        }
        assert!((rayleigh(0.95) - 2.44775).abs() < 1e-5);
    }

    #[test]
    fn density_normalizes() {
        let t = two_component();
        let m = 2000;
        let total: f64 = (0..m)
            .map(|i| truth_direction_density(&t, Angle(TAU * i as f64 / m as f64)).unwrap())
            .sum::<f64>()
            * TAU
            / m as f64;
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn shifted_component_peaks_on_v_axis() {
        let t = GaussianMixtureTruth::from_parts(&[1.0], &[[0.0, 3.0]], &[[[1.0, 0.0], [0.0, 1.0]]]).unwrap();
        let grid = DirectionGrid::default();
        let best = (0..grid.len())
            .max_by(|&a, &b| {
                let fa = truth_direction_density(&t, Angle(grid.angle(a))).unwrap();
                let fb = truth_direction_density(&t, Angle(grid.angle(b))).unwrap();
                fa.total_cmp(&fb)
            })
            .unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn quantile_inverts_cdf_and_is_monotone() {
        let t = two_component();
        let mut rng = seeded(1);
        for _ in 0..100 {
            let phi = Angle(rng.random::<f64>() * TAU);
            let q: Vec<f64> = [0.5, 0.75, 0.95]
                .iter()
                .map(|&tau| truth_conditional_quantile(&t, phi, tau).unwrap())
                .collect();
            assert!(q[0] < q[1] && q[1] < q[2]);
        }
        for _ in 0..20 {
            let phi = Angle(rng.random::<f64>() * TAU);
            let tau = 0.05 + 0.9 * rng.random::<f64>();
            let q = truth_conditional_quantile(&t, phi, tau).unwrap();
            assert!((truth_conditional_cdf(&t, phi, q).unwrap() - tau).abs() < 1e-6);
        }
    }

    #[test]
    fn quantiles_scale_with_truth() {
        let t = two_component();
        let c = 1.7;
        let s = t.scaled(c).unwrap();
        let mut rng = seeded(2);
        for _ in 0..20 {
            let phi = Angle(rng.random::<f64>() * TAU);
            let tau = 0.1 + 0.8 * rng.random::<f64>();
            let q = truth_conditional_quantile(&t, phi, tau).unwrap();
            let qs = truth_conditional_quantile(&s, phi, tau).unwrap();
            assert!((qs - c * q).abs() < 1e-6, "{qs} vs {}", c * q);
        }
    }

    #[test]
    fn sample_years_and_directions() {
        let t = GaussianMixtureTruth::isotropic(2.0).unwrap();
        let s = truth_sample(&t, 7360, 10, 3).unwrap();
        for y in 1..=10 {
            assert_eq!(s.iter().filter(|w| w.year == y).count(), 736);
        }
        let s = truth_sample(&t, 105, 10, 3).unwrap();
        assert_eq!(s.iter().filter(|w| w.year == 10).count(), 15);
        assert!(truth_sample(&t, 0, 10, 3).unwrap().is_empty());

        let big = truth_sample(&t, 100_000, 1, 4).unwrap();
        let mut dirs: Vec<f64> = big.iter().map(|w| w.direction.radians() / TAU).collect();
        dirs.sort_by(f64::total_cmp);
        let n = dirs.len() as f64;
        let ks = dirs
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "{ks}");
    }

    #[test]
    fn histogram_matches_density() {
        let t = two_component();
        let n = 100_000;
        let s = truth_sample(&t, n, 1, 5).unwrap();
        let bins = 72;
        let mut counts = vec![0usize; bins];
        for w in &s {
            counts[((w.direction.radians() / TAU * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let width = TAU / bins as f64;
        let tv: f64 = counts
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let mass = integrate(
                    |p| truth_direction_density(&t, Angle(p)).unwrap(),
                    width * j as f64,
                    width * (j + 1) as f64,
                    &QuadratureConfig {
                        abs_tol: 1e-8,
                        ..Default::default()
                    },
                )
                .unwrap()
                .value;
                (c as f64 / n as f64 - mass).abs()
            })
            .sum::<f64>()
            * 0.5;
        assert!(tv < 0.02, "{tv}");
    }

    #[test]
    fn json_round_trip() {
        let t = two_component();
        assert_eq!(GaussianMixtureTruth::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn cached_curves_match_pointwise_oracles() {
        let t = two_component();
        let grid = DirectionGrid::new(16).unwrap();
        let curves = TruthCurves::compute(&t, grid, &[0.5, 0.95]).unwrap();
        for (i, phi) in grid.angles().enumerate() {
            assert_eq!(
                curves.density.values()[i],
                truth_direction_density(&t, Angle(phi)).unwrap()
            );
            let q = truth_conditional_quantile(&t, Angle(phi), 0.95).unwrap();
            assert!((curves.quantile(0.95).unwrap().values()[i] - q).abs() < 1e-12);
        }
        assert!(curves.quantile(0.75).is_none());
    }
}
