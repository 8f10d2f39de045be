use serde::{Deserialize, Serialize};

use super::binning::{
    bin_directions, fit_bins, BinCount, BinFit, BinFitOptions, BinScheme, BinSummary, BinningSpec, ExcludedBin,
};
use super::harmonic::{harmonic_wls, HarmonicCoefficients, HarmonicPoint};
use crate::circstats::Angle;
use crate::error::{Error, Result};
use crate::metrics::{CurveSample, DirectionGrid};
use crate::synth::WindSample;
use crate::weibull::{check_tau, quantile_unchecked, WeibullParams};

pub const DEFAULT_HARMONIC_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BwhrConfig {
    pub binning: BinningSpec,
    pub k_alpha: usize,
    pub k_beta: usize,
    pub min_count: usize,
    pub calm_floor: f64,
    /// Grid on which curve positivity is checked.
    pub grid: DirectionGrid,
}

impl Default for BwhrConfig {
    fn default() -> Self {
        let opts = BinFitOptions::default();
        BwhrConfig {
            binning: BinningSpec::default(),
            k_alpha: DEFAULT_HARMONIC_ORDER,
            k_beta: DEFAULT_HARMONIC_ORDER,
            min_count: opts.min_count,
            calm_floor: opts.calm_floor,
            grid: DirectionGrid::default(),
        }
    }
}

/// Weibull law for speed given direction, with shape `α(φ)` and scale `β(φ)`
/// given by truncated Fourier series.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalWeibullModel {
    pub alpha_curve: HarmonicCoefficients,
    pub beta_curve: HarmonicCoefficients,
    pub binning: BinningSpec,
    /// Resolved bin count used for the fit.
    pub n_bins: usize,
    pub bin_fits: Vec<BinFit>,
    pub excluded: Vec<ExcludedBin>,
}

impl DirectionalWeibullModel {
    /// Builds a model from given curves, rejecting it if either curve is not
    /// positive on `grid`.
    pub fn from_curves(
        alpha_curve: HarmonicCoefficients,
        beta_curve: HarmonicCoefficients,
        grid: &DirectionGrid,
    ) -> Result<Self> {
        check_positive("alpha", &alpha_curve, grid)?;
        check_positive("beta", &beta_curve, grid)?;
        Ok(DirectionalWeibullModel {
            alpha_curve,
            beta_curve,
            binning: BinningSpec::default(),
            n_bins: match BinningSpec::default().n_bins {
                BinCount::Fixed(n) => n,
                BinCount::Auto => 0,
            },
            bin_fits: Vec::new(),
            excluded: Vec::new(),
        })
    }

    pub fn alpha(&self, phi: f64) -> f64 {
        self.alpha_curve.eval(phi)
    }

    pub fn beta(&self, phi: f64) -> f64 {
        self.beta_curve.eval(phi)
    }

    /// Weibull parameters at direction `phi`. Errors only if a curve is
    /// nonpositive there, which can happen off the validation grid.
    pub fn params_at(&self, phi: Angle) -> Result<WeibullParams> {
        WeibullParams::new(self.alpha(phi.radians()), self.beta(phi.radians()))
    }

    /// `β(φ)·(−ln(1−τ))^{1/α(φ)}`.
    pub fn conditional_quantile(&self, phi: Angle, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let p = self.params_at(phi)?;
        Ok(quantile_unchecked(p.shape(), p.scale(), tau))
    }

    pub fn quantile_curve(&self, grid: DirectionGrid, tau: f64) -> Result<CurveSample> {
        check_tau(tau)?;
        CurveSample::try_from_fn(grid, |phi| {
            let (a, b) = (self.alpha(phi), self.beta(phi));
            if a > 0.0 && b > 0.0 {
                Ok(quantile_unchecked(a, b, tau))
            } else {
                Err(Error::InvalidCurve {
                    parameter: if a > 0.0 { "beta" } else { "alpha" },
                    direction_rad: phi,
                    value: a.min(b),
                })
            }
        })
    }

    /// Conditional density of speed `r` at direction `phi`.
    pub fn conditional_pdf(&self, r: f64, phi: Angle) -> Result<f64> {
        self.params_at(phi)?.pdf(r)
    }

    pub fn to_json(&self) -> String {
        let raw = ModelJson {
            k_alpha: self.alpha_curve.order(),
            k_beta: self.beta_curve.order(),
            alpha_coeffs: self.alpha_curve.to_flat(),
            beta_coeffs: self.beta_curve.to_flat(),
            n_bins: self.n_bins,
            scheme: self.binning.scheme,
            summary: Some(self.binning.summary),
        };
        serde_json::to_string_pretty(&raw).expect("plain numeric struct")
    }

    /// Restores a serialized model; per-bin diagnostics are not stored.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ModelJson = serde_json::from_str(text)?;
        let alpha_curve = HarmonicCoefficients::from_flat(&raw.alpha_coeffs)?;
        let beta_curve = HarmonicCoefficients::from_flat(&raw.beta_coeffs)?;
        if alpha_curve.order() != raw.k_alpha || beta_curve.order() != raw.k_beta {
            return Err(Error::invalid("coefficients", "length does not match K_alpha/K_beta"));
        }
        let mut model = Self::from_curves(alpha_curve, beta_curve, &DirectionGrid::default())?;
        model.n_bins = raw.n_bins;
        model.binning = BinningSpec {
            n_bins: BinCount::Fixed(raw.n_bins),
            scheme: raw.scheme,
            summary: raw.summary.unwrap_or(BinSummary::CircularMedian),
        };
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    #[serde(rename = "K_alpha")]
    k_alpha: usize,
    #[serde(rename = "K_beta")]
    k_beta: usize,
    alpha_coeffs: Vec<f64>,
    beta_coeffs: Vec<f64>,
    n_bins: usize,
    scheme: BinScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<BinSummary>,
}

fn check_positive(parameter: &'static str, curve: &HarmonicCoefficients, grid: &DirectionGrid) -> Result<()> {
    for phi in grid.angles() {
        let value = curve.eval(phi);
        if !(value > 0.0) {
            return Err(Error::InvalidCurve {
                parameter,
                direction_rad: phi,
                value,
            });
        }
    }
    Ok(())
}

/// Binned Weibull harmonic regression: per-bin Weibull MLEs, then weighted
/// harmonic regressions of shape and scale on direction with weights `1/se²`.
pub fn bwhr_fit(samples: &[WindSample], config: &BwhrConfig) -> Result<DirectionalWeibullModel> {
    if samples.is_empty() {
        return Err(Error::Empty("wind samples"));
    }
    let k_max = config.k_alpha.max(config.k_beta);
    let needed = 2 * k_max + 2;
    let n_bins = config.binning.resolve(samples.len(), needed);
    if n_bins < needed {
        return Err(Error::InsufficientBins {
            usable: n_bins,
            needed,
            order: k_max,
        });
    }
    let binning = BinningSpec {
        n_bins: BinCount::Fixed(n_bins),
        ..config.binning
    };
    let bins = bin_directions(samples, &binning)?;
    let options = BinFitOptions {
        min_count: config.min_count,
        calm_floor: config.calm_floor,
        summary: config.binning.summary,
    };
    let mut fitted = fit_bins(&bins, &options, k_max)?;

    // a bin without usable standard errors has no regression weight
    let (good, bad): (Vec<BinFit>, Vec<BinFit>) = fitted.fits.into_iter().partition(|f| {
        f.fit.se_shape.is_finite() && f.fit.se_shape > 0.0 && f.fit.se_scale.is_finite() && f.fit.se_scale > 0.0
    });
    for f in bad {
        fitted.excluded.push(ExcludedBin {
            bin_index: f.bin_index,
            count: f.count,
            reason: "standard errors not computable".to_string(),
        });
    }
    if good.len() < needed {
        return Err(Error::InsufficientBins {
            usable: good.len(),
            needed,
            order: k_max,
        });
    }

    let alpha_points: Vec<HarmonicPoint> = good
        .iter()
        .map(|f| HarmonicPoint {
            angle: f.summary_angle.radians(),
            value: f.fit.params.shape(),
            weight: f.fit.se_shape.powi(-2),
        })
        .collect();
    let beta_points: Vec<HarmonicPoint> = good
        .iter()
        .map(|f| HarmonicPoint {
            angle: f.summary_angle.radians(),
            value: f.fit.params.scale(),
            weight: f.fit.se_scale.powi(-2),
        })
        .collect();
    let alpha_curve = harmonic_wls(&alpha_points, config.k_alpha)?;
    let beta_curve = harmonic_wls(&beta_points, config.k_beta)?;
    check_positive("alpha", &alpha_curve, &config.grid)?;
    check_positive("beta", &beta_curve, &config.grid)?;
    fitted.excluded.sort_by_key(|e| e.bin_index);
    Ok(DirectionalWeibullModel {
        alpha_curve,
        beta_curve,
        binning,
        n_bins,
        bin_fits: good,
        excluded: fitted.excluded,
    })
}

/// Convenience wrapper for [`DirectionalWeibullModel::conditional_quantile`].
pub fn conditional_quantile(model: &DirectionalWeibullModel, phi: Angle, tau: f64) -> Result<f64> {
    model.conditional_quantile(phi, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::wimre;
    use crate::quadrature::{integrate, QuadratureConfig};
    use crate::rng::seeded;
    use rand::Rng;
    use std::f64::consts::{PI, TAU};

    fn analytic_truth() -> (HarmonicCoefficients, HarmonicCoefficients) {
        (
            HarmonicCoefficients {
                intercept: 2.0,
                pairs: vec![(0.5, 0.0)],
            },
            HarmonicCoefficients {
                intercept: 8.0,
                pairs: vec![(0.0, 2.0)],
            },
        )
    }

    fn sample_truth(n: usize, seed: u64, alpha: impl Fn(f64) -> f64, beta: impl Fn(f64) -> f64) -> Vec<WindSample> {
        let mut rng = seeded(seed);
        (0..n)
            .map(|_| {
                let phi = rng.random::<f64>() * TAU;
                let u: f64 = rng.random();
                let r = beta(phi) * (-(1.0 - u).ln()).powf(1.0 / alpha(phi));
                WindSample::new(r, Angle::new(phi).unwrap(), 2000).unwrap()
            })
            .collect()
    }

    #[test]
    fn recovers_directional_truth() {
        let samples = sample_truth(7360, 11, |p| 2.0 + 0.5 * p.cos(), |p| 8.0 + 2.0 * p.sin());
        let model = bwhr_fit(&samples, &BwhrConfig::default()).unwrap();
        assert_eq!(model.alpha_curve.to_flat().len(), 17);
        let grid = DirectionGrid::default();
        let weight = CurveSample::from_fn(grid, |_| 1.0);
        let truth = CurveSample::from_fn(grid, |p| {
            quantile_unchecked(2.0 + 0.5 * p.cos(), 8.0 + 2.0 * p.sin(), 0.95)
        });
        let est = model.quantile_curve(grid, 0.95).unwrap();
        let err = wimre(&est, &truth, &weight).unwrap();
        assert!(err < 0.05, "WIMRE {err}");
    }

    #[test]
    fn direction_free_shape() {
        let samples = sample_truth(7360, 12, |_| 2.0, |_| 8.0);
        let model = bwhr_fit(&samples, &BwhrConfig::default()).unwrap();
        let worst = DirectionGrid::default()
            .angles()
            .map(|p| (model.alpha(p) - 2.0).abs())
            .fold(0.0, f64::max);
        // Shape MLE variance is 6α²/(π²m) per bin; an equally weighted order-K
        // fit over N bins scales that by (2K+1)/N at every angle.
        let m = 7360.0 / 36.0;
        let se_bin = (6.0 / (PI * PI) / m).sqrt() * 2.0;
        let se_fit = se_bin * (17.0f64 / 36.0).sqrt();
        assert!(worst < 4.0 * se_fit, "max |alpha - 2| = {worst}, pointwise se {se_fit}");
        let rms = (DirectionGrid::default()
            .angles()
            .map(|p| (model.alpha(p) - 2.0).powi(2))
            .sum::<f64>()
            / 629.0)
            .sqrt();
        assert!(rms < 1.5 * se_fit, "rms {rms}");
        assert_eq!(model.alpha(0.0), model.alpha(TAU));
        assert_eq!(model.beta(0.0), model.beta(TAU));
    }

    #[test]
    fn too_few_bins_for_order() {
        let samples = sample_truth(1000, 13, |_| 2.0, |_| 8.0);
        let config = BwhrConfig {
            binning: BinningSpec::equal_width(10),
            ..Default::default()
        };
        assert!(matches!(
            bwhr_fit(&samples, &config),
            Err(Error::InsufficientBins {
                usable: 10,
                needed: 18,
                order: 8
            })
        ));
    }

    #[test]
    fn constant_unit_exponential() {
        let model = DirectionalWeibullModel::from_curves(
            HarmonicCoefficients::constant(1.0),
            HarmonicCoefficients::constant(1.0),
            &DirectionGrid::default(),
        )
        .unwrap();
        let tau = 1.0 - (-1.0f64).exp();
        for phi in DirectionGrid::new(50).unwrap().angle_values() {
            assert!((model.conditional_quantile(phi, tau).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(model.conditional_quantile(Angle::ZERO, 1.0).is_err());
    }

    #[test]
    fn quantiles_increase_in_tau() {
        let (a, b) = analytic_truth();
        let model = DirectionalWeibullModel::from_curves(a, b, &DirectionGrid::default()).unwrap();
        let grid = DirectionGrid::default();
        let q1 = model.quantile_curve(grid, 0.5).unwrap();
        let q2 = model.quantile_curve(grid, 0.75).unwrap();
        assert!(q1.values().iter().zip(q2.values()).all(|(x, y)| x < y));
    }

    #[test]
    fn quantile_matches_numeric_cdf_inversion() {
        let (a, b) = analytic_truth();
        let model = DirectionalWeibullModel::from_curves(a, b, &DirectionGrid::default()).unwrap();
        let mut rng = seeded(5);
        let cfg = QuadratureConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-14,
            max_subdivisions: 4000,
        };
        for _ in 0..50 {
            let phi = rng.random::<f64>() * TAU;
            let tau = 0.02 + 0.96 * rng.random::<f64>();
            // density written out directly, independent of the library pdf
            let alpha = 2.0 + 0.5 * phi.cos();
            let beta = 8.0 + 2.0 * phi.sin();
            let density = |r: f64| {
                if r <= 0.0 {
                    0.0
                } else {
                    alpha / beta * (r / beta).powf(alpha - 1.0) * (-(r / beta).powf(alpha)).exp()
                }
            };
            let (mut lo, mut hi) = (0.0, 100.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let cdf = integrate(density, 0.0, mid, &cfg).unwrap().value;
                if cdf < tau {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-12 {
                    break;
                }
            }
            let q = model.conditional_quantile(Angle::new(phi).unwrap(), tau).unwrap();
            assert!((q - 0.5 * (lo + hi)).abs() < 1e-8, "{q} vs {}", 0.5 * (lo + hi));
        }
    }

    #[test]
    fn rejects_negative_curve() {
        let a = HarmonicCoefficients {
            intercept: 0.5,
            pairs: vec![(1.0, 0.0)],
        };
        let err =
            DirectionalWeibullModel::from_curves(a, HarmonicCoefficients::constant(1.0), &DirectionGrid::default())
                .unwrap_err();
        match err {
            Error::InvalidCurve {
                parameter,
                direction_rad,
                ..
            } => {
                assert_eq!(parameter, "alpha");
                assert!((direction_rad - std::f64::consts::PI).abs() < 1.2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let samples = sample_truth(4000, 14, |p| 2.0 + 0.3 * p.cos(), |_| 6.0);
        let model = bwhr_fit(&samples, &BwhrConfig::default()).unwrap();
        let text = model.to_json();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["K_alpha", "K_beta", "alpha_coeffs", "beta_coeffs", "n_bins", "scheme"] {
            assert!(value.get(key).is_some(), "{key}");
        }
        let back = DirectionalWeibullModel::from_json(&text).unwrap();
        assert_eq!(back.alpha_curve, model.alpha_curve);
        assert_eq!(back.beta_curve, model.beta_curve);
        assert_eq!(back.n_bins, 36);
    }

    #[test]
    fn rotation_by_bin_multiple() {
        let samples = sample_truth(7360, 15, |p| 2.0 + 0.5 * p.cos(), |p| 8.0 + 2.0 * p.sin());
        let delta = 3.0 * TAU / 36.0;
        let rotated: Vec<WindSample> = samples
            .iter()
            .map(|s| WindSample::new(s.speed, Angle::new(s.direction.radians() + delta).unwrap(), s.year).unwrap())
            .collect();
        let m1 = bwhr_fit(&samples, &BwhrConfig::default()).unwrap();
        let m2 = bwhr_fit(&rotated, &BwhrConfig::default()).unwrap();
        for phi in DirectionGrid::new(72).unwrap().angles() {
            let q1 = m1.conditional_quantile(Angle::new(phi).unwrap(), 0.9).unwrap();
            let q2 = m2.conditional_quantile(Angle::new(phi + delta).unwrap(), 0.9).unwrap();
            assert!((q1 - q2).abs() < 1e-6 * q1, "{phi}: {q1} vs {q2}");
        }
    }
}
