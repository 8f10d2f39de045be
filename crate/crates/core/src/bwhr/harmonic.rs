use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated Fourier series `b₀ + Σ_k [a_k cos(kφ) + b_k sin(kφ)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoefficients {
    pub intercept: f64,
    /// `(a_k, b_k)` for `k = 1..=K`.
    pub pairs: Vec<(f64, f64)>,
}

impl HarmonicCoefficients {
    pub fn constant(value: f64) -> Self {
        HarmonicCoefficients {
            intercept: value,
            pairs: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    /// Evaluates the series; the argument is reduced mod 2π first, so
    /// `eval(0) == eval(2π)` holds exactly.
    pub fn eval(&self, phi: f64) -> f64 {
        let phi = phi.rem_euclid(TAU);
        let phi = if phi >= TAU { 0.0 } else { phi };
        let mut acc = self.intercept;
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            let (s, c) = ((k + 1) as f64 * phi).sin_cos();
            acc += a * c + b * s;
        }
        acc
    }

    /// `[b₀, a₁, b₁, a₂, b₂, …]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + 2 * self.pairs.len());
        out.push(self.intercept);
        for &(a, b) in &self.pairs {
            out.push(a);
            out.push(b);
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.is_empty() || flat.len() % 2 == 0 {
            return Err(Error::invalid(
                "coefficients",
                format!("expected 2K+1 values, got {}", flat.len()),
            ));
        }
        Ok(HarmonicCoefficients {
            intercept: flat[0],
            pairs: flat[1..].chunks(2).map(|c| (c[0], c[1])).collect(),
        })
    }
}

/// An observation for harmonic regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicPoint {
    pub angle: f64,
    pub value: f64,
    pub weight: f64,
}

const RANK_TOLERANCE: f64 = 1e-10;

/// Weighted least-squares fit of a harmonic series of order `K`.
///
/// Solved through the SVD of the `√w`-scaled design; a singular value below
/// `1e-10·σ_max` is treated as rank deficiency.
pub fn harmonic_wls(points: &[HarmonicPoint], order: usize) -> Result<HarmonicCoefficients> {
    let cols = 2 * order + 1;
    if points.len() < cols + 1 {
        return Err(Error::InsufficientData {
            needed: cols + 1,
            got: points.len(),
        });
    }
    if let Some(p) = points.iter().find(|p| !(p.weight > 0.0) || !p.weight.is_finite()) {
        return Err(Error::invalid(
            "weight",
            format!("must be positive and finite, got {}", p.weight),
        ));
    }
    if points.iter().any(|p| !p.value.is_finite() || !p.angle.is_finite()) {
        return Err(Error::NonFinite("harmonic regression data"));
    }
    let design = DMatrix::from_fn(points.len(), cols, |i, j| {
        let p = &points[i];
        let sw = p.weight.sqrt();
        if j == 0 {
            sw
        } else {
            let k = ((j + 1) / 2) as f64;
            if j % 2 == 1 {
                sw * (k * p.angle).cos()
            } else {
                sw * (k * p.angle).sin()
            }
        }
    });
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|p| p.weight.sqrt() * p.value));
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let threshold = RANK_TOLERANCE * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > threshold).count();
    if rank < cols {
        return Err(Error::SingularDesign { rank, cols });
    }
    let beta = svd
        .solve(&rhs, threshold)
        .map_err(|e| Error::Domain(format!("least-squares solve failed: {e}")))?;
    let flat: Vec<f64> = beta.iter().copied().collect();
    HarmonicCoefficients::from_flat(&flat)
}
