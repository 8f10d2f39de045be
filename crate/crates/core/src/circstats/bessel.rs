//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Power series below [`SERIES_LIMIT`], the large-argument asymptotic
//! expansion above it. The `*_scaled` variants return `e^{-x} I_ν(x)` and
//! never overflow; the EM concentration update works with those.

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 30.0;
/// Largest `x` for which `I₀(x)` is representable as an `f64`.
const OVERFLOW_LIMIT: f64 = 713.0;

fn series(nu: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    // (x/2)^ν / ν!
    let mut term = (0..nu).fold(1.0, |acc, k| acc * 0.5 * x / (k + 1) as f64);
    let mut sum = term;
    let mut m = 0u32;
    loop {
        m += 1;
        term *= q / (m as f64 * (m + nu) as f64);
        sum += term;
        if term <= sum * f64::EPSILON * 0.5 {
            return sum;
        }
    }
}

/// Σ_k (−1)^k a_k(ν) / x^k, the bracket of `I_ν(x) ~ e^x / √(2πx) · Σ`.
fn asymptotic_bracket(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= sum.abs() * f64::EPSILON * 0.5 {
            break;
        }
    }
    sum
}

fn scaled(nu: u32, x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        series(nu, x) * (-x).exp()
    } else {
        asymptotic_bracket(nu, x) / (std::f64::consts::TAU * x).sqrt()
    }
}

/// `e^{-|x|} I₀(x)`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    scaled(0, x)
}

/// `e^{-|x|} I₁(|x|)`.
pub fn bessel_i1_scaled(x: f64) -> f64 {
    scaled(1, x)
}

/// `ln I₀(x)`, finite for every finite `x`.
pub fn ln_bessel_i0(x: f64) -> f64 {
    bessel_i0_scaled(x).ln() + x.abs()
}

/// Modified Bessel function `I₀(x)`; even in `x`.
///
/// Returns [`Error::Range`] when the result overflows `f64`.
pub fn bessel_i0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite("bessel_i0 argument"));
    }
    let x = x.abs();
    if x > OVERFLOW_LIMIT {
        return Err(Error::Range(format!("I0({x}) overflows f64")));
    }
    if x <= SERIES_LIMIT {
        Ok(series(0, x))
    } else {
        let v = asymptotic_bracket(0, x) / (std::f64::consts::TAU * x).sqrt() * x.exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Range(format!("I0({x}) overflows f64")))
        }
    }
}

/// Mean resultant length of a von Mises distribution, `A(κ) = I₁(κ)/I₀(κ)`.
pub fn bessel_ratio(kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 0.0;
    }
    bessel_i1_scaled(kappa) / bessel_i0_scaled(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Σ (x/2)^{2m} / (m!)² summed until terms vanish, with no scaling tricks.
    fn i0_oracle(x: f64) -> f64 {
        let q = x * x / 4.0;
        let mut t = 1.0;
        let mut sum = 1.0;
        for m in 1..1000 {
            t *= q / (m as f64 * m as f64);
            sum += t;
            if t < 1e-18 * sum {
                break;
            }
        }
        sum
    }

    #[test]
    fn small_argument_values() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        let i1 = bessel_i0(1.0).unwrap();
        let i2 = bessel_i0(2.0).unwrap();
        assert!((i1 - i0_oracle(1.0)).abs() / i1 < 1e-14);
        assert!((i2 - i0_oracle(2.0)).abs() / i2 < 1e-14);
        assert!((i1 - 1.2660658778).abs() < 1e-10);
        assert!((i2 - 2.2795853023).abs() < 1e-10);
    }

    #[test]
    fn asymptotic_branch_matches_series() {
        for &x in &[30.5, 35.0, 50.0, 80.0, 120.0] {
            let got = bessel_i0(x).unwrap();
            let want = i0_oracle(x);
            assert!((got - want).abs() / want < 1e-10, "x = {x}: {got} vs {want}");
        }
    }

    #[test]
    fn continuity_at_branch_switch() {
        let below = bessel_i0_scaled(SERIES_LIMIT);
        let above = bessel_i0_scaled(SERIES_LIMIT + 1e-9);
        assert!((below - above).abs() / below < 1e-10);
        let below = bessel_i1_scaled(SERIES_LIMIT);
        let above = bessel_i1_scaled(SERIES_LIMIT + 1e-9);
        assert!((below - above).abs() / below < 1e-10);
    }

    #[test]
    fn evenness_and_overflow() {
        assert_eq!(bessel_i0(-2.0).unwrap(), bessel_i0(2.0).unwrap());
        assert!(matches!(bessel_i0(800.0), Err(Error::Range(_))));
        assert!(ln_bessel_i0(1e4).is_finite());
    }

    #[test]
    fn ratio_limits() {
        assert_eq!(bessel_ratio(0.0), 0.0);
        assert!((bessel_ratio(1e-6) - 0.5e-6).abs() < 1e-15);
        // A(κ) ≈ 1 − 1/(2κ) for large κ
        let k = 1e4;
        assert!((bessel_ratio(k) - (1.0 - 0.5 / k - 0.125 / (k * k))).abs() < 1e-10);
        // A(1) = I1(1)/I0(1) = 0.446389965896535...
        assert!((bessel_ratio(1.0) - 0.446_389_965_896_535).abs() < 1e-12);
    }
}
