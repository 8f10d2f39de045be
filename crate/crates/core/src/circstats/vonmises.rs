use std::f64::consts::{PI, TAU};

use rand::Rng;

use super::angle::{wrap, Angle};
use super::bessel::{bessel_i0_scaled, bessel_ratio};
use crate::error::{Error, Result};

/// Von Mises density `exp(κ cos(φ − μ)) / (2π I₀(κ))`.
pub fn vm_pdf(phi: Angle, mu: Angle, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(vm_pdf_unchecked(phi.radians(), mu.radians(), kappa))
}

pub(crate) fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::invalid("kappa", format!("must be finite and >= 0, got {kappa}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn vm_pdf_unchecked(phi: f64, mu: f64, kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 1.0 / TAU;
    }
    // scaled Bessel keeps this finite for large κ
    (kappa * ((phi - mu).cos() - 1.0)).exp() / (TAU * bessel_i0_scaled(kappa))
}

/// `ln f_vM(φ | μ, κ)` for precomputed `cos φ`, `sin φ`.
#[inline]
pub(crate) fn vm_ln_pdf_trig(cos_phi: f64, sin_phi: f64, cos_mu: f64, sin_mu: f64, kappa: f64) -> f64 {
    if kappa == 0.0 {
        return -TAU.ln();
    }
    kappa * (cos_phi * cos_mu + sin_phi * sin_mu - 1.0) - TAU.ln() - bessel_i0_scaled(kappa).ln()
}

/// Draws one von Mises variate using the Best–Fisher wrapped-Cauchy envelope.
pub(crate) fn sample_vm<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return wrap(rng.random::<f64>() * TAU);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            let signed = if u3 > 0.5 { theta } else { -theta };
            return wrap(mu + signed);
        }
    }
}

/// Inverts `A(κ) = r̄` by Newton's method from the Banerjee et al. start,
/// clamped to `[0, kappa_max]`.
pub fn inverse_bessel_ratio(rbar: f64, kappa_max: f64) -> f64 {
    if !(rbar > 0.0) {
        return 0.0;
    }
    if rbar >= 1.0 || rbar >= bessel_ratio(kappa_max) {
        return kappa_max;
    }
    let mut k = (rbar * (2.0 - rbar * rbar) / (1.0 - rbar * rbar)).min(kappa_max);
    for _ in 0..100 {
        let a = bessel_ratio(k);
        let slope = 1.0 - a / k - a * a;
        if !(slope > 0.0) {
            break;
        }
        let mut next = k - (a - rbar) / slope;
        if next <= 0.0 {
            next = 0.5 * k;
        }
        next = next.min(kappa_max);
        let done = (next - k).abs() <= 1e-13 * k.max(1.0);
        k = next;
        if done {
            break;
        }
    }
    k
}
