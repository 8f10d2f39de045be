use super::model::DirectionalWeibullModel;
use crate::circstats::{Angle, VonMisesMixtureModel};
use crate::error::Result;
use crate::rng::seeded;
use crate::synth::cartesian;
use crate::weibull::quantile_unchecked;
use rand::Rng;

/// Draws `(r, φ)` pairs from the fitted joint law: `φ` from the mixture,
/// then `r` by inverse CDF at `(α(φ), β(φ))`.
pub fn joint_simulate_polar(
    direction_model: &VonMisesMixtureModel,
    speed_model: &DirectionalWeibullModel,
    count: usize,
    seed: u64,
) -> Result<Vec<(f64, Angle)>> {
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let phi = Angle::new(direction_model.sample_with(&mut rng))?;
        let params = speed_model.params_at(phi)?;
        let u: f64 = rng.random();
        out.push((quantile_unchecked(params.shape(), params.scale(), u), phi));
    }
    Ok(out)
}

/// As [`joint_simulate_polar`], returned as `(u, v) = (r sin φ, r cos φ)`.
pub fn joint_simulate(
    direction_model: &VonMisesMixtureModel,
    speed_model: &DirectionalWeibullModel,
    count: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    Ok(joint_simulate_polar(direction_model, speed_model, count, seed)?
        .into_iter()
        .map(|(r, phi)| cartesian(r, phi.radians()))
        .collect())
}
