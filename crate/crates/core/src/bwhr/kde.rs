use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel contributions beyond this many bandwidths are dropped.
const KERNEL_CUTOFF: f64 = 8.0;
pub const MIN_KDE_POINTS: usize = 100;

/// Rectangular lattice of `nu × nv` nodes spanning `[u_min, u_max] × [v_min, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub u_min: f64,
    pub u_max: f64,
    pub nu: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub nv: usize,
}

impl Lattice {
    pub fn new(u_range: (f64, f64), nu: usize, v_range: (f64, f64), nv: usize) -> Result<Self> {
        if nu < 2 || nv < 2 {
            return Err(Error::invalid("lattice", "needs at least 2 nodes per axis"));
        }
        if !(u_range.1 > u_range.0) || !(v_range.1 > v_range.0) {
            return Err(Error::invalid("lattice", "ranges must be increasing and finite"));
        }
        Ok(Lattice {
            u_min: u_range.0,
            u_max: u_range.1,
            nu,
            v_min: v_range.0,
            v_max: v_range.1,
            nv,
        })
    }

    /// Symmetric lattice around the origin covering the points plus
    /// `pad` bandwidths on each axis.
    pub fn covering(points: &[(f64, f64)], pad: f64, nu: usize, nv: usize) -> Result<Self> {
        let (hu, hv) = bandwidths(points)?;
        let ru = points.iter().map(|p| p.0.abs()).fold(0.0, f64::max) + pad * hu;
        let rv = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max) + pad * hv;
        Lattice::new((-ru, ru), nu, (-rv, rv), nv)
    }

    pub fn du(&self) -> f64 {
        (self.u_max - self.u_min) / (self.nu - 1) as f64
    }

    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / (self.nv - 1) as f64
    }

    pub fn u(&self, i: usize) -> f64 {
        self.u_min + self.du() * i as f64
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v_min + self.dv() * j as f64
    }
}

/// Density values on a lattice, stored row-major by `v` then `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySurface {
    pub lattice: Lattice,
    pub values: Vec<f64>,
    pub bandwidth: (f64, f64),
}

impl DensitySurface {
    pub fn at(&self, iu: usize, iv: usize) -> f64 {
        self.values[iv * self.lattice.nu + iu]
    }

    /// Riemann sum `Σ density·Δu·Δv`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.lattice.du() * self.lattice.dv()
    }
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Per-axis bandwidths `σ_j·n^{-1/6}` (Silverman's rule in two dimensions).
pub fn bandwidths(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::NonFinite("kernel density points"));
    }
    let factor = (points.len() as f64).powf(-1.0 / 6.0);
    let su = std_dev(points.iter().map(|p| p.0));
    let sv = std_dev(points.iter().map(|p| p.1));
    for (axis, s) in [("u", su), ("v", sv)] {
        if !(s > 0.0) {
            return Err(Error::DegenerateSample(format!("zero variance along the {axis} axis")));
        }
    }
    Ok((su * factor, sv * factor))
}

/// Product-Gaussian kernel density estimate of `(u, v)` points on `lattice`.
pub fn joint_density_estimate(points: &[(f64, f64)], lattice: &Lattice) -> Result<DensitySurface> {
    if points.len() < MIN_KDE_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_KDE_POINTS,
            got: points.len(),
        });
    }
    let (hu, hv) = bandwidths(points)?;
    let (du, dv) = (lattice.du(), lattice.dv());
    let norm = 1.0 / (2.0 * PI * hu * hv * points.len() as f64);
    let mut values = vec![0.0; lattice.nu * lattice.nv];
    let mut ku = Vec::new();
    for &(pu, pv) in points {
        let (u0, u1) = window(pu, hu, lattice.u_min, du, lattice.nu);
        let (v0, v1) = window(pv, hv, lattice.v_min, dv, lattice.nv);
        if u0 >= u1 || v0 >= v1 {
            continue;
        }
        ku.clear();
        ku.extend((u0..u1).map(|i| {
            let z = (lattice.u(i) - pu) / hu;
            (-0.5 * z * z).exp()
        }));
        for j in v0..v1 {
            let z = (lattice.v(j) - pv) / hv;
            let kv = (-0.5 * z * z).exp() * norm;
            let row = &mut values[j * lattice.nu + u0..j * lattice.nu + u1];
            for (cell, k) in row.iter_mut().zip(&ku) {
                *cell += k * kv;
            }
        }
    }
    Ok(DensitySurface {
        lattice: *lattice,
        values,
        bandwidth: (hu, hv),
    })
}

fn window(center: f64, h: f64, min: f64, step: f64, n: usize) -> (usize, usize) {
    let lo = ((center - KERNEL_CUTOFF * h - min) / step).ceil().max(0.0);
    let hi = ((center + KERNEL_CUTOFF * h - min) / step).floor() + 1.0;
    let hi = hi.min(n as f64);
    if hi <= lo {
        return (0, 0);
    }
    (lo as usize, hi as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = seeded(seed);
        (0..n)
            .map(|_| (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn standard_normal_density_at_origin() {
        let pts = normal_points(100_000, 1);
        let lattice = Lattice::new((-5.0, 5.0), 101, (-5.0, 5.0), 101).unwrap();
        let surface = joint_density_estimate(&pts, &lattice).unwrap();
        let at_origin = surface.at(50, 50);
        let exact = 1.0 / (2.0 * PI);
        assert!((at_origin - exact).abs() < 0.1 * exact, "{at_origin}");
    }

    #[test]
    fn unit_mass_on_covering_lattice() {
        let pts = normal_points(2000, 2);
        let lattice = Lattice::covering(&pts, 4.0, 120, 140).unwrap();
        let mass = joint_density_estimate(&pts, &lattice).unwrap().mass();
        assert!((mass - 1.0).abs() < 0.01, "{mass}");
    }

    #[test]
    fn point_reflection_symmetry() {
        let mut pts = normal_points(500, 3);
        let reflected: Vec<(f64, f64)> = pts.iter().map(|&(u, v)| (-u, -v)).collect();
        pts.extend(reflected);
        let lattice = Lattice::new((-4.0, 4.0), 81, (-4.0, 4.0), 81).unwrap();
        let s = joint_density_estimate(&pts, &lattice).unwrap();
        for iv in 0..81 {
            for iu in 0..81 {
                assert!((s.at(iu, iv) - s.at(80 - iu, 80 - iv)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_axis() {
        let pts: Vec<(f64, f64)> = (0..200).map(|i| (i as f64, 1.0)).collect();
        let lattice = Lattice::new((-1.0, 1.0), 3, (-1.0, 1.0), 3).unwrap();
        assert!(matches!(
            joint_density_estimate(&pts, &lattice),
            Err(Error::DegenerateSample(_))
        ));
        let few = normal_points(50, 4);
        assert!(joint_density_estimate(&few, &lattice).is_err());
    }
}
