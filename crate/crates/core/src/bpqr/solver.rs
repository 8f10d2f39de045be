use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::PeriodicSplineBasis;
use crate::circstats::Angle;
use crate::error::{Error, Result};
use crate::metrics::{CurveSample, DirectionGrid};
use crate::synth::WindSample;
use crate::weibull::check_tau;

/// `ρ_τ(y) = y(τ − 1{y<0})`.
pub fn pinball_loss(residual: f64, tau: f64) -> f64 {
    if residual < 0.0 {
        (tau - 1.0) * residual
    } else {
        tau * residual
    }
}

/// Sparse design matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct SparseDesign {
    cols: usize,
    row_ptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseDesign {
    pub fn new(cols: usize) -> Self {
        SparseDesign {
            cols,
            row_ptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (j, v) in entries {
            debug_assert!(j < self.cols);
            self.indices.push(j);
            self.values.push(v);
        }
        self.row_ptr.push(self.indices.len());
    }

    /// Periodic spline design at the given angles.
    pub fn spline(basis: &PeriodicSplineBasis, angles: impl IntoIterator<Item = f64>) -> Self {
        let df = basis.df();
        let mut design = SparseDesign::new(df);
        for phi in angles {
            let (first, w) = basis.eval_local(phi);
            design.push_row((0..4).map(|k| ((first + k) % df, w[k])));
        }
        design
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.indices[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    fn row_dot(&self, i: usize, beta: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * beta[j]).sum()
    }

    fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (j, v) in self.row(i) {
            out[j] += v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Smoothing levels for the check function, visited in order.
    pub eps_schedule: [f64; 5],
    /// A stage stops when the relative objective improvement drops below this.
    pub rel_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_schedule: [1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            rel_tol: 1e-9,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub coefficients: Vec<f64>,
    /// Unsmoothed pinball objective at `coefficients`.
    pub objective: f64,
    pub iterations: usize,
    /// Smoothed objective after each iteration, one list per smoothing stage.
    pub trace: Vec<Vec<f64>>,
}

fn smoothed_objective(residuals: &[f64], tau: f64, eps: f64) -> f64 {
    residuals
        .iter()
        .map(|&r| 0.5 * ((r * r + eps * eps).sqrt() + (2.0 * tau - 1.0) * r))
        .sum()
}

fn pinball_objective(residuals: &[f64], tau: f64) -> f64 {
    residuals.iter().map(|&r| pinball_loss(r, tau)).sum()
}

fn residuals(design: &SparseDesign, y: &[f64], beta: &[f64], out: &mut [f64]) {
    for (i, r) in out.iter_mut().enumerate() {
        *r = y[i] - design.row_dot(i, beta);
    }
}

/// Solves `(XᵀWX) β = rhs`, adding a small ridge if the system is not
/// numerically positive definite.
fn solve_weighted(design: &SparseDesign, weights: &[f64], rhs: DVector<f64>) -> Result<Vec<f64>> {
    let p = design.cols();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    for (i, &w) in weights.iter().enumerate() {
        for (j, vj) in design.row(i) {
            for (k, vk) in design.row(i) {
                gram[(j, k)] += w * vj * vk;
            }
        }
    }
    if let Some(chol) = gram.clone().cholesky() {
        return Ok(chol.solve(&rhs).iter().copied().collect());
    }
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    for ridge in [1e-12, 1e-10, 1e-8] {
        let mut g = gram.clone();
        for j in 0..p {
            g[(j, j)] += ridge * scale;
        }
        if let Some(chol) = g.cholesky() {
            return Ok(chol.solve(&rhs).iter().copied().collect());
        }
    }
    Err(Error::SingularDesign { rank: 0, cols: p })
}

/// Linear quantile regression minimizing `Σ ρ_τ(y_i − x_iᵀβ)`.
///
/// Majorize–minimize iterations on the smoothed check function
/// `½(√(r² + ε²) + (2τ−1) r)` with `ε` annealed through the schedule, each
/// step a weighted least-squares solve with weights `1/√(r² + ε²)`. The
/// result is then polished by interpolating the `p` best-fitting points,
/// kept only if the exact objective does not get worse.
pub fn quantile_regression(design: &SparseDesign, y: &[f64], tau: f64, config: &SolverConfig) -> Result<QuantileFit> {
    check_tau(tau)?;
    let n = design.rows();
    let p = design.cols();
    if y.len() != n {
        return Err(Error::invalid(
            "y",
            format!("length {} does not match {n} design rows", y.len()),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("responses"));
    }
    if n <= p {
        return Err(Error::Underdetermined { n, cols: p });
    }

    let mut col_sums = vec![0.0; p];
    for i in 0..n {
        for (j, v) in design.row(i) {
            col_sums[j] += v;
        }
    }
    let tilt = 2.0 * tau - 1.0;

    // least-squares start
    let mut xty = DVector::<f64>::zeros(p);
    for i in 0..n {
        for (j, v) in design.row(i) {
            xty[j] += v * y[i];
        }
    }
    let mut beta = solve_weighted(design, &vec![1.0; n], xty)?;
    let mut res = vec![0.0; n];
    residuals(design, y, &beta, &mut res);

    let mut iterations = 0;
    let mut trace = Vec::with_capacity(config.eps_schedule.len());
    let mut weights = vec![0.0; n];
    for &eps in &config.eps_schedule {
        let mut stage = vec![smoothed_objective(&res, tau, eps)];
        loop {
            if iterations >= config.max_iterations {
                return Err(Error::NoConvergence {
                    iterations,
                    last_iterate: beta,
                });
            }
            iterations += 1;
            let mut rhs = DVector::<f64>::zeros(p);
            for i in 0..n {
                let w = 1.0 / (res[i] * res[i] + eps * eps).sqrt();
                weights[i] = w;
                for (j, v) in design.row(i) {
                    rhs[j] += v * w * y[i];
                }
            }
            for j in 0..p {
                rhs[j] += tilt * col_sums[j];
            }
            let candidate = solve_weighted(design, &weights, rhs)?;
            let mut cand_res = vec![0.0; n];
            residuals(design, y, &candidate, &mut cand_res);
            let prev = *stage.last().expect("stage starts non-empty");
            let obj = smoothed_objective(&cand_res, tau, eps);
            if obj > prev {
                // the majorizer guarantees descent; a rise is rounding noise
                break;
            }
            beta = candidate;
            res = cand_res;
            stage.push(obj);
            if prev - obj <= config.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        trace.push(stage);
    }

    let mut objective = pinball_objective(&res, tau);
    if let Some(polished) = polish(design, y, &res) {
        residuals(design, y, &polished, &mut res);
        let obj = pinball_objective(&res, tau);
        if obj <= objective {
            beta = polished;
            objective = obj;
        }
    }
    Ok(QuantileFit {
        coefficients: beta,
        objective,
        iterations,
        trace,
    })
}

/// Interpolates `p` linearly independent rows chosen by smallest |residual|.
fn polish(design: &SparseDesign, y: &[f64], res: &[f64]) -> Option<Vec<f64>> {
    let p = design.cols();
    let mut order: Vec<usize> = (0..res.len()).collect();
    order.sort_by(|&a, &b| res[a].abs().total_cmp(&res[b].abs()).then(a.cmp(&b)));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut chosen = Vec::with_capacity(p);
    for &i in &order {
        let row = design.dense_row(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = row.clone();
        for q in &basis {
            let d: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
            for (x, qv) in r.iter_mut().zip(q) {
                *x -= d * qv;
            }
        }
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn > 1e-6 * norm {
            basis.push(r.into_iter().map(|v| v / rn).collect());
            chosen.push(i);
            if chosen.len() == p {
                break;
            }
        }
    }
    if chosen.len() < p {
        return None;
    }
    let a = DMatrix::from_fn(p, p, |r, c| design.dense_row(chosen[r])[c]);
    let b = DVector::from_iterator(p, chosen.iter().map(|&i| y[i]));
    let sol = a.lu().solve(&b)?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

/// Fitted quantile curve `Q(τ | φ) = B(φ)ᵀ β(τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpqrModel {
    pub tau: f64,
    pub basis: PeriodicSplineBasis,
    pub coefficients: Vec<f64>,
    pub objective: f64,
}

impl BpqrModel {
    pub fn new(tau: f64, basis: PeriodicSplineBasis, coefficients: Vec<f64>) -> Result<Self> {
        check_tau(tau)?;
        if coefficients.len() != basis.df() {
            return Err(Error::invalid(
                "coefficients",
                format!("expected {} values, got {}", basis.df(), coefficients.len()),
            ));
        }
        Ok(BpqrModel {
            tau,
            basis,
            coefficients,
            objective: f64::NAN,
        })
    }

    pub fn predict(&self, phi: Angle) -> f64 {
        self.predict_raw(phi.radians())
    }

    pub fn predict_raw(&self, phi: f64) -> f64 {
        self.basis.dot(phi, &self.coefficients)
    }

    pub fn curve(&self, grid: DirectionGrid) -> CurveSample {
        CurveSample::from_fn(grid, |phi| self.predict_raw(phi))
    }
}

/// Periodic B-spline quantile regression of speed on direction at level `tau`.
pub fn bpqr_fit(samples: &[WindSample], tau: f64, basis: &PeriodicSplineBasis) -> Result<BpqrModel> {
    bpqr_fit_with(samples, tau, basis, &SolverConfig::default())
}

pub fn bpqr_fit_with(
    samples: &[WindSample],
    tau: f64,
    basis: &PeriodicSplineBasis,
    config: &SolverConfig,
) -> Result<BpqrModel> {
    check_tau(tau)?;
    if samples.len() <= basis.df() {
        return Err(Error::Underdetermined {
            n: samples.len(),
            cols: basis.df(),
        });
    }
    let design = SparseDesign::spline(basis, samples.iter().map(|s| s.direction.radians()));
    let y: Vec<f64> = samples.iter().map(|s| s.speed).collect();
    let fit = quantile_regression(&design, &y, tau, config)?;
    Ok(BpqrModel {
        tau,
        basis: *basis,
        coefficients: fit.coefficients,
        objective: fit.objective,
    })
}

pub fn bpqr_predict(model: &BpqrModel, phi: Angle) -> f64 {
    model.predict(phi)
}
