//! Finite von Mises mixtures: density, EM fitting, BIC order selection and
//! sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::angle::{wrap, Angle, AngleUnit};
use super::vonmises::{check_kappa, inverse_bessel_ratio, sample_vm, vm_ln_pdf_trig, vm_pdf_unchecked};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesComponent {
    pub weight: f64,
    pub mu: Angle,
    pub kappa: f64,
}

/// Mixture of von Mises densities with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct VonMisesMixtureModel {
    components: Vec<VonMisesComponent>,
}

impl VonMisesMixtureModel {
    /// Validates and normalizes the weights (they must already sum to 1 within 1e-9).
    pub fn new(components: Vec<VonMisesComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("mixture components"));
        }
        let mut total = 0.0;
        for c in &components {
            if !(c.weight >= 0.0) || !c.weight.is_finite() {
                return Err(Error::invalid("weight", format!("must be >= 0, got {}", c.weight)));
            }
            check_kappa(c.kappa)?;
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("weights", format!("must sum to 1, got {total}")));
        }
        Ok(Self::from_unnormalized(components))
    }

    pub(crate) fn from_unnormalized(mut components: Vec<VonMisesComponent>) -> Self {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        for c in &mut components {
            c.weight /= total;
        }
        VonMisesMixtureModel { components }
    }

    pub fn single(mu: Angle, kappa: f64) -> Result<Self> {
        Self::new(vec![VonMisesComponent { weight: 1.0, mu, kappa }])
    }

    pub fn components(&self) -> &[VonMisesComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Number of free parameters, `3·N_Φ − 1`.
    pub fn n_free_parameters(&self) -> usize {
        3 * self.components.len() - 1
    }

    pub fn pdf(&self, phi: Angle) -> f64 {
        self.pdf_raw(phi.radians())
    }

    pub(crate) fn pdf_raw(&self, phi: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * vm_pdf_unchecked(phi, c.mu.radians(), c.kappa))
            .sum()
    }

    pub fn log_likelihood(&self, directions: &[Angle]) -> f64 {
        let trig = Trig::new(self);
        directions
            .iter()
            .map(|a| {
                let (s, c) = a.radians().sin_cos();
                trig.ln_density(c, s)
            })
            .sum()
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<Angle> {
        mixture_sample(self, count, seed)
    }

    pub(crate) fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
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
        let c = &self.components[chosen];
        sample_vm(rng, c.mu.radians(), c.kappa)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MixtureJson::from(self)).expect("plain numeric struct")
    }

    /// Reads `{"weights", "mus_rad" | "mus_deg", "kappas"}`; the key names the unit.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MixtureJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct MixtureJson {
    weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    mus_rad: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    mus_deg: Option<Vec<f64>>,
    kappas: Vec<f64>,
}

impl From<&VonMisesMixtureModel> for MixtureJson {
    fn from(m: &VonMisesMixtureModel) -> Self {
        MixtureJson {
            weights: m.components.iter().map(|c| c.weight).collect(),
            mus_rad: Some(m.components.iter().map(|c| c.mu.radians()).collect()),
            mus_deg: None,
            kappas: m.components.iter().map(|c| c.kappa).collect(),
        }
    }
}

impl TryFrom<MixtureJson> for VonMisesMixtureModel {
    type Error = Error;

    fn try_from(raw: MixtureJson) -> Result<Self> {
        let (mus, unit) = match (raw.mus_rad, raw.mus_deg) {
            (Some(m), None) => (m, AngleUnit::Radians),
            (None, Some(m)) => (m, AngleUnit::Degrees),
            _ => {
                return Err(Error::invalid(
                    "mus",
                    "exactly one of `mus_rad` or `mus_deg` is required",
                ))
            }
        };
        if mus.len() != raw.weights.len() || raw.kappas.len() != raw.weights.len() {
            return Err(Error::invalid("mixture", "weights, mus and kappas differ in length"));
        }
        let components = raw
            .weights
            .iter()
            .zip(&mus)
            .zip(&raw.kappas)
            .map(|((&weight, &mu), &kappa)| {
                Ok(VonMisesComponent {
                    weight,
                    mu: unit.to_angle(mu)?,
                    kappa,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        VonMisesMixtureModel::new(components)
    }
}

/// Mixture density `Σ ω_j f_vM(φ; μ_j, κ_j)`.
pub fn mixture_pdf(phi: Angle, model: &VonMisesMixtureModel) -> f64 {
    model.pdf(phi)
}

/// Per-component constants for fast log-density evaluation.
struct Trig {
    rows: Vec<(f64, f64, f64, f64)>, // (ln ω, cos μ, sin μ, κ)
}

impl Trig {
    fn new(model: &VonMisesMixtureModel) -> Self {
        Trig {
            rows: model
                .components
                .iter()
                .map(|c| {
                    let (s, co) = c.mu.radians().sin_cos();
                    (c.weight.ln(), co, s, c.kappa)
                })
                .collect(),
        }
    }

    fn ln_density(&self, cos_phi: f64, sin_phi: f64) -> f64 {
        let mut buf = [0.0; 16];
        let mut terms = Vec::new();
        let terms: &mut [f64] = if self.rows.len() <= buf.len() {
            &mut buf[..self.rows.len()]
        } else {
            terms.resize(self.rows.len(), 0.0);
            &mut terms
        };
        for (t, &(lw, cm, sm, k)) in terms.iter_mut().zip(&self.rows) {
            *t = lw + vm_ln_pdf_trig(cos_phi, sin_phi, cm, sm, k);
        }
        log_sum_exp(terms)
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// EM stopping rules and safeguards.
#[derive(Debug, Clone)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop once the log-likelihood gain falls below this.
    pub tolerance: f64,
    pub kappa_max: f64,
    /// Responsibility mass below which a component counts as collapsed.
    pub collapse_threshold: f64,
    pub max_restarts: usize,
    /// Lloyd iterations of circular k-means after k-means++ seeding.
    pub kmeans_iterations: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iterations: 500,
            tolerance: 1e-8,
            kappa_max: 1e4,
            collapse_threshold: 1e-8,
            max_restarts: 10,
            kmeans_iterations: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: VonMisesMixtureModel,
    pub log_likelihood: f64,
    /// Log-likelihood of the model entering each iteration, plus the final one.
    pub trace: Vec<f64>,
    /// Trace indices whose step included a component restart.
    pub restarts_at: Vec<usize>,
    pub converged: bool,
}

/// Fits an `n_components` von Mises mixture by EM with default settings.
pub fn em_fit(directions: &[Angle], n_components: usize, seed: u64) -> Result<VonMisesMixtureModel> {
    em_fit_with(directions, n_components, seed, &EmConfig::default()).map(|f| f.model)
}

pub fn em_fit_with(directions: &[Angle], n_components: usize, seed: u64, config: &EmConfig) -> Result<EmFit> {
    if directions.is_empty() {
        return Err(Error::Empty("directions"));
    }
    if n_components == 0 {
        return Err(Error::invalid("n_components", "must be positive"));
    }
    if directions.len() < 10 * n_components {
        return Err(Error::InsufficientData {
            needed: 10 * n_components,
            got: directions.len(),
        });
    }
    // Canonical order makes the fit independent of input permutation.
    let mut phis: Vec<f64> = directions.iter().map(|a| a.radians()).collect();
    phis.sort_by(f64::total_cmp);
    let trig: Vec<(f64, f64)> = phis
        .iter()
        .map(|p| {
            let (s, c) = p.sin_cos();
            (c, s)
        })
        .collect();
    let n = phis.len();
    let k = n_components;
    let mut rng = seeded(seed);

    let mut comps = initialize(&phis, &trig, k, config, &mut rng);
    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut restarts_at = Vec::new();
    let mut restarts = 0usize;
    let mut converged = false;
    let mut prev_ll = f64::NEG_INFINITY;
    let mut restarted_last = false;

    for _ in 0..=config.max_iterations {
        // E-step; also yields the log-likelihood of the current parameters.
        let rows: Vec<(f64, f64, f64, f64)> = comps
            .iter()
            .map(|c: &VonMisesComponent| {
                let (s, co) = c.mu.radians().sin_cos();
                // log weight plus the normalizer of the scaled density
                let offset = c.weight.ln() + vm_ln_pdf_trig(1.0, 0.0, 1.0, 0.0, c.kappa);
                (offset, co, s, c.kappa)
            })
            .collect();
        let mut ll = 0.0;
        for (i, &(cp, sp)) in trig.iter().enumerate() {
            let r = &mut resp[i * k..(i + 1) * k];
            for (slot, &(offset, cm, sm, kap)) in r.iter_mut().zip(&rows) {
                *slot = offset + kap * (cp * cm + sp * sm - 1.0);
            }
            let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for slot in r.iter_mut() {
                *slot = (*slot - max).exp();
                total += *slot;
            }
            ll += max + total.ln();
            for slot in r.iter_mut() {
                *slot /= total;
            }
        }
        trace.push(ll);
        if !restarted_last && trace.len() > 1 && ll - prev_ll < config.tolerance {
            converged = true;
            break;
        }
        if trace.len() > config.max_iterations {
            break;
        }
        prev_ll = ll;

        // M-step
        restarted_last = false;
        let mut next = Vec::with_capacity(k);
        for j in 0..k {
            let (mut mass, mut sc, mut ss) = (0.0, 0.0, 0.0);
            for (i, &(cp, sp)) in trig.iter().enumerate() {
                let g = resp[i * k + j];
                mass += g;
                sc += g * cp;
                ss += g * sp;
            }
            if mass < config.collapse_threshold {
                restarts += 1;
                if restarts > config.max_restarts {
                    return Err(Error::ComponentCollapse {
                        max_restarts: config.max_restarts,
                    });
                }
                restarted_last = true;
                let datum = phis[rng.random_range(0..n)];
                next.push(VonMisesComponent {
                    weight: 1.0 / k as f64,
                    mu: Angle(datum),
                    kappa: 1.0,
                });
                continue;
            }
            let rbar = (sc * sc + ss * ss).sqrt() / mass;
            next.push(VonMisesComponent {
                weight: mass / n as f64,
                mu: Angle(wrap(ss.atan2(sc))),
                kappa: inverse_bessel_ratio(rbar, config.kappa_max),
            });
        }
        if restarted_last {
            restarts_at.push(trace.len());
        }
        comps = next;
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        for c in &mut comps {
            c.weight /= total;
        }
    }

    comps.sort_by(|a, b| a.mu.radians().total_cmp(&b.mu.radians()));
    let model = VonMisesMixtureModel::from_unnormalized(comps);
    let log_likelihood = *trace.last().expect("at least one E-step");
    Ok(EmFit {
        model,
        log_likelihood,
        trace,
        restarts_at,
        converged,
    })
}

/// Circular k-means++ seeding followed by a few Lloyd rounds; returns
/// moment-matched starting components.
fn initialize<R: Rng + ?Sized>(
    phis: &[f64],
    trig: &[(f64, f64)],
    k: usize,
    config: &EmConfig,
    rng: &mut R,
) -> Vec<VonMisesComponent> {
    let n = phis.len();
    let mut centers = vec![phis[rng.random_range(0..n)]];
    let mut dist: Vec<f64> = phis.iter().map(|&p| 1.0 - (p - centers[0]).cos()).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > target {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = phis[pick];
        centers.push(c);
        for (d, &p) in dist.iter_mut().zip(phis) {
            *d = d.min(1.0 - (p - c).cos());
        }
    }

    let mut assign = vec![0usize; n];
    for _ in 0..=config.kmeans_iterations {
        for (a, &p) in assign.iter_mut().zip(phis) {
            *a = nearest(&centers, p);
        }
        let mut sums = vec![(0.0, 0.0); k];
        for (&a, &(c, s)) in assign.iter().zip(trig) {
            sums[a].0 += c;
            sums[a].1 += s;
        }
        for (center, &(c, s)) in centers.iter_mut().zip(&sums) {
            if c != 0.0 || s != 0.0 {
                *center = wrap(s.atan2(c));
            }
        }
    }

    (0..k)
        .map(|j| {
            let (mut count, mut c, mut s) = (0usize, 0.0, 0.0);
            for (&a, &(tc, ts)) in assign.iter().zip(trig) {
                if a == j {
                    count += 1;
                    c += tc;
                    s += ts;
                }
            }
            if count == 0 {
                return VonMisesComponent {
                    weight: 0.5 / n as f64,
                    mu: Angle(centers[j]),
                    kappa: 1.0,
                };
            }
            let rbar = (c * c + s * s).sqrt() / count as f64;
            VonMisesComponent {
                weight: count as f64 / n as f64,
                mu: Angle(wrap(s.atan2(c))),
                kappa: inverse_bessel_ratio(rbar, config.kappa_max),
            }
        })
        .collect()
}

fn nearest(centers: &[f64], p: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, &c) in centers.iter().enumerate() {
        let d = 1.0 - (p - c).cos();
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct CandidateScore {
    pub n_components: usize,
    pub log_likelihood: f64,
    pub bic: f64,
}

#[derive(Debug, Clone)]
pub struct ComponentSelection {
    pub model: VonMisesMixtureModel,
    pub bic: f64,
    pub scores: Vec<CandidateScore>,
}

/// Default BIC search range for the number of components.
pub const DEFAULT_CANDIDATES: std::ops::RangeInclusive<usize> = 1..=6;

/// Fits each candidate order and keeps the BIC minimizer, `−2ℓ + (3N−1) ln n`.
/// Ties go to the smaller order.
pub fn select_components(
    directions: &[Angle],
    candidate_counts: impl IntoIterator<Item = usize>,
    seed: u64,
) -> Result<ComponentSelection> {
    select_components_with(directions, candidate_counts, seed, &EmConfig::default())
}

pub fn select_components_with(
    directions: &[Angle],
    candidate_counts: impl IntoIterator<Item = usize>,
    seed: u64,
    config: &EmConfig,
) -> Result<ComponentSelection> {
    let mut counts: Vec<usize> = candidate_counts.into_iter().collect();
    counts.sort_unstable();
    counts.dedup();
    if counts.is_empty() {
        return Err(Error::Empty("candidate component counts"));
    }
    let ln_n = (directions.len() as f64).ln();
    let mut best: Option<(VonMisesMixtureModel, f64)> = None;
    let mut scores = Vec::with_capacity(counts.len());
    for k in counts {
        let fit = em_fit_with(directions, k, seed, config)?;
        let bic = -2.0 * fit.log_likelihood + fit.model.n_free_parameters() as f64 * ln_n;
        scores.push(CandidateScore {
            n_components: k,
            log_likelihood: fit.log_likelihood,
            bic,
        });
        if best.as_ref().map_or(true, |(_, b)| bic < *b) {
            best = Some((fit.model, bic));
        }
    }
    let (model, bic) = best.expect("nonempty candidates");
    Ok(ComponentSelection { model, bic, scores })
}

/// I.i.d. draws: component by weight, angle by Best–Fisher rejection.
pub fn mixture_sample(model: &VonMisesMixtureModel, count: usize, seed: u64) -> Vec<Angle> {
    let mut rng = seeded(seed);
    (0..count).map(|_| Angle(model.sample_with(&mut rng))).collect()
}

/// Mean direction and mean resultant length of a set of angles.
pub fn mean_direction(angles: &[Angle]) -> Option<(Angle, f64)> {
    if angles.is_empty() {
        return None;
    }
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| {
        let (si, ci) = a.radians().sin_cos();
        (s + si, c + ci)
    });
    let rbar = (s * s + c * c).sqrt() / angles.len() as f64;
    Some((Angle(wrap(s.atan2(c))), rbar))
}
