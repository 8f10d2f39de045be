use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::truth::{truth_sample, GaussianMixtureTruth, TruthCurves};
use super::WindSample;
use crate::bpqr::{bpqr_fit, PeriodicSplineBasis};
use crate::bwhr::{bwhr_fit, BwhrConfig};
use crate::circstats::{select_components, DEFAULT_CANDIDATES};
use crate::error::Result;
use crate::metrics::{mse_curve, signed_mean_relative_difference, wimre, wimse, CurveSample, DirectionGrid};
use crate::rng::{replicate_seed, stream_seed};

/// Share of failed replicates above which a study is flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub n: usize,
    pub years: usize,
    pub replicates: usize,
    pub taus: Vec<f64>,
    pub bwhr: BwhrConfig,
    pub basis: PeriodicSplineBasis,
    pub grid: DirectionGrid,
    pub max_components: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            n: 7360,
            years: 10,
            replicates: 500,
            taus: vec![0.5, 0.75, 0.95],
            bwhr: BwhrConfig::default(),
            basis: PeriodicSplineBasis::default(),
            grid: DirectionGrid::default(),
            max_components: *DEFAULT_CANDIDATES.end(),
            seed: 0,
        }
    }
}

/// Present and (optionally) future truths for one location.
#[derive(Debug, Clone)]
pub struct TruthPair {
    pub location: String,
    pub present: GaussianMixtureTruth,
    pub future: Option<GaussianMixtureTruth>,
}

/// One metric value from one replicate. `tau` is `None` for the density metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub replicate: usize,
    pub location: String,
    pub metric: String,
    pub estimator: String,
    pub tau: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyFailure {
    pub replicate: usize,
    pub estimator: String,
    pub message: String,
}

/// Metric pooled over all replicates (MSE average, WIMSE).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub location: String,
    pub metric: String,
    pub estimator: String,
    pub tau: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub location: String,
    pub replicates: usize,
    pub records: Vec<StudyRecord>,
    pub aggregates: Vec<AggregateRecord>,
    pub failures: Vec<StudyFailure>,
    /// More than 5% of replicates had at least one estimator failure.
    pub flagged: bool,
}

struct ReplicateResult {
    records: Vec<StudyRecord>,
    failures: Vec<StudyFailure>,
    /// Quantile curves keyed by (estimator, tau index), for pooled metrics.
    curves: Vec<(&'static str, usize, Vec<f64>)>,
}

const ESTIMATORS: [&str; 2] = ["bwhr", "bpqr"];

fn fit_curves(samples: &[WindSample], config: &StudyConfig, estimator: &'static str) -> Result<Vec<Vec<f64>>> {
    match estimator {
        "bwhr" => {
            let model = bwhr_fit(samples, &config.bwhr)?;
            config
                .taus
                .iter()
                .map(|&t| Ok(model.quantile_curve(config.grid, t)?.into_values()))
                .collect()
        }
        _ => config
            .taus
            .iter()
            .map(|&t| Ok(bpqr_fit(samples, t, &config.basis)?.curve(config.grid).into_values()))
            .collect(),
    }
}

fn curve(grid: DirectionGrid, values: Vec<f64>) -> CurveSample {
    CurveSample::new(grid, values).expect("curve length matches grid")
}

#[allow(clippy::too_many_arguments)]
fn run_replicate(
    index: usize,
    location: &str,
    present: &GaussianMixtureTruth,
    future: Option<&GaussianMixtureTruth>,
    truth_present: &TruthCurves,
    truth_future: Option<&TruthCurves>,
    config: &StudyConfig,
) -> Result<ReplicateResult> {
    let seed = replicate_seed(config.seed, index);
    let grid = config.grid;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut curves = Vec::new();
    let weight = &truth_present.density;
    let mut record = |metric: &str, estimator: &str, tau: Option<f64>, value: f64| {
        records.push(StudyRecord {
            replicate: index,
            location: location.to_string(),
            metric: metric.to_string(),
            estimator: estimator.to_string(),
            tau,
            value,
        })
    };

    let data = truth_sample(present, config.n, config.years, stream_seed(seed, 0))?;
    let future_data = match future {
        Some(t) => Some(truth_sample(t, config.n, config.years, stream_seed(seed, 1))?),
        None => None,
    };

    let directions: Vec<_> = data.iter().map(|s| s.direction).collect();
    match select_components(&directions, 1..=config.max_components, stream_seed(seed, 2)) {
        Ok(sel) => {
            let est = CurveSample::from_fn(grid, |phi| sel.model.pdf_raw(phi));
            record("wimre_density", "vmm", None, wimre(&est, weight, weight)?);
        }
        Err(e) => failures.push(StudyFailure {
            replicate: index,
            estimator: "vmm".into(),
            message: e.to_string(),
        }),
    }

    for estimator in ESTIMATORS {
        let present_curves = match fit_curves(&data, config, estimator) {
            Ok(c) => c,
            Err(e) => {
                failures.push(StudyFailure {
                    replicate: index,
                    estimator: estimator.into(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        for (k, (&tau, values)) in config.taus.iter().zip(&present_curves).enumerate() {
            let truth = &truth_present.quantiles[k].1;
            record(
                "wimre_quantile",
                estimator,
                Some(tau),
                wimre(&curve(grid, values.clone()), truth, weight)?,
            );
            curves.push((estimator, k, values.clone()));
        }
        let (Some(fd), Some(tf)) = (&future_data, truth_future) else {
            continue;
        };
        let future_curves = match fit_curves(fd, config, estimator) {
            Ok(c) => c,
            Err(e) => {
                failures.push(StudyFailure {
                    replicate: index,
                    estimator: format!("{estimator}-future"),
                    message: e.to_string(),
                });
                continue;
            }
        };
        for (k, &tau) in config.taus.iter().enumerate() {
            let diff: Vec<f64> = future_curves[k]
                .iter()
                .zip(&present_curves[k])
                .map(|(a, b)| a - b)
                .collect();
            let diff = curve(grid, diff);
            let truth_diff = tf.quantiles[k].1.minus(&truth_present.quantiles[k].1)?;
            record("mean_qdiff", estimator, Some(tau), diff.weighted_mean(weight)?);
            // relative metrics are undefined where the true difference vanishes
            if truth_diff.values().iter().all(|v| v.abs() > 1e-9) {
                record("wimre_qdiff", estimator, Some(tau), wimre(&diff, &truth_diff, weight)?);
                record(
                    "signed_mrd_qdiff",
                    estimator,
                    Some(tau),
                    signed_mean_relative_difference(&diff, &truth_diff, weight)?,
                );
            }
        }
    }
    Ok(ReplicateResult {
        records,
        failures,
        curves,
    })
}

/// Monte Carlo study at one location: each replicate samples the truths,
/// fits the direction mixture, BWHR and BPQR, and scores them against the
/// oracle curves. Replicate `i` uses seed `seed + i`.
pub fn run_study(truths: &TruthPair, config: &StudyConfig) -> Result<StudyOutput> {
    let location = truths.location.as_str();
    let mut output = StudyOutput {
        location: location.to_string(),
        replicates: config.replicates,
        records: Vec::new(),
        aggregates: Vec::new(),
        failures: Vec::new(),
        flagged: false,
    };
    if config.replicates == 0 {
        return Ok(output);
    }
    let truth_present = TruthCurves::compute(&truths.present, config.grid, &config.taus)?;
    let truth_future = match &truths.future {
        Some(f) => Some(TruthCurves::compute(f, config.grid, &config.taus)?),
        None => None,
    };
    let results: Vec<Result<ReplicateResult>> = (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            run_replicate(
                i,
                location,
                &truths.present,
                truths.future.as_ref(),
                &truth_present,
                truth_future.as_ref(),
                config,
            )
        })
        .collect();

    let mut pooled: BTreeMap<(&'static str, usize), Vec<CurveSample>> = BTreeMap::new();
    let mut failed_replicates = 0;
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(r) => {
                if !r.failures.is_empty() {
                    failed_replicates += 1;
                }
                output.records.extend(r.records);
                output.failures.extend(r.failures);
                for (est, k, values) in r.curves {
                    pooled.entry((est, k)).or_default().push(curve(config.grid, values));
                }
            }
            Err(e) => {
                failed_replicates += 1;
                output.failures.push(StudyFailure {
                    replicate: i,
                    estimator: "sampling".into(),
                    message: e.to_string(),
                });
            }
        }
    }
    for ((est, k), reps) in &pooled {
        let truth = &truth_present.quantiles[*k].1;
        let tau = Some(config.taus[*k]);
        let mse = mse_curve(reps, truth)?;
        output.aggregates.push(AggregateRecord {
            location: location.to_string(),
            metric: "mse_avg_quantile".into(),
            estimator: est.to_string(),
            tau,
            value: mse.average,
        });
        output.aggregates.push(AggregateRecord {
            location: location.to_string(),
            metric: "wimse_quantile".into(),
            estimator: est.to_string(),
            tau,
            value: wimse(reps, truth, &truth_present.density)?,
        });
    }
    output.flagged = failed_replicates as f64 > FAILURE_FLAG_FRACTION * config.replicates as f64;
    Ok(output)
}

/// Mean and standard deviation of one metric over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub location: String,
    pub metric: String,
    pub estimator: String,
    pub tau: Option<f64>,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub cells: Vec<SummaryCell>,
    pub aggregates: Vec<AggregateRecord>,
    /// Locations whose failure share exceeded the flag threshold.
    pub flagged: Vec<String>,
}

impl StudySummary {
    pub fn cell(&self, location: &str, metric: &str, estimator: &str, tau: Option<f64>) -> Option<&SummaryCell> {
        self.cells.iter().find(|c| {
            c.location == location
                && c.metric == metric
                && c.estimator == estimator
                && match (c.tau, tau) {
                    (Some(a), Some(b)) => (a - b).abs() < 1e-12,
                    (None, None) => true,
                    _ => false,
                }
        })
    }
}

/// Collapses replicate records into per-(location, metric, estimator, τ)
/// means and sample standard deviations.
pub fn summarize(outputs: &[StudyOutput]) -> StudySummary {
    let mut groups: BTreeMap<(String, String, String, Option<u64>), Vec<f64>> = BTreeMap::new();
    for out in outputs {
        for r in &out.records {
            groups
                .entry((
                    r.location.clone(),
                    r.metric.clone(),
                    r.estimator.clone(),
                    r.tau.map(f64::to_bits),
                ))
                .or_default()
                .push(r.value);
        }
    }
    let cells = groups
        .into_iter()
        .map(|((location, metric, estimator, tau), values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let sd = if values.len() > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryCell {
                location,
                metric,
                estimator,
                tau: tau.map(f64::from_bits),
                mean,
                sd,
                count: values.len(),
            }
        })
        .collect();
    StudySummary {
        cells,
        aggregates: outputs.iter().flat_map(|o| o.aggregates.iter().cloned()).collect(),
        flagged: outputs
            .iter()
            .filter(|o| o.flagged)
            .map(|o| o.location.clone())
            .collect(),
    }
}
