//! Year-block bootstrap: whole years are resampled with replacement, keeping
//! the number of years fixed, and curve statistics get pointwise percentile
//! bands.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bpqr::{bpqr_fit, PeriodicSplineBasis};
use crate::bwhr::{bwhr_fit, BwhrConfig};
use crate::error::{Error, Result};
use crate::metrics::DirectionGrid;
use crate::rng::{replicate_seed, seeded, stream_seed};
use crate::synth::WindSample;
use crate::weibull::check_tau;

pub const DEFAULT_REPLICATES: usize = 500;
pub const DEFAULT_LEVEL: f64 = 0.95;
/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

/// Samples grouped into blocks (one per year label).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedDataset {
    blocks: Vec<(i32, Vec<WindSample>)>,
}

impl BlockedDataset {
    /// Groups samples by year; blocks are ordered by year.
    pub fn from_samples(samples: Vec<WindSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("wind samples"));
        }
        let mut by_year: BTreeMap<i32, Vec<WindSample>> = BTreeMap::new();
        for s in samples {
            by_year.entry(s.year).or_default().push(s);
        }
        Ok(BlockedDataset {
            blocks: by_year.into_iter().collect(),
        })
    }

    /// Blocks as given; a resample may repeat a year label.
    pub fn from_blocks(blocks: Vec<(i32, Vec<WindSample>)>) -> Result<Self> {
        if blocks.is_empty() || blocks.iter().all(|(_, b)| b.is_empty()) {
            return Err(Error::Empty("blocked dataset"));
        }
        Ok(BlockedDataset { blocks })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[(i32, Vec<WindSample>)] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples(&self) -> Vec<WindSample> {
        self.blocks.iter().flat_map(|(_, b)| b.iter().copied()).collect()
    }

    /// Applies `f` to every sample, keeping the block structure.
    pub fn map_samples(&self, f: impl Fn(&WindSample) -> WindSample) -> Self {
        BlockedDataset {
            blocks: self
                .blocks
                .iter()
                .map(|(y, b)| (*y, b.iter().map(&f).collect()))
                .collect(),
        }
    }
}

/// Draws as many blocks as the input has, uniformly with replacement.
pub fn block_resample(data: &BlockedDataset, seed: u64) -> BlockedDataset {
    let mut rng = seeded(seed);
    resample_with(data, &mut rng)
}

fn resample_with<R: Rng + ?Sized>(data: &BlockedDataset, rng: &mut R) -> BlockedDataset {
    let k = data.blocks.len();
    BlockedDataset {
        blocks: (0..k).map(|_| data.blocks[rng.random_range(0..k)].clone()).collect(),
    }
}

/// Pointwise percentile band over a direction grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBand {
    pub grid: DirectionGrid,
    /// Statistic evaluated on the original data.
    pub estimate: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub n_replicates: usize,
    pub failures: Vec<(usize, String)>,
    pub warnings: Vec<String>,
}

impl BootstrapBand {
    /// Share of grid points where `lower <= value <= upper`.
    pub fn coverage(&self, values: &[f64]) -> f64 {
        let hits = values
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
            .count();
        hits as f64 / values.len() as f64
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (u - l)).collect()
    }
}

/// 1-based ranks of the lower and upper percentile bounds among `b`
/// sorted replicates: `k = ⌈b·(1−level)/2⌉` and `b + 1 − k`, so both tails
/// hold the same number of replicates. Clamped to at least 1.
pub fn percentile_ranks(b: usize, level: f64) -> (usize, usize) {
    let tail = b as f64 * (1.0 - level) / 2.0;
    // guard against 500·0.025 evaluating to 12.500000000000002
    let k = ((tail - 1e-9).ceil() as usize).clamp(1, b.max(1));
    (k, b + 1 - k)
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    Ok(())
}

fn small_sample_warnings(n_rep: usize, level: f64) -> Vec<String> {
    let mut warnings = Vec::new();
    if n_rep < 100 {
        warnings.push(format!(
            "only {n_rep} bootstrap replicates; at least 100 are recommended"
        ));
    }
    let tail = n_rep as f64 * (1.0 - level) / 2.0;
    if tail < 1.0 {
        warnings.push(format!(
            "{n_rep} replicates at level {level} leave {tail:.2} expected samples per tail; percentile ranks clamp to the extremes"
        ));
    }
    warnings
}

/// Reduces replicate curves (one `Vec` per successful replicate, each of grid length) to bounds.
fn band_from_replicates(
    grid: DirectionGrid,
    estimate: Vec<f64>,
    curves: Vec<Vec<f64>>,
    level: f64,
    n_replicates: usize,
    failures: Vec<(usize, String)>,
    mut warnings: Vec<String>,
) -> Result<BootstrapBand> {
    let failed = failures.len();
    if failed as f64 > MAX_FAILURE_FRACTION * n_replicates as f64 || curves.is_empty() {
        return Err(Error::UnstableStatistic {
            failed,
            total: n_replicates,
            failures,
        });
    }
    if failed > 0 {
        warnings.push(format!(
            "{failed} of {n_replicates} replicates failed and were excluded"
        ));
    }
    let b = curves.len();
    let (lo_rank, hi_rank) = percentile_ranks(b, level);
    let m = grid.len();
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    let mut column = vec![0.0; b];
    for i in 0..m {
        for (c, curve) in column.iter_mut().zip(&curves) {
            *c = curve[i];
        }
        column.sort_by(f64::total_cmp);
        lower.push(column[lo_rank - 1]);
        upper.push(column[hi_rank - 1]);
    }
    Ok(BootstrapBand {
        grid,
        estimate,
        lower,
        upper,
        level,
        n_replicates,
        failures,
        warnings,
    })
}

fn check_curve(grid: &DirectionGrid, curve: &[f64]) -> Result<()> {
    if curve.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "statistic returned {} values for a {}-point grid",
            curve.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Percentile band of a curve statistic over `n_rep` block resamples.
///
/// Replicate `r` resamples with seed `seed + r`, so the band does not depend
/// on thread scheduling. Failed replicates are excluded; more than 10%
/// failures is an error.
pub fn bootstrap_band<F>(
    data: &BlockedDataset,
    statistic: F,
    grid: DirectionGrid,
    n_rep: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapBand>
where
    F: Fn(&BlockedDataset) -> Result<Vec<f64>> + Sync,
{
    check_level(level)?;
    if n_rep == 0 {
        return Err(Error::invalid("n_replicates", "must be positive"));
    }
    let estimate = statistic(data)?;
    check_curve(&grid, &estimate)?;
    let results: Vec<Result<Vec<f64>>> = (0..n_rep)
        .into_par_iter()
        .map(|r| {
            let resample = block_resample(data, replicate_seed(seed, r));
            let curve = statistic(&resample)?;
            check_curve(&grid, &curve)?;
            Ok(curve)
        })
        .collect();
    let mut curves = Vec::with_capacity(n_rep);
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(c) => curves.push(c),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    band_from_replicates(
        grid,
        estimate,
        curves,
        level,
        n_rep,
        failures,
        small_sample_warnings(n_rep, level),
    )
}

/// Estimator used for directional quantile curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantileMethod {
    Bwhr,
    Bpqr,
}

impl std::str::FromStr for QuantileMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bwhr" => Ok(QuantileMethod::Bwhr),
            "bpqr" => Ok(QuantileMethod::Bpqr),
            other => Err(Error::invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Settings shared by the quantile-curve statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSettings {
    pub method: QuantileMethod,
    pub bwhr: BwhrConfig,
    pub basis: PeriodicSplineBasis,
    pub grid: DirectionGrid,
}

impl Default for CurveSettings {
    fn default() -> Self {
        CurveSettings {
            method: QuantileMethod::Bwhr,
            bwhr: BwhrConfig::default(),
            basis: PeriodicSplineBasis::default(),
            grid: DirectionGrid::default(),
        }
    }
}

/// Estimated `τ`-quantile curve on the settings grid.
pub fn quantile_curve(samples: &[WindSample], tau: f64, settings: &CurveSettings) -> Result<Vec<f64>> {
    match settings.method {
        QuantileMethod::Bwhr => Ok(bwhr_fit(samples, &settings.bwhr)?
            .quantile_curve(settings.grid, tau)?
            .into_values()),
        QuantileMethod::Bpqr => Ok(bpqr_fit(samples, tau, &settings.basis)?
            .curve(settings.grid)
            .into_values()),
    }
}

/// Empirical `τ`-quantile (type-7 interpolation).
pub fn empirical_quantile(values: &[f64], tau: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    check_tau(tau)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * tau;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// A scalar estimate with its percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileDifference {
    /// Band for `future − present` quantile curves.
    pub band: BootstrapBand,
    /// Difference of the marginal (all-direction) speed quantiles.
    pub marginal: ScalarInterval,
}

/// Bootstrap band for the difference of `τ`-quantile curves between two
/// datasets, each resampled independently.
///
/// Replicate `r` resamples `present` with seed `seed + r` and `future` with
/// an independent stream derived from the same value.
pub fn quantile_difference_band(
    present: &BlockedDataset,
    future: &BlockedDataset,
    tau: f64,
    settings: &CurveSettings,
    n_rep: usize,
    level: f64,
    seed: u64,
) -> Result<QuantileDifference> {
    check_tau(tau)?;
    check_level(level)?;
    if n_rep == 0 {
        return Err(Error::invalid("n_replicates", "must be positive"));
    }
    let grid = settings.grid;
    let statistic = |p: &BlockedDataset, f: &BlockedDataset| -> Result<(Vec<f64>, f64)> {
        let ps = p.samples();
        let fs = f.samples();
        let qp = quantile_curve(&ps, tau, settings)?;
        let qf = quantile_curve(&fs, tau, settings)?;
        let curve = qf.iter().zip(&qp).map(|(a, b)| a - b).collect();
        let speeds = |s: &[WindSample]| s.iter().map(|w| w.speed).collect::<Vec<f64>>();
        let marginal = empirical_quantile(&speeds(&fs), tau)? - empirical_quantile(&speeds(&ps), tau)?;
        Ok((curve, marginal))
    };
    let (estimate, marginal_estimate) = statistic(present, future)?;
    let results: Vec<Result<(Vec<f64>, f64)>> = (0..n_rep)
        .into_par_iter()
        .map(|r| {
            let s = replicate_seed(seed, r);
            let p = block_resample(present, s);
            let f = block_resample(future, stream_seed(s, 1));
            statistic(&p, &f)
        })
        .collect();
    let mut curves = Vec::with_capacity(n_rep);
    let mut scalars = Vec::with_capacity(n_rep);
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok((c, m)) => {
                curves.push(c);
                scalars.push(m);
            }
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let band = band_from_replicates(
        grid,
        estimate,
        curves,
        level,
        n_rep,
        failures,
        small_sample_warnings(n_rep, level),
    )?;
    scalars.sort_by(f64::total_cmp);
    let (lo, hi) = percentile_ranks(scalars.len(), level);
    Ok(QuantileDifference {
        band,
        marginal: ScalarInterval {
            estimate: marginal_estimate,
            lower: scalars[lo - 1],
            upper: scalars[hi - 1],
            level,
        },
    })
}

/// Curve-valued statistic for quantile bands on a single dataset.
pub fn quantile_band(
    data: &BlockedDataset,
    tau: f64,
    settings: &CurveSettings,
    n_rep: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapBand> {
    check_tau(tau)?;
    bootstrap_band(
        data,
        |d| quantile_curve(&d.samples(), tau, settings),
        settings.grid,
        n_rep,
        level,
        seed,
    )
}
