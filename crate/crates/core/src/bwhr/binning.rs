use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circstats::{circular_median, Angle};
use crate::error::{Error, Result};
use crate::synth::WindSample;
use crate::weibull::{weibull_mle, WeibullFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinScheme {
    EqualWidth,
    EqualFrequency,
}

impl fmt::Display for BinScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinScheme::EqualWidth => "equal-width",
            BinScheme::EqualFrequency => "equal-frequency",
        })
    }
}

impl FromStr for BinScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal-width" => Ok(BinScheme::EqualWidth),
            "equal-frequency" => Ok(BinScheme::EqualFrequency),
            other => Err(Error::invalid("scheme", format!("unknown binning scheme `{other}`"))),
        }
    }
}

/// Direction statistic that represents a bin in the harmonic regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinSummary {
    CircularMedian,
    Midpoint,
}

impl FromStr for BinSummary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circular-median" | "median" => Ok(BinSummary::CircularMedian),
            "midpoint" => Ok(BinSummary::Midpoint),
            other => Err(Error::invalid("summary", format!("unknown bin summary `{other}`"))),
        }
    }
}

/// Number of direction bins: fixed, or about 200 points per bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinCount {
    Fixed(usize),
    Auto,
}

pub const DEFAULT_BINS: usize = 36;
pub const AUTO_POINTS_PER_BIN: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub n_bins: BinCount,
    pub scheme: BinScheme,
    pub summary: BinSummary,
}

impl Default for BinningSpec {
    fn default() -> Self {
        BinningSpec {
            n_bins: BinCount::Fixed(DEFAULT_BINS),
            scheme: BinScheme::EqualWidth,
            summary: BinSummary::CircularMedian,
        }
    }
}

impl BinningSpec {
    pub fn equal_width(n_bins: usize) -> Self {
        BinningSpec {
            n_bins: BinCount::Fixed(n_bins),
            ..Default::default()
        }
    }

    /// Resolves the bin count for `n` samples; `Auto` is clamped to at least `min_bins`.
    pub fn resolve(&self, n: usize, min_bins: usize) -> usize {
        match self.n_bins {
            BinCount::Fixed(b) => b,
            BinCount::Auto => ((n as f64 / AUTO_POINTS_PER_BIN).round() as usize).max(min_bins).max(1),
        }
    }
}

/// An arc `[start, end)` of directions and the samples falling in it.
#[derive(Debug, Clone)]
pub struct DirectionBin {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub members: Vec<WindSample>,
}

impl DirectionBin {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

/// Partitions samples into direction bins. Equal-width arcs start at 0 and
/// are left-closed; equal-frequency bins hold counts differing by at most one.
/// Empty bins are kept (with no members).
pub fn bin_directions(samples: &[WindSample], spec: &BinningSpec) -> Result<Vec<DirectionBin>> {
    if samples.is_empty() {
        return Err(Error::Empty("wind samples"));
    }
    let n_bins = spec.resolve(samples.len(), 1);
    if n_bins == 0 {
        return Err(Error::invalid("n_bins", "must be positive"));
    }
    match spec.scheme {
        BinScheme::EqualWidth => {
            let width = TAU / n_bins as f64;
            let mut bins: Vec<DirectionBin> = (0..n_bins)
                .map(|j| DirectionBin {
                    index: j,
                    start: width * j as f64,
                    end: if j + 1 == n_bins { TAU } else { width * (j + 1) as f64 },
                    members: Vec::new(),
                })
                .collect();
            for s in samples {
                let phi = s.direction.radians();
                let mut j = ((phi / width) as usize).min(n_bins - 1);
                // float division can land one bin off near an edge
                if phi < bins[j].start {
                    j -= 1;
                } else if phi >= bins[j].end && j + 1 < n_bins {
                    j += 1;
                }
                bins[j].members.push(*s);
            }
            Ok(bins)
        }
        BinScheme::EqualFrequency => {
            let mut sorted = samples.to_vec();
            sorted.sort_by(|a, b| a.direction.radians().total_cmp(&b.direction.radians()));
            let n = sorted.len();
            let base = n / n_bins;
            let extra = n % n_bins;
            let mut groups = Vec::with_capacity(n_bins);
            let mut offset = 0;
            for j in 0..n_bins {
                let size = base + usize::from(j < extra);
                groups.push(sorted[offset..offset + size].to_vec());
                offset += size;
            }
            let mut starts = vec![0.0; n_bins];
            let mut last_seen: Option<f64> = None;
            for j in 0..n_bins {
                if j > 0 {
                    starts[j] = match (last_seen, groups[j].first()) {
                        (Some(prev), Some(first)) => 0.5 * (prev + first.direction.radians()),
                        (Some(prev), None) => prev,
                        (None, _) => 0.0,
                    };
                }
                if let Some(last) = groups[j].last() {
                    last_seen = Some(last.direction.radians());
                }
            }
            Ok(groups
                .into_iter()
                .enumerate()
                .map(|(j, members)| DirectionBin {
                    index: j,
                    start: starts[j],
                    end: if j + 1 == n_bins { TAU } else { starts[j + 1] },
                    members,
                })
                .collect())
        }
    }
}

/// Per-bin Weibull fit and the direction that represents the bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinFit {
    pub summary_angle: Angle,
    pub fit: WeibullFit,
    pub count: usize,
    pub bin_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedBin {
    pub bin_index: usize,
    pub count: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BinFits {
    pub fits: Vec<BinFit>,
    pub excluded: Vec<ExcludedBin>,
}

#[derive(Debug, Clone, Copy)]
pub struct BinFitOptions {
    /// Bins with fewer samples are left out of the regression.
    pub min_count: usize,
    /// Calm speeds (below this, including 0) are raised to it before fitting.
    pub calm_floor: f64,
    pub summary: BinSummary,
}

impl Default for BinFitOptions {
    fn default() -> Self {
        BinFitOptions {
            min_count: 5,
            calm_floor: 0.01,
            summary: BinSummary::CircularMedian,
        }
    }
}

/// Fits a Weibull law to the speeds in each usable bin.
///
/// Fails with [`Error::InsufficientBins`] when fewer than `2K + 2` bins
/// survive for harmonic order `K`.
pub fn fit_bins(bins: &[DirectionBin], options: &BinFitOptions, harmonic_order: usize) -> Result<BinFits> {
    let mut fits = Vec::new();
    let mut excluded = Vec::new();
    for bin in bins {
        let count = bin.members.len();
        if count < options.min_count {
            excluded.push(ExcludedBin {
                bin_index: bin.index,
                count,
                reason: if count == 0 {
                    "empty".to_string()
                } else {
                    format!("{count} samples, below minimum {}", options.min_count)
                },
            });
            continue;
        }
        let speeds: Vec<f64> = bin.members.iter().map(|s| s.speed.max(options.calm_floor)).collect();
        let fit = match weibull_mle(&speeds) {
            Ok(fit) => fit,
            Err(e) => {
                excluded.push(ExcludedBin {
                    bin_index: bin.index,
                    count,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let summary_angle = match options.summary {
            BinSummary::CircularMedian => {
                let dirs: Vec<Angle> = bin.members.iter().map(|s| s.direction).collect();
                circular_median(&dirs)?
            }
            BinSummary::Midpoint => Angle::new(0.5 * (bin.start + bin.end))?,
        };
        fits.push(BinFit {
            summary_angle,
            fit,
            count,
            bin_index: bin.index,
        });
    }
    let needed = 2 * harmonic_order + 2;
    if fits.len() < needed {
        return Err(Error::InsufficientBins {
            usable: fits.len(),
            needed,
            order: harmonic_order,
        });
    }
    Ok(BinFits { fits, excluded })
}
