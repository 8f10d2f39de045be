use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};
use windcond_core::bpqr::{PeriodicSplineBasis, DEFAULT_DF};
use windcond_core::bwhr::{
    BinCount, BinScheme, BinSummary, BinningSpec, BwhrConfig, DEFAULT_BINS, DEFAULT_HARMONIC_ORDER,
};
use windcond_core::circstats::DEFAULT_CANDIDATES;
use windcond_core::io::{IngestOptions, InputFormat};
use windcond_core::metrics::{DirectionGrid, DEFAULT_GRID_SIZE};
use windcond_core::resample::{CurveSettings, QuantileMethod, DEFAULT_LEVEL, DEFAULT_REPLICATES};
use windcond_core::synth::{StudyConfig, FIXTURE_NAMES};
use windcond_core::AngleUnit;

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "WINDCOND_SEED";

/// Bin count: a number, or `auto` for about 200 points per bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bins {
    Fixed(usize),
    Named(BinsKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinsKeyword {
    Auto,
}

impl FromStr for Bins {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Bins::Named(BinsKeyword::Auto));
        }
        s.parse()
            .map(Bins::Fixed)
            .map_err(|_| format!("expected a bin count or `auto`, got `{s}`"))
    }
}

impl fmt::Display for Bins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bins::Fixed(n) => write!(f, "{n}"),
            Bins::Named(BinsKeyword::Auto) => f.write_str("auto"),
        }
    }
}

/// One layer of settings. The same struct is read from the TOML config file
/// and from command-line flags; unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigLayer {
    /// Wind records CSV
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Second wind records CSV for difference bands
    #[arg(long)]
    pub future_input: Option<PathBuf>,
    /// Input columns: uv (u, v) or polar (r, phi)
    #[arg(long)]
    pub format: Option<InputFormat>,
    /// Unit of the phi column (rad or deg)
    #[arg(long)]
    pub unit: Option<AngleUnit>,
    #[arg(long)]
    pub year_column: Option<String>,
    /// Column used to select a season
    #[arg(long)]
    pub season_column: Option<String>,
    /// Value of the season column to keep
    #[arg(long)]
    pub season_value: Option<String>,
    /// Number of direction bins, or `auto`
    #[arg(long)]
    pub bins: Option<Bins>,
    #[arg(long)]
    pub scheme: Option<BinScheme>,
    /// Bin direction summary: circular-median or midpoint
    #[arg(long)]
    pub summary: Option<BinSummary>,
    #[arg(long)]
    pub k_alpha: Option<usize>,
    #[arg(long)]
    pub k_beta: Option<usize>,
    /// Periodic spline basis size for quantile regression
    #[arg(long)]
    pub df: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Quantile estimator for bootstrap bands
    #[arg(long)]
    pub method: Option<QuantileMethod>,
    #[arg(long, short = 'o')]
    pub output_dir: Option<PathBuf>,
    /// Points on the direction grid
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Largest number of von Mises components tried
    #[arg(long)]
    pub max_components: Option<usize>,
    /// Truth fixtures (names or JSON paths) for the study
    #[arg(long, value_delimiter = ',')]
    pub fixtures: Option<Vec<String>>,
    /// Future truths, paired with `fixtures` in order
    #[arg(long, value_delimiter = ',')]
    pub future_fixtures: Option<Vec<String>>,
    /// Observations per synthetic dataset
    #[arg(long)]
    pub n: Option<usize>,
    /// Synthetic years per dataset
    #[arg(long)]
    pub years: Option<usize>,
    /// Draws for `simulate`
    #[arg(long)]
    pub count: Option<usize>,
    /// Directory holding vonmises.json and bwhr.json
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    /// Lattice points per axis for the density surface
    #[arg(long)]
    pub lattice: Option<usize>,
}

macro_rules! overlay {
    ($top:expr, $bottom:expr; $($field:ident),+ $(,)?) => {
        ConfigLayer { $($field: $top.$field.or($bottom.$field)),+ }
    };
}

impl ConfigLayer {
    pub fn from_toml_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        overlay!(self, lower;
            input, future_input, format, unit, year_column, season_column, season_value,
            bins, scheme, summary, k_alpha, k_beta, df, taus, replicates, level, seed, method,
            output_dir, grid_size, max_components, fixtures, future_fixtures, n, years, count,
            model_dir, lattice,
        )
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub future_input: Option<PathBuf>,
    pub format: InputFormat,
    pub unit: Option<AngleUnit>,
    pub year_column: String,
    pub season_column: Option<String>,
    pub season_value: Option<String>,
    pub bins: Bins,
    pub scheme: BinScheme,
    pub summary: BinSummary,
    pub k_alpha: usize,
    pub k_beta: usize,
    pub df: usize,
    pub taus: Vec<f64>,
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub method: QuantileMethod,
    pub output_dir: PathBuf,
    pub grid_size: usize,
    pub max_components: usize,
    pub fixtures: Vec<String>,
    pub future_fixtures: Vec<String>,
    pub n: usize,
    pub years: usize,
    pub count: usize,
    pub model_dir: Option<PathBuf>,
    pub lattice: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::resolve(ConfigLayer::default(), ConfigLayer::default(), None).expect("defaults are valid")
    }
}

fn parse_env_seed(raw: &str) -> CliResult<u64> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{SEED_ENV}=`{raw}` is not an unsigned integer")))
}

impl RunConfig {
    /// Precedence: flags, then the seed environment variable, then the file,
    /// then defaults.
    pub fn resolve(flags: ConfigLayer, file: ConfigLayer, env_seed: Option<&str>) -> CliResult<Self> {
        let env = ConfigLayer {
            seed: env_seed.map(parse_env_seed).transpose()?,
            ..Default::default()
        };
        let c = flags.over(env).over(file);
        let study = StudyConfig::default();
        let config = RunConfig {
            input: c.input,
            future_input: c.future_input,
            format: c.format.unwrap_or(InputFormat::Uv),
            unit: c.unit,
            year_column: c.year_column.unwrap_or_else(|| "year".to_string()),
            season_column: c.season_column,
            season_value: c.season_value,
            bins: c.bins.unwrap_or(Bins::Fixed(DEFAULT_BINS)),
            scheme: c.scheme.unwrap_or(BinScheme::EqualWidth),
            summary: c.summary.unwrap_or(BinSummary::CircularMedian),
            k_alpha: c.k_alpha.unwrap_or(DEFAULT_HARMONIC_ORDER),
            k_beta: c.k_beta.unwrap_or(DEFAULT_HARMONIC_ORDER),
            df: c.df.unwrap_or(DEFAULT_DF),
            taus: c.taus.unwrap_or_else(|| study.taus.clone()),
            replicates: c.replicates.unwrap_or(DEFAULT_REPLICATES),
            level: c.level.unwrap_or(DEFAULT_LEVEL),
            seed: c.seed.unwrap_or(0),
            method: c.method.unwrap_or(QuantileMethod::Bwhr),
            output_dir: c.output_dir.unwrap_or_else(|| PathBuf::from("windcond-out")),
            grid_size: c.grid_size.unwrap_or(DEFAULT_GRID_SIZE),
            max_components: c.max_components.unwrap_or(*DEFAULT_CANDIDATES.end()),
            fixtures: c
                .fixtures
                .unwrap_or_else(|| FIXTURE_NAMES.iter().map(|s| s.to_string()).collect()),
            future_fixtures: c.future_fixtures.unwrap_or_default(),
            n: c.n.unwrap_or(study.n),
            years: c.years.unwrap_or(study.years),
            count: c.count.unwrap_or(100_000),
            model_dir: c.model_dir,
            lattice: c.lattice.unwrap_or(101),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |what: String| Err(CliError::Config(what));
        if self.taus.is_empty() {
            return bad("taus must not be empty".into());
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return bad(format!("tau {t} is outside (0, 1)"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level {} is outside (0, 1)", self.level));
        }
        if self.season_column.is_some() != self.season_value.is_some() {
            return bad("season_column and season_value must be given together".into());
        }
        if !self.future_fixtures.is_empty() && self.future_fixtures.len() != self.fixtures.len() {
            return bad(format!(
                "{} future fixtures for {} fixtures",
                self.future_fixtures.len(),
                self.fixtures.len()
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<DirectionGrid> {
        Ok(DirectionGrid::new(self.grid_size)?)
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            format: self.format,
            unit: self.unit,
            year_column: self.year_column.clone(),
            season: self.season_column.clone().zip(self.season_value.clone()),
        }
    }

    pub fn bwhr(&self) -> CliResult<BwhrConfig> {
        Ok(BwhrConfig {
            binning: BinningSpec {
                n_bins: match self.bins {
                    Bins::Fixed(n) => BinCount::Fixed(n),
                    Bins::Named(BinsKeyword::Auto) => BinCount::Auto,
                },
                scheme: self.scheme,
                summary: self.summary,
            },
            k_alpha: self.k_alpha,
            k_beta: self.k_beta,
            grid: self.grid()?,
            ..Default::default()
        })
    }

    pub fn basis(&self) -> CliResult<PeriodicSplineBasis> {
        Ok(PeriodicSplineBasis::new(self.df)?)
    }

    pub fn curve_settings(&self) -> CliResult<CurveSettings> {
        Ok(CurveSettings {
            method: self.method,
            bwhr: self.bwhr()?,
            basis: self.basis()?,
            grid: self.grid()?,
        })
    }

    pub fn study(&self) -> CliResult<StudyConfig> {
        Ok(StudyConfig {
            n: self.n,
            years: self.years,
            replicates: self.replicates,
            taus: self.taus.clone(),
            bwhr: self.bwhr()?,
            basis: self.basis()?,
            grid: self.grid()?,
            max_components: self.max_components,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_method() {
        let c = RunConfig::default();
        assert_eq!(c.bins, Bins::Fixed(36));
        assert_eq!((c.k_alpha, c.k_beta, c.df), (8, 8, 18));
        assert_eq!(c.taus, vec![0.5, 0.75, 0.95]);
        assert_eq!((c.replicates, c.level), (500, 0.95));
    }

    #[test]
    fn precedence_is_flag_env_file_default() {
        let file: ConfigLayer = toml::from_str("seed = 3\nreplicates = 50\nbins = \"auto\"\nk_alpha = 4").unwrap();
        let flags = ConfigLayer {
            k_alpha: Some(2),
            ..Default::default()
        };
        let c = RunConfig::resolve(flags.clone(), file.clone(), None).unwrap();
        assert_eq!((c.seed, c.replicates, c.k_alpha), (3, 50, 2));
        assert_eq!(c.bins, Bins::Named(BinsKeyword::Auto));
        let c = RunConfig::resolve(flags, file.clone(), Some("11")).unwrap();
        assert_eq!(c.seed, 11);
        let flags = ConfigLayer {
            seed: Some(5),
            ..Default::default()
        };
        assert_eq!(RunConfig::resolve(flags, file, Some("11")).unwrap().seed, 5);
    }

    #[test]
    fn rejects_bad_values() {
        let layer = |s: &str| toml::from_str::<ConfigLayer>(s).unwrap();
        assert!(RunConfig::resolve(layer("taus = [0.5, 1.0]"), ConfigLayer::default(), None).is_err());
        assert!(RunConfig::resolve(layer("level = 1.5"), ConfigLayer::default(), None).is_err());
        assert!(RunConfig::resolve(ConfigLayer::default(), ConfigLayer::default(), Some("x")).is_err());
        assert!(toml::from_str::<ConfigLayer>("no_such_field = 1").is_err());
    }

    #[test]
    fn bins_parse() {
        assert_eq!("auto".parse::<Bins>().unwrap(), Bins::Named(BinsKeyword::Auto));
        assert_eq!("12".parse::<Bins>().unwrap(), Bins::Fixed(12));
        assert!("twelve".parse::<Bins>().is_err());
        let c: ConfigLayer = toml::from_str("bins = 10\nformat = \"polar\"\nunit = \"deg\"").unwrap();
        assert_eq!(c.bins, Some(Bins::Fixed(10)));
        assert_eq!(c.unit, Some(AngleUnit::Degrees));
    }
}
