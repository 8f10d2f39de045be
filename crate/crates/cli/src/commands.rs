use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use windcond_core::bpqr::bpqr_fit;
use windcond_core::bwhr::{bwhr_fit, joint_density_estimate, joint_simulate, DirectionalWeibullModel, Lattice};
use windcond_core::circstats::{em_fit, mixture_pdf, select_components};
use windcond_core::io::{
    ingest, read_curves, tau_label, write_band, write_curves, write_study_records, write_summary, CurveTable, Ingested,
};
use windcond_core::metrics::{mse_curve, signed_mean_relative_difference, wimre, wimse, CurveSample, DirectionGrid};
use windcond_core::resample::{
    bootstrap_band, percentile_ranks, quantile_band, quantile_difference_band, BlockedDataset, BootstrapBand,
};
use windcond_core::rng::stream_seed;
use windcond_core::synth::{fixture, run_study, summarize, GaussianMixtureTruth, TruthPair};
use windcond_core::{Angle, VonMisesMixtureModel};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// What a command did, printed as JSON on stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub body: Value,
    pub warnings: Vec<String>,
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}

fn output_dir(config: &RunConfig) -> CliResult<&Path> {
    let dir = config.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|source| CliError::File {
        path: dir.display().to_string(),
        source,
    })?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|source| CliError::File {
            path: path.display().to_string(),
            source,
        })
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, command: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("`{command}` needs --{flag}")))
}

fn load(path: &Path, config: &RunConfig) -> CliResult<Ingested> {
    ingest(path, &config.ingest_options()).map_err(CliError::from)
}

fn ingest_summary(data: &Ingested) -> Value {
    json!({
        "rows_read": data.rows_read,
        "skipped": data.skipped,
        "filtered": data.filtered,
        "n": data.dataset.len(),
        "years": data.dataset.n_blocks(),
    })
}

fn density_curve(model: &VonMisesMixtureModel, grid: DirectionGrid) -> Vec<f64> {
    grid.angle_values().map(|a| mixture_pdf(a, model)).collect()
}

fn directions(data: &BlockedDataset) -> Vec<Angle> {
    data.samples().iter().map(|s| s.direction).collect()
}

fn file_names(dir: &Path, names: &[String]) -> Vec<String> {
    names.iter().map(|n| dir.join(n).display().to_string()).collect()
}

/// Fits both speed models and the direction mixture to one dataset.
pub fn cmd_fit(config: &RunConfig) -> CliResult<Report> {
    let data = load(required(&config.input, "input", "fit")?, config)?;
    let samples = data.dataset.samples();
    let grid = config.grid()?;
    let basis = config.basis()?;

    let model = bwhr_fit(&samples, &config.bwhr()?)?;
    let mut bwhr_cols = Vec::new();
    let mut bpqr_cols = Vec::new();
    for &tau in &config.taus {
        bwhr_cols.push((tau_label(tau), model.quantile_curve(grid, tau)?.into_values()));
        bpqr_cols.push((
            tau_label(tau),
            bpqr_fit(&samples, tau, &basis)?.curve(grid).into_values(),
        ));
    }
    let dirs: Vec<Angle> = samples.iter().map(|s| s.direction).collect();
    let selection = select_components(&dirs, 1..=config.max_components, stream_seed(config.seed, 0))?;

    let dir = output_dir(config)?;
    write_text(&dir.join("vonmises.json"), &selection.model.to_json())?;
    write_text(&dir.join("bwhr.json"), &model.to_json())?;
    write_curves(create(&dir.join("curves_bwhr.csv"))?, grid, &bwhr_cols)?;
    write_curves(create(&dir.join("curves_bpqr.csv"))?, grid, &bpqr_cols)?;
    write_curves(
        create(&dir.join("direction_density.csv"))?,
        grid,
        &[("density".to_string(), density_curve(&selection.model, grid))],
    )?;

    let files: Vec<String> = [
        "vonmises.json",
        "bwhr.json",
        "curves_bwhr.csv",
        "curves_bpqr.csv",
        "direction_density.csv",
    ]
    .map(String::from)
    .to_vec();
    Ok(Report {
        body: json!({
            "command": "fit",
            "data": ingest_summary(&data),
            "components": selection.model.len(),
            "bic": selection.bic,
            "bins": model.n_bins,
            "excluded_bins": model.excluded.iter().map(|b| json!({
                "bin": b.bin_index, "count": b.count, "reason": b.reason,
            })).collect::<Vec<_>>(),
            "files": file_names(dir, &files),
        }),
        warnings: Vec::new(),
    })
}

fn band_summary(name: &str, band: &BootstrapBand) -> Value {
    json!({
        "file": name,
        "replicates": band.n_replicates,
        "failures": band.failures.len(),
    })
}

/// Percentile bands for the direction density, each quantile curve and,
/// given a second dataset, the quantile differences.
pub fn cmd_bootstrap(config: &RunConfig) -> CliResult<Report> {
    let present = load(required(&config.input, "input", "bootstrap")?, config)?;
    let future = match &config.future_input {
        Some(p) => Some(load(p, config)?),
        None => None,
    };
    let settings = config.curve_settings()?;
    let grid = settings.grid;
    let (n_rep, level) = (config.replicates, config.level);
    let dir = output_dir(config)?;
    let mut warnings = Vec::new();
    let mut bands = Vec::new();

    // The component count is chosen once on the full data and held fixed.
    let selection = select_components(
        &directions(&present.dataset),
        1..=config.max_components,
        stream_seed(config.seed, 0),
    )?;
    let k = selection.model.len();
    let em_seed = stream_seed(config.seed, 1);
    let density = bootstrap_band(
        &present.dataset,
        |d| Ok(density_curve(&em_fit(&directions(d), k, em_seed)?, grid)),
        grid,
        n_rep,
        level,
        stream_seed(config.seed, 2),
    )?;
    warnings.extend(density.warnings.iter().cloned());
    write_band(create(&dir.join("band_density.csv"))?, &density)?;
    bands.push(band_summary("band_density.csv", &density));

    let mut differences = Vec::new();
    for (i, &tau) in config.taus.iter().enumerate() {
        let label = tau_label(tau);
        let name = format!("band_{label}.csv");
        let band = quantile_band(
            &present.dataset,
            tau,
            &settings,
            n_rep,
            level,
            stream_seed(config.seed, 10 + i as u64),
        )?;
        write_band(create(&dir.join(&name))?, &band)?;
        bands.push(band_summary(&name, &band));
        if let Some(f) = &future {
            let name = format!("band_diff_{label}.csv");
            let diff = quantile_difference_band(
                &present.dataset,
                &f.dataset,
                tau,
                &settings,
                n_rep,
                level,
                stream_seed(config.seed, 100 + i as u64),
            )?;
            write_band(create(&dir.join(&name))?, &diff.band)?;
            bands.push(band_summary(&name, &diff.band));
            differences.push(json!({
                "tau": tau,
                "file": name,
                "direction_averaged": {
                    "estimate": diff.marginal.estimate,
                    "lower": diff.marginal.lower,
                    "upper": diff.marginal.upper,
                },
            }));
        }
    }
    warnings.dedup();
    let (lo, hi) = percentile_ranks(n_rep, level);
    let summary = json!({
        "command": "bootstrap",
        "method": settings.method,
        "level": level,
        "replicates": n_rep,
        "order_statistics": [lo, hi],
        "components": k,
        "data": ingest_summary(&present),
        "future_data": future.as_ref().map(ingest_summary),
        "bands": bands,
        "differences": differences,
        "warnings": warnings,
    });
    write_text(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(Report {
        body: summary,
        warnings,
    })
}

/// A fixture name, or a path to a truth JSON file.
fn load_truth(spec: &str) -> CliResult<(String, GaussianMixtureTruth)> {
    let path = Path::new(spec);
    if spec.ends_with(".json") || path.is_file() {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec.to_string());
        return Ok((name, GaussianMixtureTruth::from_json(&read_text(path)?)?));
    }
    Ok((spec.to_string(), fixture(spec)?))
}

/// Monte Carlo comparison of the estimators against known truths.
pub fn cmd_study(config: &RunConfig) -> CliResult<Report> {
    let study = config.study()?;
    let mut outputs = Vec::new();
    for (i, spec) in config.fixtures.iter().enumerate() {
        let (location, present) = load_truth(spec)?;
        let future = match config.future_fixtures.get(i) {
            Some(f) => Some(load_truth(f)?.1),
            None => None,
        };
        outputs.push(run_study(
            &TruthPair {
                location,
                present,
                future,
            },
            &study,
        )?);
    }
    let dir = output_dir(config)?;
    let records: Vec<_> = outputs.iter().flat_map(|o| o.records.iter().cloned()).collect();
    write_study_records(create(&dir.join("study_records.csv"))?, &records)?;
    let summary = summarize(&outputs);
    write_summary(create(&dir.join("study_summary.csv"))?, &summary)?;
    let warnings: Vec<String> = summary
        .flagged
        .iter()
        .map(|loc| format!("{loc}: more than 5% of replicates failed"))
        .collect();
    let body = json!({
        "command": "study",
        "replicates": study.replicates,
        "n": study.n,
        "locations": outputs.iter().map(|o| json!({
            "location": o.location,
            "failures": o.failures.iter().map(|f| json!({
                "replicate": f.replicate, "estimator": f.estimator, "message": f.message,
            })).collect::<Vec<_>>(),
            "flagged": o.flagged,
        })).collect::<Vec<_>>(),
        "files": file_names(dir, &["study_records.csv".into(), "study_summary.csv".into()]),
        "warnings": warnings,
    });
    write_text(&dir.join("study.json"), &serde_json::to_string_pretty(&body)?)?;
    Ok(Report { body, warnings })
}

/// Draws from a fitted joint model and smooths the draws onto a lattice.
pub fn cmd_simulate(config: &RunConfig) -> CliResult<Report> {
    let model_dir = required(&config.model_dir, "model-dir", "simulate")?;
    let directions = VonMisesMixtureModel::from_json(&read_text(&model_dir.join("vonmises.json"))?)?;
    let speeds = DirectionalWeibullModel::from_json(&read_text(&model_dir.join("bwhr.json"))?)?;
    let points = joint_simulate(&directions, &speeds, config.count, config.seed)?;
    let dir = output_dir(config)?;

    let mut w = csv_writer(&dir.join("simulated.csv"))?;
    w.write_record(["u", "v"]).map_err(windcond_core::Error::from)?;
    for (u, v) in &points {
        w.write_record([u.to_string(), v.to_string()])
            .map_err(windcond_core::Error::from)?;
    }
    w.flush().map_err(windcond_core::Error::from)?;

    let lattice = Lattice::covering(&points, 4.0, config.lattice, config.lattice)?;
    let surface = joint_density_estimate(&points, &lattice)?;
    let mut w = csv_writer(&dir.join("density_surface.csv"))?;
    w.write_record(["u", "v", "density"])
        .map_err(windcond_core::Error::from)?;
    for iu in 0..lattice.nu {
        for iv in 0..lattice.nv {
            w.write_record([
                lattice.u(iu).to_string(),
                lattice.v(iv).to_string(),
                surface.at(iu, iv).to_string(),
            ])
            .map_err(windcond_core::Error::from)?;
        }
    }
    w.flush().map_err(windcond_core::Error::from)?;
    Ok(Report {
        body: json!({
            "command": "simulate",
            "count": points.len(),
            "bandwidth": [surface.bandwidth.0, surface.bandwidth.1],
            "mass": surface.mass(),
            "files": file_names(dir, &["simulated.csv".into(), "density_surface.csv".into()]),
        }),
        warnings: Vec::new(),
    })
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

/// Inputs of `metrics`, beyond the shared settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsInput {
    /// One curve file per replicate.
    pub estimates: Vec<PathBuf>,
    pub truth: PathBuf,
    pub weight: PathBuf,
    pub weight_column: String,
}

fn read_table(path: &Path) -> CliResult<CurveTable> {
    let file = File::open(path).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })?;
    Ok(read_curves(file)?)
}

fn table_curve(table: &CurveTable, grid: DirectionGrid, column: &str, path: &Path) -> CliResult<CurveSample> {
    let values = table
        .column(column)
        .ok_or_else(|| windcond_core::Error::MissingColumn(format!("{column} in {}", path.display())))?;
    Ok(CurveSample::new(grid, values.to_vec())?)
}

/// Recomputes WIMRE (and, across several estimate files, MSE and WIMSE)
/// from stored curves.
pub fn cmd_metrics(config: &RunConfig, input: &MetricsInput) -> CliResult<Report> {
    if input.estimates.is_empty() {
        return Err(CliError::Config("`metrics` needs at least one --estimate".into()));
    }
    let truth = read_table(&input.truth)?;
    let grid = truth.grid()?;
    let weight = table_curve(&read_table(&input.weight)?, grid, &input.weight_column, &input.weight)?;
    let estimates = input
        .estimates
        .iter()
        .map(|p| read_table(p).map(|t| (p, t)))
        .collect::<CliResult<Vec<_>>>()?;
    let first = &estimates[0].1;
    let columns: Vec<&str> = first
        .columns
        .iter()
        .map(|(n, _)| n.as_str())
        .filter(|n| truth.column(n).is_some())
        .collect();
    if columns.is_empty() {
        return Err(CliError::Config(
            "estimate and truth files share no curve columns".into(),
        ));
    }

    let dir = output_dir(config)?;
    let mut w = csv_writer(&dir.join("metrics.csv"))?;
    w.write_record(["column", "replicate", "metric", "value"])
        .map_err(windcond_core::Error::from)?;
    let mut rows = Vec::new();
    let mut record = |column: &str, replicate: String, metric: &str, value: f64| -> CliResult<()> {
        w.write_record([column, replicate.as_str(), metric, value.to_string().as_str()])
            .map_err(windcond_core::Error::from)?;
        rows.push(json!({ "column": column, "replicate": replicate, "metric": metric, "value": value }));
        Ok(())
    };
    for column in columns {
        let truth_curve = table_curve(&truth, grid, column, &input.truth)?;
        let mut reps = Vec::new();
        for (i, (path, table)) in estimates.iter().enumerate() {
            let est = table_curve(table, grid, column, path)?;
            record(column, i.to_string(), "wimre", wimre(&est, &truth_curve, &weight)?)?;
            record(
                column,
                i.to_string(),
                "signed_mrd",
                signed_mean_relative_difference(&est, &truth_curve, &weight)?,
            )?;
            reps.push(est);
        }
        record(
            column,
            String::new(),
            "mse_avg",
            mse_curve(&reps, &truth_curve)?.average,
        )?;
        record(column, String::new(), "wimse", wimse(&reps, &truth_curve, &weight)?)?;
    }
    w.flush().map_err(windcond_core::Error::from)?;
    Ok(Report {
        body: json!({
            "command": "metrics",
            "metrics": rows,
            "files": file_names(dir, &["metrics.csv".into()]),
        }),
        warnings: Vec::new(),
    })
}
