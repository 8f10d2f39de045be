//! CSV ingestion of wind records and plain-text exports of curves, bands,
//! and study results. Floats are written with Rust's shortest round-trip
//! formatting, so every export parses back to the same `f64`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circstats::AngleUnit;
use crate::error::{Error, Result};
use crate::metrics::DirectionGrid;
use crate::resample::{BlockedDataset, BootstrapBand};
use crate::synth::{AggregateRecord, StudyRecord};
use crate::synth::{StudySummary, WindSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// Columns `u`, `v` (m/s).
    Uv,
    /// Columns `r` (m/s) and `phi` in the stated unit.
    Polar,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uv" => Ok(InputFormat::Uv),
            "polar" => Ok(InputFormat::Polar),
            other => Err(Error::invalid("format", format!("unknown input format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub format: InputFormat,
    pub unit: Option<AngleUnit>,
    pub year_column: String,
    /// Keep only rows where this column equals the given value.
    pub season: Option<(String, String)>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            format: InputFormat::Uv,
            unit: None,
            year_column: "year".to_string(),
            season: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: BlockedDataset,
    pub rows_read: usize,
    /// Rows dropped for missing, unparsable, or non-finite values.
    pub skipped: usize,
    /// Rows dropped by the season filter.
    pub filtered: usize,
}

fn column(headers: &HashMap<String, usize>, name: &str) -> Result<usize> {
    headers
        .get(name)
        .copied()
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Reads wind records from CSV text with a header row.
pub fn ingest_reader<R: Read>(reader: R, options: &IngestOptions) -> Result<Ingested> {
    if options.format == InputFormat::Polar && options.unit.is_none() {
        return Err(Error::MissingUnit);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: HashMap<String, usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let (a, b) = match options.format {
        InputFormat::Uv => (column(&headers, "u")?, column(&headers, "v")?),
        InputFormat::Polar => (column(&headers, "r")?, column(&headers, "phi")?),
    };
    let year = column(&headers, &options.year_column)?;
    let season = match &options.season {
        Some((name, value)) => Some((column(&headers, name)?, value.as_str())),
        None => None,
    };

    let mut samples = Vec::new();
    let mut rows_read = 0;
    let mut skipped = 0;
    let mut filtered = 0;
    for record in rdr.records() {
        let record = record?;
        rows_read += 1;
        if let Some((col, value)) = season {
            if record.get(col) != Some(value) {
                filtered += 1;
                continue;
            }
        }
        let num = |i: usize| {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|x| x.is_finite())
        };
        let parsed = (|| {
            let x = num(a)?;
            let y = num(b)?;
            let yr = record.get(year)?.parse::<i32>().ok()?;
            let sample = match options.format {
                InputFormat::Uv => WindSample::from_uv(x, y, yr).ok()?,
                InputFormat::Polar => {
                    let phi = options.unit.expect("checked above").to_angle(y).ok()?;
                    WindSample::new(x, phi, yr).ok()?
                }
            };
            Some(sample)
        })();
        match parsed {
            Some(s) => samples.push(s),
            None => skipped += 1,
        }
    }
    if samples.is_empty() {
        return Err(Error::Empty("valid data rows"));
    }
    Ok(Ingested {
        dataset: BlockedDataset::from_samples(samples)?,
        rows_read,
        skipped,
        filtered,
    })
}

pub fn ingest(path: impl AsRef<Path>, options: &IngestOptions) -> Result<Ingested> {
    ingest_reader(File::open(path)?, options)
}

/// Writes `(u, v, year)` rows.
pub fn write_samples_uv<W: Write>(out: W, samples: &[WindSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "v", "year"])?;
    for s in samples {
        let (u, v) = s.uv();
        w.write_record([u.to_string(), v.to_string(), s.year.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Column label for a quantile level: `0.95 → q95`, `0.975 → q97.5`.
pub fn tau_label(tau: f64) -> String {
    let pct = (tau * 100.0 * 1e6).round() / 1e6;
    format!("q{pct}")
}

/// Writes `phi_rad, phi_deg` followed by one column per named curve.
pub fn write_curves<W: Write>(out: W, grid: DirectionGrid, columns: &[(String, Vec<f64>)]) -> Result<()> {
    for (name, values) in columns {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "column `{name}` has {} values for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["phi_rad".to_string(), "phi_deg".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)?;
    for (i, phi) in grid.angles().enumerate() {
        let mut row = vec![phi.to_string(), phi.to_degrees().to_string()];
        row.extend(columns.iter().map(|(_, v)| v[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A table of curves read back from [`write_curves`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub phi: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl CurveTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// The grid implied by the `phi_rad` column, if it is a standard grid.
    pub fn grid(&self) -> Result<DirectionGrid> {
        let grid = DirectionGrid::new(self.phi.len())?;
        for (i, &p) in self.phi.iter().enumerate() {
            if (p - grid.angle(i)).abs() > 1e-9 {
                return Err(Error::GridMismatch(format!(
                    "row {i}: phi_rad {p} is not on a uniform grid"
                )));
            }
        }
        Ok(grid)
    }
}

pub fn read_curves<R: Read>(input: R) -> Result<CurveTable> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let phi_col = headers
        .iter()
        .position(|h| h == "phi_rad")
        .ok_or_else(|| Error::MissingColumn("phi_rad".into()))?;
    let value_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != phi_col && headers[i] != "phi_deg")
        .collect();
    let mut phi = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); value_cols.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Domain(format!("row {}: column `{}` is not a number", row + 1, headers[i])))
        };
        phi.push(parse(phi_col)?);
        for (k, &c) in value_cols.iter().enumerate() {
            values[k].push(parse(c)?);
        }
    }
    Ok(CurveTable {
        phi,
        columns: value_cols.iter().map(|&c| headers[c].clone()).zip(values).collect(),
    })
}

/// Writes `phi_rad, estimate, lower, upper, level`.
pub fn write_band<W: Write>(out: W, band: &BootstrapBand) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phi_rad", "estimate", "lower", "upper", "level"])?;
    for (i, phi) in band.grid.angles().enumerate() {
        w.write_record([
            phi.to_string(),
            band.estimate[i].to_string(),
            band.lower[i].to_string(),
            band.upper[i].to_string(),
            band.level.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn tau_field(tau: Option<f64>) -> String {
    tau.map(|t| t.to_string()).unwrap_or_default()
}

/// Writes `replicate, location, metric, estimator, tau, value`.
pub fn write_study_records<W: Write>(out: W, records: &[StudyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate", "location", "metric", "estimator", "tau", "value"])?;
    for r in records {
        w.write_record([
            r.replicate.to_string(),
            r.location.clone(),
            r.metric.clone(),
            r.estimator.clone(),
            tau_field(r.tau),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_study_records<R: Read>(input: R) -> Result<Vec<StudyRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |what: &str| Error::Domain(format!("study record has an invalid {what}"));
        out.push(StudyRecord {
            replicate: field(0).parse().map_err(|_| bad("replicate"))?,
            location: field(1).to_string(),
            metric: field(2).to_string(),
            estimator: field(3).to_string(),
            tau: match field(4) {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("tau"))?),
            },
            value: field(5).parse().map_err(|_| bad("value"))?,
        });
    }
    Ok(out)
}

/// Table-style summary: one row per (metric, τ), and for every
/// (location, estimator) pair a mean and a standard deviation column.
/// Pooled metrics (MSE average, WIMSE) fill the mean column with an empty sd.
pub fn write_summary<W: Write>(out: W, summary: &StudySummary) -> Result<()> {
    let mut columns: Vec<(String, String)> = Vec::new();
    let mut rows: Vec<(String, Option<f64>)> = Vec::new();
    let mut push_unique = |loc: &str, est: &str, metric: &str, tau: Option<f64>| {
        let col = (loc.to_string(), est.to_string());
        if !columns.contains(&col) {
            columns.push(col);
        }
        let row = (metric.to_string(), tau);
        if !rows.contains(&row) {
            rows.push(row);
        }
    };
    for c in &summary.cells {
        push_unique(&c.location, &c.estimator, &c.metric, c.tau);
    }
    for a in &summary.aggregates {
        push_unique(&a.location, &a.estimator, &a.metric, a.tau);
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["metric".to_string(), "tau".to_string()];
    for (loc, est) in &columns {
        header.push(format!("{loc}:{est}:mean"));
        header.push(format!("{loc}:{est}:sd"));
    }
    w.write_record(&header)?;
    let same_tau = |a: Option<f64>, b: Option<f64>| a.map(f64::to_bits) == b.map(f64::to_bits);
    for (metric, tau) in &rows {
        let mut row = vec![metric.clone(), tau_field(*tau)];
        for (loc, est) in &columns {
            let cell = summary
                .cells
                .iter()
                .find(|c| &c.location == loc && &c.estimator == est && &c.metric == metric && same_tau(c.tau, *tau));
            let agg: Option<&AggregateRecord> = summary
                .aggregates
                .iter()
                .find(|a| &a.location == loc && &a.estimator == est && &a.metric == metric && same_tau(a.tau, *tau));
            match (cell, agg) {
                (Some(c), _) => {
                    row.push(c.mean.to_string());
                    row.push(c.sd.to_string());
                }
                (None, Some(a)) => {
                    row.push(a.value.to_string());
                    row.push(String::new());
                }
                (None, None) => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn uv_options() -> IngestOptions {
        IngestOptions::default()
    }

    #[test]
    fn uv_axis_row() {
        let text = "u,v,year\n0,1,1995\n";
        let got = ingest_reader(text.as_bytes(), &uv_options()).unwrap();
        let s = got.dataset.samples()[0];
        assert_eq!((s.speed, s.direction.radians(), s.year), (1.0, 0.0, 1995));
    }

    #[test]
    fn polar_degrees() {
        let opts = IngestOptions {
            format: InputFormat::Polar,
            unit: Some(AngleUnit::Degrees),
            ..Default::default()
        };
        let got = ingest_reader("r,phi,year\n5,90,2001\n".as_bytes(), &opts).unwrap();
        let s = got.dataset.samples()[0];
        assert!((s.direction.radians() - PI / 2.0).abs() < 1e-15);
        assert_eq!(s.speed, 5.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            ingest_reader("u,v,year\n".as_bytes(), &uv_options()),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            ingest_reader("u,w,year\n1,2,3\n".as_bytes(), &uv_options()),
            Err(Error::MissingColumn(c)) if c == "v"
        ));
        let polar = IngestOptions {
            format: InputFormat::Polar,
            ..Default::default()
        };
        assert!(matches!(
            ingest_reader("r,phi,year\n1,2,3\n".as_bytes(), &polar),
            Err(Error::MissingUnit)
        ));
    }

    #[test]
    fn skips_bad_rows_and_filters_season() {
        let text =
            "u,v,year,season\n1,2,2000,DJF\nNaN,1,2000,DJF\n,1,2000,DJF\n1,1,x,DJF\n3,4,2001,JJA\n2,2,2001,DJF\n";
        let opts = IngestOptions {
            season: Some(("season".into(), "DJF".into())),
            ..Default::default()
        };
        let got = ingest_reader(text.as_bytes(), &opts).unwrap();
        assert_eq!(got.rows_read, 6);
        assert_eq!(got.skipped, 3);
        assert_eq!(got.filtered, 1);
        assert_eq!(got.dataset.len(), 2);
        assert_eq!(got.dataset.n_blocks(), 2);
    }

    #[test]
    fn custom_year_column() {
        let opts = IngestOptions {
            year_column: "yr".into(),
            ..Default::default()
        };
        let got = ingest_reader("yr,u,v\n1999,1,1\n".as_bytes(), &opts).unwrap();
        assert_eq!(got.dataset.samples()[0].year, 1999);
    }

    #[test]
    fn curves_round_trip_exactly() {
        let grid = DirectionGrid::default();
        let values: Vec<f64> = grid.angles().map(|p| 7.0 + (3.0 * p).sin() / 3.0).collect();
        let mut buf = Vec::new();
        write_curves(&mut buf, grid, &[(tau_label(0.95), values.clone())]).unwrap();
        let table = read_curves(buf.as_slice()).unwrap();
        assert_eq!(table.column("q95").unwrap(), values.as_slice());
        assert_eq!(table.grid().unwrap(), grid);
        for (i, p) in table.phi.iter().enumerate() {
            assert_eq!(*p, grid.angle(i));
        }
    }

    #[test]
    fn samples_round_trip() {
        let samples = vec![
            WindSample::from_uv(1.25, -3.5, 1990).unwrap(),
            WindSample::from_uv(-0.1, 0.7, 1991).unwrap(),
        ];
        let mut buf = Vec::new();
        write_samples_uv(&mut buf, &samples).unwrap();
        let back = ingest_reader(buf.as_slice(), &uv_options()).unwrap().dataset.samples();
        for (a, b) in samples.iter().zip(&back) {
            assert!((a.speed - b.speed).abs() < 1e-12);
            assert!(a.direction.arc_distance(b.direction) < 1e-12);
        }
    }

    #[test]
    fn tau_labels() {
        assert_eq!(tau_label(0.5), "q50");
        assert_eq!(tau_label(0.75), "q75");
        assert_eq!(tau_label(0.95), "q95");
        assert_eq!(tau_label(0.975), "q97.5");
    }

    #[test]
    fn study_records_round_trip() {
        let recs = vec![
            StudyRecord {
                replicate: 0,
                location: "a".into(),
                metric: "wimre_density".into(),
                estimator: "vmm".into(),
                tau: None,
                value: 0.0123456789012345,
            },
            StudyRecord {
                replicate: 1,
                location: "a".into(),
                metric: "wimre_quantile".into(),
                estimator: "bwhr".into(),
                tau: Some(0.95),
                value: 1.0 / 3.0,
            },
        ];
        let mut buf = Vec::new();
        write_study_records(&mut buf, &recs).unwrap();
        assert_eq!(read_study_records(buf.as_slice()).unwrap(), recs);
    }
}
