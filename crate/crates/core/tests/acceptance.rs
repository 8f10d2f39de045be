//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits nonzero if any fail.
//!
//! `cargo test -p windcond-core --release --test acceptance -- 3 4` runs a subset.

use std::f64::consts::TAU;
use std::time::Instant;

use rand::Rng;
use windcond_core::bpqr::PeriodicSplineBasis;
use windcond_core::bwhr::{bwhr_fit, BwhrConfig};
use windcond_core::circstats::{
    em_fit_with, mixture_pdf, normalize_angle, EmConfig, VonMisesComponent, VonMisesMixtureModel,
};
use windcond_core::io::write_study_records;
use windcond_core::metrics::{wimre, CurveSample, DirectionGrid};
use windcond_core::quadrature::{integrate, QuadratureConfig};
use windcond_core::resample::{quantile_band, quantile_difference_band, BlockedDataset, CurveSettings};
use windcond_core::rng::seeded;
use windcond_core::synth::{
    fixture, run_study, summarize, truth_conditional_quantile, truth_direction_density, truth_sample,
    GaussianMixtureTruth, StudyConfig, StudySummary, TruthCurves, TruthPair, FIXTURE_NAMES,
};
use windcond_core::weibull::{weibull_mle, weibull_sample, WeibullParams};
use windcond_core::{Angle, WindSample};

type Check = Result<(bool, String), String>;

struct Criterion {
    id: &'static str,
    name: &'static str,
    run: fn(&mut Shared) -> Check,
}

/// The fixture study feeds both the ordering and the density criteria.
#[derive(Default)]
struct Shared {
    study: Option<StudySummary>,
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn fixture_study(shared: &mut Shared) -> Result<&StudySummary, String> {
    if shared.study.is_none() {
        let mut outputs = Vec::new();
        for name in FIXTURE_NAMES {
            let pair = TruthPair {
                location: name.to_string(),
                present: fixture(name).map_err(err)?,
                future: None,
            };
            let config = StudyConfig {
                replicates: 100,
                taus: vec![0.95],
                seed: 20_240_601,
                ..Default::default()
            };
            outputs.push(run_study(&pair, &config).map_err(err)?);
        }
        shared.study = Some(summarize(&outputs));
    }
    Ok(shared.study.as_ref().expect("just computed"))
}

fn estimator_ordering(shared: &mut Shared) -> Check {
    let summary = fixture_study(shared)?;
    let mut ok = summary.flagged.is_empty();
    let mut parts = Vec::new();
    for name in FIXTURE_NAMES {
        let cell = |est| {
            summary
                .cell(name, "wimre_quantile", est, Some(0.95))
                .ok_or_else(|| format!("{name}: no {est} cell"))
        };
        let (bwhr, bpqr) = (cell("bwhr")?, cell("bpqr")?);
        ok &= bwhr.count == 100 && bpqr.count == 100;
        ok &= bwhr.mean < bpqr.mean && bwhr.mean < 0.15 && bpqr.mean < 0.15;
        parts.push(format!("{name} bwhr {:.4} < bpqr {:.4}", bwhr.mean, bpqr.mean));
    }
    Ok((ok, parts.join("; ")))
}

fn density_quality(shared: &mut Shared) -> Check {
    let summary = fixture_study(shared)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for name in FIXTURE_NAMES {
        let bound = if name.starts_with("mountain") { 0.25 } else { 0.10 };
        let cell = summary
            .cell(name, "wimre_density", "vmm", None)
            .ok_or_else(|| format!("{name}: no density cell"))?;
        ok &= cell.count == 100 && cell.mean < bound;
        parts.push(format!("{name} {:.4} < {bound}", cell.mean));
    }
    Ok((ok, parts.join("; ")))
}

fn weibull_quantile(alpha: f64, beta: f64, tau: f64) -> f64 {
    beta * (-(1.0 - tau).ln()).powf(1.0 / alpha)
}

fn bwhr_recovery(_: &mut Shared) -> Check {
    let alpha = |p: f64| 2.0 + 0.5 * p.cos();
    let beta = |p: f64| 8.0 + 2.0 * p.sin();
    let grid = DirectionGrid::default();
    let weight = CurveSample::from_fn(grid, |_| 1.0);
    let taus = [0.5, 0.75, 0.95];
    let mut worst = [0.0f64; 3];
    let mut mean = [0.0f64; 3];
    for rep in 0..50u64 {
        let mut rng = seeded(900 + rep);
        let samples: Vec<WindSample> = (0..7360)
            .map(|_| {
                let phi = rng.random::<f64>() * TAU;
                let r = weibull_quantile(alpha(phi), beta(phi), rng.random::<f64>());
                WindSample::new(r, Angle::new(phi).map_err(err)?, 2000).map_err(err)
            })
            .collect::<Result<_, _>>()?;
        let model = bwhr_fit(&samples, &BwhrConfig::default()).map_err(err)?;
        for (k, &tau) in taus.iter().enumerate() {
            let truth = CurveSample::from_fn(grid, |p| weibull_quantile(alpha(p), beta(p), tau));
            let est = model.quantile_curve(grid, tau).map_err(err)?;
            let e = wimre(&est, &truth, &weight).map_err(err)?;
            worst[k] = worst[k].max(e);
            mean[k] += e / 50.0;
        }
    }
    let ok = worst.iter().all(|&w| w < 0.05);
    let detail = taus
        .iter()
        .zip(worst.iter().zip(&mean))
        .map(|(t, (w, m))| format!("q{t}: max {w:.4}, mean {m:.4}"))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((ok, format!("{detail} over 50 replicates")))
}

fn oracle_rayleigh(_: &mut Shared) -> Check {
    let sigma = 3.0;
    let truth = GaussianMixtureTruth::isotropic(sigma).map_err(err)?;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let phi = Angle::new(TAU * (i as f64 + 0.37) / 20.0).map_err(err)?;
        for tau in [0.5, 0.75, 0.95] {
            let q = truth_conditional_quantile(&truth, phi, tau).map_err(err)?;
            let exact = sigma * (-2.0 * (1.0 - tau).ln()).sqrt();
            worst = worst.max((q - exact).abs());
        }
    }
    Ok((worst < 1e-5, format!("max |q - rayleigh| = {worst:.2e}")))
}

fn bootstrap_coverage(_: &mut Shared) -> Check {
    let truth = fixture("plains-unimodal").map_err(err)?;
    let settings = CurveSettings::default();
    let curves = TruthCurves::compute(&truth, settings.grid, &[0.95]).map_err(err)?;
    let target = curves.quantile(0.95).ok_or("missing truth curve")?.values().to_vec();
    let trials = 200u64;
    let mut total = 0.0;
    for trial in 0..trials {
        let samples = truth_sample(&truth, 7360, 10, 70_000 + trial).map_err(err)?;
        let data = BlockedDataset::from_samples(samples).map_err(err)?;
        let band = quantile_band(&data, 0.95, &settings, 200, 0.95, 80_000 + 1000 * trial).map_err(err)?;
        if !band.failures.is_empty() {
            return Err(format!("trial {trial}: {} failed replicates", band.failures.len()));
        }
        total += band.coverage(&target);
    }
    let rate = total / trials as f64;
    Ok((
        (0.88..=0.99).contains(&rate),
        format!("grid-average coverage {rate:.4} over {trials} trials (bwhr, 200 inner)"),
    ))
}

fn null_difference(_: &mut Shared) -> Check {
    let truth = fixture("plains-bimodal").map_err(err)?;
    let settings = CurveSettings::default();
    let mut worst = 1.0f64;
    for run in 0..20u64 {
        let data =
            BlockedDataset::from_samples(truth_sample(&truth, 7360, 10, 300 + run).map_err(err)?).map_err(err)?;
        let diff = quantile_difference_band(&data, &data, 0.95, &settings, 200, 0.95, 400 + 1000 * run).map_err(err)?;
        let band = &diff.band;
        let straddle = band
            .lower
            .iter()
            .zip(&band.upper)
            .filter(|(lo, hi)| **lo <= 0.0 && **hi >= 0.0)
            .count() as f64
            / band.lower.len() as f64;
        worst = worst.min(straddle);
    }
    Ok((
        worst >= 0.99,
        format!("min share of angles straddling 0 over 20 runs: {worst:.4}"),
    ))
}

fn invariants(_: &mut Shared) -> Check {
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("    {} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failed.push(name.to_string());
        }
    };
    let quad = QuadratureConfig {
        abs_tol: 1e-11,
        rel_tol: 1e-12,
        max_subdivisions: 2000,
    };

    // normalization
    let mix = VonMisesMixtureModel::new(vec![
        VonMisesComponent {
            weight: 0.5,
            mu: Angle::new(0.4).map_err(err)?,
            kappa: 12.0,
        },
        VonMisesComponent {
            weight: 0.3,
            mu: Angle::new(3.5).map_err(err)?,
            kappa: 2.0,
        },
        VonMisesComponent {
            weight: 0.2,
            mu: Angle::new(5.0).map_err(err)?,
            kappa: 0.0,
        },
    ])
    .map_err(err)?;
    let vm_mass = integrate(
        |p| mixture_pdf(normalize_angle(p).expect("finite"), &mix),
        0.0,
        TAU,
        &quad,
    )
    .map_err(err)?;
    let wb = WeibullParams::new(1.7, 6.0).map_err(err)?;
    let wb_mass = integrate(|r| wb.pdf(r).unwrap_or(0.0), 0.0, 200.0, &quad).map_err(err)?;
    let truth = fixture("mountain-multimodal").map_err(err)?;
    let dir_mass = integrate(
        |p| truth_direction_density(&truth, normalize_angle(p).expect("finite")).unwrap_or(f64::NAN),
        0.0,
        TAU,
        &QuadratureConfig::default(),
    )
    .map_err(err)?;
    let dev = [vm_mass.value, wb_mass.value, dir_mass.value]
        .iter()
        .map(|m| (m - 1.0).abs())
        .fold(0.0, f64::max);
    check("normalization", dev < 1e-8, format!("max |mass - 1| = {dev:.2e}"));

    // EM monotonicity
    let data = mix.sample(4000, 5);
    let mut drops = 0;
    for k in 1..=5 {
        for seed in 0..3 {
            let fit = em_fit_with(&data, k, seed, &EmConfig::default()).map_err(err)?;
            drops += (1..fit.trace.len())
                .filter(|i| !fit.restarts_at.contains(i))
                .filter(|&i| fit.trace[i] < fit.trace[i - 1] - 1e-9 * fit.trace[i - 1].abs())
                .count();
        }
    }
    check("em monotone", drops == 0, format!("{drops} decreasing steps"));

    // MLE scale equivariance
    let draws = weibull_sample(&wb, 2000, 8);
    let base = weibull_mle(&draws).map_err(err)?;
    let mut worst = 0.0f64;
    for c in [0.01, 0.5, 3.0, 250.0] {
        let scaled: Vec<f64> = draws.iter().map(|r| r * c).collect();
        let fit = weibull_mle(&scaled).map_err(err)?;
        worst = worst
            .max((fit.params.shape() / base.params.shape() - 1.0).abs())
            .max((fit.params.scale() / (c * base.params.scale()) - 1.0).abs());
    }
    check(
        "mle scale equivariance",
        worst < 1e-8,
        format!("max relative change {worst:.2e}"),
    );

    // quantile / cdf inversion
    let mut worst = 0.0f64;
    for (a, b) in [(0.8, 2.0), (2.0, 8.0), (3.5, 12.0)] {
        let p = WeibullParams::new(a, b).map_err(err)?;
        for i in 1..1000 {
            let tau = i as f64 / 1000.0;
            worst = worst.max((p.cdf(p.quantile(tau).map_err(err)?) - tau).abs());
        }
    }
    check(
        "quantile inversion",
        worst < 1e-12,
        format!("max |F(Q(tau)) - tau| = {worst:.2e}"),
    );

    // partition of unity
    let mut worst = 0.0f64;
    for df in [4, 7, 18, 40] {
        let basis = PeriodicSplineBasis::new(df).map_err(err)?;
        for i in 0..2000 {
            let phi = TAU * i as f64 / 2000.0 + 1e-3;
            let s: f64 = basis.eval(phi.rem_euclid(TAU)).iter().sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    check(
        "partition of unity",
        worst < 1e-12,
        format!("max |sum - 1| = {worst:.2e}"),
    );

    // WIMRE rescaling
    let grid = DirectionGrid::default();
    let truth_c = CurveSample::from_fn(grid, |p| 5.0 + p.sin());
    let est_c = CurveSample::from_fn(grid, |p| 5.2 + 0.9 * p.sin() + 0.1 * (3.0 * p).cos());
    let w = CurveSample::from_fn(grid, |p| 1.0 + 0.8 * p.cos());
    let base = wimre(&est_c, &truth_c, &w).map_err(err)?;
    let times = |c: &CurveSample, k: f64| CurveSample::new(grid, c.values().iter().map(|v| v * k).collect());
    let mut worst = 0.0f64;
    for k in [1e-3, 0.7, 42.0] {
        let a = wimre(&times(&est_c, k).map_err(err)?, &times(&truth_c, k).map_err(err)?, &w).map_err(err)?;
        let b = wimre(&est_c, &truth_c, &times(&w, k).map_err(err)?).map_err(err)?;
        worst = worst.max((a - base).abs()).max((b - base).abs());
    }
    check("wimre rescaling", worst < 1e-12, format!("max change {worst:.2e}"));

    // determinism
    let samples = truth_sample(&truth, 3000, 5, 44).map_err(err)?;
    let json = |s: &[WindSample]| bwhr_fit(s, &BwhrConfig::default()).map(|m| m.to_json());
    let fit_same = json(&samples).map_err(err)? == json(&samples).map_err(err)?;
    let study_csv = || -> Result<Vec<u8>, String> {
        let pair = TruthPair {
            location: "m".into(),
            present: truth.clone(),
            future: Some(truth.scaled(1.1).map_err(err)?),
        };
        let config = StudyConfig {
            n: 2000,
            replicates: 3,
            seed: 3,
            ..Default::default()
        };
        let out = run_study(&pair, &config).map_err(err)?;
        let mut buf = Vec::new();
        write_study_records(&mut buf, &out.records).map_err(err)?;
        Ok(buf)
    };
    let study_same = study_csv()? == study_csv()?;
    let data = BlockedDataset::from_samples(samples).map_err(err)?;
    let band = || quantile_band(&data, 0.75, &CurveSettings::default(), 30, 0.9, 6).map(|b| (b.lower, b.upper));
    let band_same = band().map_err(err)? == band().map_err(err)?;
    check(
        "determinism",
        fit_same && study_same && band_same,
        format!("fit {fit_same}, study {study_same}, bootstrap {band_same}"),
    );

    Ok((
        failed.is_empty(),
        if failed.is_empty() {
            "all suites".into()
        } else {
            failed.join(", ")
        },
    ))
}

fn main() {
    let criteria = [
        Criterion {
            id: "1",
            name: "estimator ordering",
            run: estimator_ordering,
        },
        Criterion {
            id: "2",
            name: "direction density quality",
            run: density_quality,
        },
        Criterion {
            id: "3",
            name: "bwhr synthetic recovery",
            run: bwhr_recovery,
        },
        Criterion {
            id: "4",
            name: "oracle vs rayleigh",
            run: oracle_rayleigh,
        },
        Criterion {
            id: "5",
            name: "bootstrap coverage",
            run: bootstrap_coverage,
        },
        Criterion {
            id: "6",
            name: "null difference",
            run: null_difference,
        },
        Criterion {
            id: "7",
            name: "invariant suites",
            run: invariants,
        },
    ];
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut shared = Shared::default();
    let mut failures = 0;
    for c in &criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == c.id) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match (c.run)(&mut shared) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} [{}] {}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
