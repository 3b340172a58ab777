use anyhow::Context;
use dyadic_core::crossval::{self, ExperimentReport, Suite};
use dyadic_core::ctmc::{self, DEFAULT_CAP};
use dyadic_core::galerkin::{run_ensemble, EnsembleOptions};
use dyadic_core::stats::MeanEstimate;
use dyadic_core::{build_q_matrix, solve_forward, stationary_second_moments};
use rayon::prelude::*;

use crate::config::{OutputFormat, RunConfig, Settings};
use crate::output::{format_float, Records, RunOutput};
use crate::{spec, UsageError, VerificationFailed};

pub enum OracleQuery {
    Stationary,
    Occupation(u32, u32),
    Pi(u32, u32),
    SurvivalBound(f64),
}

fn usage<E: std::fmt::Display>(e: E) -> UsageError {
    UsageError(e.to_string())
}

/// Closed forms go to stdout; nothing is written to disk.
pub fn oracle(s: &Settings, query: OracleQuery) -> anyhow::Result<()> {
    let params = s.params()?;
    let r = match query {
        OracleQuery::Stationary => {
            let n = s.n_modes.unwrap_or(crate::config::DEFAULT_N_MODES);
            if n == 0 {
                return Err(UsageError("--n must be positive".into()).into());
            }
            let st = stationary_second_moments(&params, n)?;
            let mut r = Records::new("stationary", &["n", "s_n"]);
            for m in 1..=n {
                r.push(vec![m.into(), st.mode(m).into()]);
            }
            r
        }
        OracleQuery::Occupation(i, j) => {
            let mut r = Records::new("occupation", &["i", "j", "expected_occupation"]);
            r.push(vec![i.into(), j.into(), ctmc::expected_occupation(i, j, &params).map_err(usage)?.into()]);
            r
        }
        OracleQuery::Pi(i, j) => {
            let mut r = Records::new("never_visit", &["i", "j", "pi"]);
            r.push(vec![i.into(), j.into(), ctmc::never_visit_probability(i, j, &params).map_err(usage)?.into()]);
            r
        }
        OracleQuery::SurvivalBound(t) => {
            let mut r = Records::new("survival_bound", &["t", "upper_bound", "threshold"]);
            let bound = ctmc::survival_upper_bound(t, &params)?;
            r.push(vec![t.into(), bound.into(), ctmc::survival_threshold(&params).into()]);
            r
        }
    };
    print!("{}", r.render(s.output_format()));
    Ok(())
}

fn announce(out: &std::path::Path, manifest: &std::path::Path) {
    println!("wrote {} (manifest {})", out.display(), manifest.display());
}

pub fn simulate_sde(s: &Settings) -> anyhow::Result<()> {
    let params = s.params()?;
    let trunc = s.truncation()?;
    let scheme = s.scheme_spec(&params, &trunc)?;
    scheme.check_stability(&params, &trunc)?;
    let x0 = s.x0.clone().unwrap_or_else(|| "e1".into());
    let init = spec::initial_law(&x0, trunc.n_modes(), &params)?;
    let n_paths = s.paths.unwrap_or(1000);
    let seed = s.seed();
    let richardson = s.richardson.unwrap_or(false);
    let options = if richardson {
        EnsembleOptions::richardson()
    } else {
        EnsembleOptions::default()
    };
    let stats = run_ensemble(&init, &params, &trunc, &scheme, n_paths, seed, options)?;

    let mut moments = Records::new("ensemble", &["time", "n", "mean_sq", "stderr"]);
    let mut energy = Records::new("energy", &["time", "mean_energy", "stderr"]);
    for (k, &t) in stats.sample_times.iter().enumerate() {
        for n in 1..=trunc.n_modes() {
            let m = stats.moment(k, n);
            moments.push(vec![t.into(), n.into(), m.mean.into(), m.se.into()]);
        }
        energy.push(vec![t.into(), stats.mean_energy[k].into(), stats.energy_se[k].into()]);
    }

    let dir = s.out_dir();
    let mut out = RunOutput::create(&dir, s.output_format())?;
    out.write_records(&moments)?;
    out.write_records(&energy)?;
    let resolved = Settings {
        lambda: Some(params.lambda()),
        sigma: Some(params.sigma()),
        n_modes: Some(trunc.n_modes()),
        boundary: Some(trunc.boundary()),
        scheme: Some(scheme.kind),
        dt: Some(scheme.dt),
        t_final: Some(scheme.t_final),
        samples: Some(scheme.samples),
        refinement: Some(scheme.refinement),
        forcing_order: Some(scheme.forcing_order),
        richardson: Some(richardson),
        paths: Some(n_paths),
        seed: Some(seed),
        x0: Some(x0),
        out: Some(dir.clone()),
        format: Some(s.output_format()),
        ..Settings::default()
    };
    let run = RunConfig {
        params: Some(params),
        trunc: Some(trunc),
        scheme: Some(scheme),
        seed,
        n_paths: Some(n_paths),
        output_dir: dir.clone(),
        output_format: s.output_format(),
    };
    let manifest = out.finish("simulate-sde", &run, &resolved)?;
    println!(
        "{n_paths} paths, final mean energy {} +- {}; largest energy-identity residual {}",
        format_float(*stats.mean_energy.last().expect("sample")),
        format_float(*stats.energy_se.last().expect("sample")),
        format_float(stats.energy_residual_max)
    );
    announce(&dir, &manifest);
    Ok(())
}

pub fn solve_moments(s: &Settings) -> anyhow::Result<()> {
    let params = s.params()?;
    let trunc = s.truncation()?;
    let u0_spec = s.u0.clone().unwrap_or_else(|| "e1".into());
    let u0 = spec::second_moments(&u0_spec, trunc.n_modes(), &params)?;
    let t_final = s.t_final.unwrap_or(1.0);
    let checkpoints = s.checkpoints.unwrap_or(10);
    let q = build_q_matrix(&params, &trunc)?;
    let sol = solve_forward(&q, &u0, params.sigma(), t_final, checkpoints)?;

    let mut series = Records::new("moments", &["time", "n", "u_n"]);
    let mut totals = Records::new("totals", &["time", "sum_u"]);
    for (t, u) in sol.times.iter().zip(&sol.states) {
        for n in 1..=u.len() {
            series.push(vec![(*t).into(), n.into(), u.mode(n).into()]);
        }
        totals.push(vec![(*t).into(), u.total().into()]);
    }
    let dir = s.out_dir();
    let mut out = RunOutput::create(&dir, s.output_format())?;
    out.write_records(&series)?;
    out.write_records(&totals)?;
    let resolved = Settings {
        lambda: Some(params.lambda()),
        sigma: Some(params.sigma()),
        n_modes: Some(trunc.n_modes()),
        boundary: Some(trunc.boundary()),
        u0: Some(u0_spec),
        t_final: Some(t_final),
        checkpoints: Some(checkpoints),
        out: Some(dir.clone()),
        format: Some(s.output_format()),
        ..Settings::default()
    };
    let run = RunConfig {
        params: Some(params),
        trunc: Some(trunc),
        scheme: None,
        seed: 0,
        n_paths: None,
        output_dir: dir.clone(),
        output_format: s.output_format(),
    };
    let manifest = out.finish("solve-moments", &run, &resolved)?;
    println!(
        "sum u at t = {}: {} (halved-step self-check {:.1e})",
        format_float(t_final),
        format_float(sol.last().total()),
        sol.self_check
    );
    announce(&dir, &manifest);
    Ok(())
}

pub fn simulate_chain(s: &Settings) -> anyhow::Result<()> {
    let params = s.params()?;
    let start = s.start.unwrap_or(1);
    let horizon = s.horizon.unwrap_or(f64::INFINITY);
    let cap = s.cap.unwrap_or(DEFAULT_CAP);
    let n_paths = s.paths.unwrap_or(10_000);
    let seed = s.seed();
    if start == 0 {
        return Err(UsageError("--start: states are numbered from 1".into()).into());
    }
    if !(horizon > 0.0) {
        return Err(UsageError(format!("--horizon must be positive, got {horizon}")).into());
    }
    let grid = match &s.grid {
        Some(g) => g.clone(),
        None if horizon.is_finite() => (1..=5).map(|k| horizon * k as f64 / 5.0).collect(),
        None => vec![0.25, 0.5, 0.75, 1.0, 1.25],
    };
    if grid.iter().any(|t| !(*t >= 0.0) || *t > horizon) {
        return Err(UsageError(format!("--grid times must lie in [0, horizon = {horizon}]")).into());
    }

    let survival = ctmc::estimate_survival_grid(start, &grid, &params, n_paths, seed, cap)?;
    let mut surv = Records::new("survival", &["t", "point", "ci_low", "ci_high", "upper_bound"]);
    for e in &survival {
        let bound = ctmc::survival_upper_bound(e.t, &params)?;
        surv.push(vec![e.t.into(), e.point.into(), e.ci_low.into(), e.ci_high.into(), bound.into()]);
    }

    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| ctmc::simulate_chain(start, horizon, cap, seed, i, &params))
        .collect::<Result<Vec<_>, _>>()?;
    let mut occ = Records::new("occupation", &["j", "mean", "stderr", "visit_fraction", "closed_form"]);
    for j in 1..=cap {
        let times: Vec<f64> = paths.iter().map(|p| p.occupation_of(j)).collect();
        let est = MeanEstimate::from_samples(&times);
        let visits = paths.iter().filter(|p| p.visited(j)).count() as f64 / n_paths as f64;
        // the closed form counts the whole lifetime
        let closed = if horizon.is_infinite() {
            ctmc::expected_occupation(start, j, &params)?
        } else {
            f64::NAN
        };
        occ.push(vec![j.into(), est.mean.into(), est.se.into(), visits.into(), closed.into()]);
    }
    let exploded: Vec<f64> = paths.iter().filter_map(|p| p.explosion_time).collect();
    let life = MeanEstimate::from_samples(&exploded);
    let mut summary = Records::new(
        "explosion",
        &["paths", "exploded_fraction", "mean_explosion_time", "stderr", "expected_lifetime"],
    );
    summary.push(vec![
        n_paths.into(),
        (exploded.len() as f64 / n_paths as f64).into(),
        life.mean.into(),
        life.se.into(),
        ctmc::expected_lifetime(start, &params)?.into(),
    ]);

    let dir = s.out_dir();
    let mut out = RunOutput::create(&dir, s.output_format())?;
    out.write_records(&surv)?;
    out.write_records(&occ)?;
    out.write_records(&summary)?;
    let resolved = Settings {
        lambda: Some(params.lambda()),
        sigma: Some(params.sigma()),
        start: Some(start),
        horizon: horizon.is_finite().then_some(horizon),
        cap: Some(cap),
        paths: Some(n_paths),
        seed: Some(seed),
        grid: Some(grid),
        out: Some(dir.clone()),
        format: Some(s.output_format()),
        ..Settings::default()
    };
    let run = RunConfig {
        params: Some(params),
        trunc: None,
        scheme: None,
        seed,
        n_paths: Some(n_paths),
        output_dir: dir.clone(),
        output_format: s.output_format(),
    };
    let manifest = out.finish("simulate-chain", &run, &resolved)?;
    for e in &survival {
        println!(
            "P_{start}(tau > {}) = {} [{}, {}]",
            e.t,
            format_float(e.point),
            format_float(e.ci_low),
            format_float(e.ci_high)
        );
    }
    announce(&dir, &manifest);
    Ok(())
}

fn metric_rows(reports: &[ExperimentReport]) -> Records {
    let mut r = Records::new(
        "metrics",
        &["experiment", "metric", "value", "reference", "tolerance", "comparison", "passed"],
    );
    for rep in reports {
        for m in &rep.metrics {
            r.push(vec![
                rep.name.as_str().into(),
                m.label.as_str().into(),
                m.value.into(),
                m.reference.into(),
                m.tolerance.into(),
                format!("{:?}", m.comparison).as_str().into(),
                m.passed.into(),
            ]);
        }
    }
    r
}

pub fn verify(suite: Suite, s: &Settings, write: bool) -> anyhow::Result<()> {
    let seed = s.seed.unwrap_or(42);
    let reports = crossval::run_suite(suite, seed)?;

    let width = reports
        .iter()
        .flat_map(|r| r.metrics.iter().map(|m| m.label.len()))
        .max()
        .unwrap_or(10)
        .min(60);
    let mut failed = 0;
    for rep in &reports {
        println!("== {} ({})", rep.name, if rep.passed() { "PASS" } else { "FAIL" });
        for m in &rep.metrics {
            if !m.passed {
                failed += 1;
            }
            println!(
                "  {:<4} {:<width$}  value {:>24}  reference {:>24}  tol {:>10.3e}",
                if m.passed { "ok" } else { "FAIL" },
                m.label,
                format_float(m.value),
                format_float(m.reference),
                m.tolerance,
            );
        }
        for w in &rep.warnings {
            println!("  note {w}");
        }
    }
    if reports.iter().any(|r| r.metrics.is_empty()) {
        failed += 1;
    }
    let total: usize = reports.iter().map(|r| r.metrics.len()).sum();
    println!("{suite}: {} of {total} metrics passed", total - failed.min(total));

    if write {
        let dir = s.out_dir();
        let mut out = RunOutput::create(&dir, s.output_format())?;
        for rep in &reports {
            out.write_json(&format!("{}.json", rep.name), rep)
                .with_context(|| format!("report {}", rep.name))?;
        }
        if s.output_format() == OutputFormat::Csv {
            out.write_records(&metric_rows(&reports))?;
        }
        let resolved = Settings {
            seed: Some(seed),
            out: Some(dir.clone()),
            format: Some(s.output_format()),
            ..Settings::default()
        };
        let run = RunConfig {
            params: None,
            trunc: None,
            scheme: None,
            seed,
            n_paths: None,
            output_dir: dir.clone(),
            output_format: s.output_format(),
        };
        let manifest = out.finish(&format!("verify {suite}"), &run, &resolved)?;
        announce(&dir, &manifest);
    }
    if failed > 0 {
        return Err(VerificationFailed(failed).into());
    }
    Ok(())
}
