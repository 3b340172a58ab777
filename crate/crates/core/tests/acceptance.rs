//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single `criterion N ... PASS|FAIL` line straight to stderr (bypassing the
//! harness capture) together with its wall time.
//!
//! Monte Carlo criteria use seed 42. Wall-time budgets are reported, not
//! asserted: they assume a multi-core desktop.

use std::io::Write;
use std::time::{Duration, Instant};

use dyadic_core::crossval::{self, defaults, EnergyOptions, ExperimentReport};
use dyadic_core::ctmc;
use dyadic_core::{
    build_q_matrix, solve_forward, stationary_second_moments, truncated_stationary, ModelParams, MomentVector,
    TruncationSpec,
};

const SEED: u64 = 42;

struct Outcome {
    criterion: u32,
    title: &'static str,
    budget: Duration,
    started: Instant,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn start(criterion: u32, title: &'static str, budget_secs: u64) -> Self {
        Self {
            criterion,
            title,
            budget: Duration::from_secs(budget_secs),
            started: Instant::now(),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn absorb(&mut self, report: &ExperimentReport) {
        for m in report.failures() {
            self.failures.push(format!(
                "[{}] {}: value {:e}, reference {:e}, tolerance {:e} ({:?})",
                report.name, m.label, m.value, m.reference, m.tolerance, m.comparison
            ));
        }
        if report.metrics.is_empty() {
            self.failures.push(format!("[{}] no metrics", report.name));
        }
        for w in &report.warnings {
            self.notes.push(format!("[{}] {w}", report.name));
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn rel(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let rel = (got - want).abs() / want.abs();
        self.check(rel <= tol, format!("{label}: {got:e} vs {want:e}, relative error {rel:.3e} > {tol:e}"));
    }

    fn finish(self) {
        let elapsed = self.started.elapsed();
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let over = if elapsed > self.budget {
            format!(" (over the {:?} budget)", self.budget)
        } else {
            String::new()
        };
        let mut err = std::io::stderr().lock();
        let _ = writeln!(
            err,
            "criterion {:>2} {:<40} {verdict}  {:.2?}{over}",
            self.criterion, self.title, elapsed
        );
        for n in &self.notes {
            let _ = writeln!(err, "    note: {n}");
        }
        for f in &self.failures {
            let _ = writeln!(err, "    fail: {f}");
        }
        drop(err);
        assert!(self.failures.is_empty(), "criterion {} failed:\n{}", self.criterion, self.failures.join("\n"));
    }
}

fn run(out: &mut Outcome, report: dyadic_core::Result<ExperimentReport>) -> Option<ExperimentReport> {
    match report {
        Ok(r) => {
            out.absorb(&r);
            Some(r)
        }
        Err(e) => {
            out.failures.push(format!("experiment error: {e}"));
            None
        }
    }
}

#[test]
fn criterion_01_closed_form_oracles() {
    let mut out = Outcome::start(1, "closed-form oracles", 1);
    run(&mut out, crossval::closed_form_oracles());

    let p = ModelParams::new(2.0, 1.0).unwrap();
    let s = stationary_second_moments(&p, 2).unwrap();
    out.rel("s_1", s.mode(1), 1.0 / 3.0, 1e-12);
    out.rel("s_2", s.mode(2), 1.0 / 12.0, 1e-12);
    out.rel("E_1(T_1)", ctmc::expected_occupation(1, 1, &p).unwrap(), 1.0 / 3.0, 1e-12);
    out.rel("pi_31", ctmc::never_visit_probability(3, 1, &p).unwrap(), 15.0 / 16.0, 1e-12);
    out.rel("theta", ctmc::jump_up_probability(3, &p).unwrap(), 0.8, 1e-12);
    // (lambda^2 - 1)^3 / lambda^4 = 27/16 at lambda = 2
    let threshold = std::f64::consts::LN_2 * 16.0 / 27.0;
    out.rel("threshold", ctmc::survival_threshold(&p), threshold, 1e-12);
    out.rel("bound(1)", ctmc::survival_upper_bound(1.0, &p).unwrap(), 1.0 / (27.0f64 / 16.0).exp_m1(), 1e-12);
    out.notes.push(format!("threshold = {threshold:.10}, bound(1) = {:.10}", 1.0 / (27.0f64 / 16.0).exp_m1()));
    out.finish();
}

#[test]
fn criterion_02_galerkin_energy_law() {
    let mut out = Outcome::start(2, "Galerkin energy law", 30);
    let opts = EnergyOptions::default();
    out.check(
        opts.lambda == 2.0 && opts.n_modes == 12 && opts.t_final == 0.25 && opts.n_paths == 10_000,
        "energy options drifted from lambda 2, N 12, t 0.25, 1e4 paths",
    );
    if let Some(r) = run(&mut out, crossval::energy_law(&opts, SEED)) {
        // sigma^2 t with sigma = 1, t = 0.25
        let mean = r.metrics.iter().find(|m| m.label.contains("sigma^2 t"));
        match mean {
            Some(m) => out.rel("energy reference", m.reference, 0.25, 1e-15),
            None => out.check(false, "no mean-energy metric"),
        }
    }
    out.finish();
}

#[test]
fn criterion_03_chain_vs_closed_forms() {
    let mut out = Outcome::start(3, "CTMC vs closed forms", 60);
    if let Some(r) = run(&mut out, defaults::chain_oracles(SEED)) {
        let life = r.metrics.iter().find(|m| m.label == "E_1(tau)");
        match life {
            Some(m) => out.rel("E_1(tau) reference", m.reference, 4.0 / 9.0, 1e-15),
            None => out.check(false, "no lifetime metric"),
        }
        let grid = r.metrics.iter().filter(|m| m.label.starts_with("E_") && m.label.contains("(T_")).count();
        out.check(grid == 36, format!("expected a 6x6 occupation grid, got {grid} entries"));
        let laws = r.metrics.iter().filter(|m| m.label.contains("var/mean^2")).count();
        out.check(laws == 4, format!("expected exponentiality checks for j <= 4, got {laws}"));
    }
    out.finish();
}

#[test]
fn criterion_04_survival_chain() {
    let mut out = Outcome::start(4, "survival of the chain", 60);
    run(&mut out, defaults::survival(SEED));
    // the N = 40 absorbing mass at t = 1, against a 60-digit reference
    let p = ModelParams::new(2.0, 0.0).unwrap();
    let q = build_q_matrix(&p, &TruncationSpec::absorbing(40).unwrap()).unwrap();
    let sol = solve_forward(&q, &MomentVector::unit(40, 1).unwrap(), 0.0, 1.0, 4).unwrap();
    out.rel("sum u(1), N = 40", sol.last().total(), 0.080_302_961_553_715_087, 1e-12);
    out.check(
        sol.last().total() <= 1.0 / (27.0f64 / 16.0).exp_m1(),
        "forward survival mass exceeds the closed-form bound",
    );
    out.finish();
}

#[test]
fn criterion_05_moment_representation() {
    let mut out = Outcome::start(5, "moment representation (SDE/ODE/CTMC)", 120);
    // forward solve against a 60-digit reference first
    let want = [
        0.45582971120535015,
        0.13425823608539069,
        0.034790770384304782,
        0.0087735551934932974,
        0.002198116203933294,
        0.00054982284032882693,
        0.00013747259355135916,
    ];
    let p = ModelParams::new(2.0, 0.0).unwrap();
    let q = build_q_matrix(&p, &TruncationSpec::absorbing(14).unwrap()).unwrap();
    let sol = solve_forward(&q, &MomentVector::unit(14, 1).unwrap(), 0.0, 0.25, 1).unwrap();
    for (j, w) in want.iter().enumerate() {
        out.rel(&format!("u_{}(0.25)", j + 1), sol.last().mode(j + 1), *w, 1e-9);
    }
    run(&mut out, defaults::representation(SEED));
    out.finish();
}

#[test]
fn criterion_06_anomalous_dissipation() {
    let mut out = Outcome::start(6, "anomalous dissipation dichotomy", 30);
    if let Some(r) = run(&mut out, defaults::dissipation(SEED)) {
        let below = r.metrics.iter().any(|m| m.comparison == crossval::Comparison::StrictlyBelow);
        out.check(below, "no strict energy-loss metric");
    }
    out.finish();
}

#[test]
fn criterion_07_h_minus_one_monotonicity() {
    let mut out = Outcome::start(7, "H^-1 monotonicity", 10);
    run(&mut out, defaults::h_minus_one(SEED));
    out.finish();
}

#[test]
fn criterion_08_invariant_convergence() {
    let mut out = Outcome::start(8, "invariant convergence", 10);
    run(&mut out, defaults::invariant());
    // the truncated stationary solution against the untruncated moments
    let p = ModelParams::new(2.0, 1.0).unwrap();
    let q = build_q_matrix(&p, &TruncationSpec::absorbing(16).unwrap()).unwrap();
    let s = truncated_stationary(&q, 1.0).unwrap();
    for n in 1..=8 {
        let exact = 4f64.powi(-(n as i32)) / 0.75;
        out.rel(&format!("stationary s_{n}"), s.mode(n), exact, 1e-3);
    }
    out.finish();
}

#[test]
fn criterion_09_contraction_coupling() {
    let mut out = Outcome::start(9, "contraction / coupling", 60);
    run(&mut out, defaults::contraction(SEED));
    out.finish();
}

#[test]
fn criterion_10_regularity_bound() {
    let mut out = Outcome::start(10, "regularity bound behaviour", 1);
    if let Some(r) = run(&mut out, defaults::regularity()) {
        let divergent = r.metrics.iter().filter(|m| m.label.contains("beta=1 ")).count();
        out.check(divergent == 3, format!("expected a beta = 1 divergence check per alpha, got {divergent}"));
    }
    out.finish();
}
