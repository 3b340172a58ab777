//! The minimal jump process attached to the moment generator: nearest
//! neighbour jumps on `{1, 2, ...}` with exponential clocks, plus the closed
//! forms for its occupation times, hitting probabilities and lifetime.
//!
//! The chain climbs with probability `theta = 1 / (1 + lambda^-2) > 1/2` and
//! its holding means shrink geometrically, so it explodes in finite time.
//! Simulation stops at a cap state `M`, treated as explosion; the remaining
//! lifetime from `M` has mean [`expected_lifetime`]`(M)`, which is both the
//! tail added to censored explosion times and the scale of the bias bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::noise::{key_hash, ChainStream};
use crate::stats::{MeanEstimate, Proportion, Z95};

/// Jumps allowed per path before giving up.
pub const JUMP_LIMIT: u64 = 1_000_000_000;
/// Default cap state.
pub const DEFAULT_CAP: u32 = 40;

/// One path of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPath {
    pub start_state: u32,
    /// Visited states in order, starting with `start_state`.
    pub visit_states: Vec<u32>,
    /// Holding time of each visit; the last one is cut at the horizon when
    /// the path survives.
    pub holding_times: Vec<f64>,
    /// `occupation[j - 1]` is the total time spent in state `j`, for `j` up to
    /// the largest state visited.
    pub occupation: Vec<f64>,
    pub exploded: bool,
    /// Time of reaching the cap plus the expected remaining lifetime.
    pub explosion_time: Option<f64>,
    pub censored_at_cap: bool,
}

impl ChainPath {
    /// Total time spent in `j` (zero for states never visited).
    pub fn occupation_of(&self, j: u32) -> f64 {
        self.occupation.get(j as usize - 1).copied().unwrap_or(0.0)
    }

    pub fn visited(&self, j: u32) -> bool {
        (j as usize) <= self.occupation.len() && self.visit_states.contains(&j)
    }

    /// Time covered by the simulated holding times.
    pub fn elapsed(&self) -> f64 {
        self.holding_times.iter().sum()
    }

    /// State at time `t` if the path is still alive then. Only meaningful
    /// for `t` up to the simulation horizon.
    pub fn state_at(&self, t: f64) -> Option<u32> {
        let mut clock = 0.0;
        for (&s, &h) in self.visit_states.iter().zip(&self.holding_times) {
            clock += h;
            if t < clock {
                return Some(s);
            }
        }
        if self.exploded {
            None
        } else {
            self.visit_states.last().copied()
        }
    }
}

/// Monte Carlo estimate of `P_i(tau > t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub t: f64,
    pub point: f64,
    /// Half-width of the 95% Wilson interval.
    pub half_width: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_paths: usize,
    /// Upper bound on the bias from treating the cap as explosion.
    pub cap_bias_bound: f64,
}

impl SurvivalEstimate {
    fn from_proportion(t: f64, p: &Proportion, bias: f64) -> Self {
        Self {
            t,
            point: p.point,
            half_width: p.half_width(),
            ci_low: p.low,
            ci_high: p.high,
            n_paths: p.trials as usize,
            cap_bias_bound: bias,
        }
    }

    /// Binomial standard error of the point estimate.
    pub fn se(&self) -> f64 {
        (self.point * (1.0 - self.point) / self.n_paths as f64).sqrt()
    }
}

fn check_state(name: &'static str, j: u32) -> Result<()> {
    if j == 0 {
        Err(Error::invalid(name, "states are numbered from 1"))
    } else {
        Ok(())
    }
}

/// Probability of jumping up from `j`: 1 at `j = 1`, `theta` above.
pub fn jump_up_probability(j: u32, params: &ModelParams) -> Result<f64> {
    check_state("j", j)?;
    Ok(if j == 1 {
        1.0
    } else {
        1.0 / (1.0 + params.inv_lambda_sq())
    })
}

/// `-Pi_{jj}`: `k_1^2` at `j = 1`, `k_{j-1}^2 + k_j^2` above.
pub fn holding_rate(j: u32, params: &ModelParams) -> Result<f64> {
    check_state("j", j)?;
    let kj = params.k2(j)?;
    Ok(if j == 1 { kj } else { params.k2(j - 1)? + kj })
}

/// `lambda^{-2m}` without overflow for large `m`.
fn inv_pow(params: &ModelParams, m: u32) -> f64 {
    (-2.0 * m as f64 * params.lambda().ln()).exp()
}

/// Probability that the chain started at `i` never visits `j`:
/// `1 - lambda^{-2 (i - j)}` below the start, 0 otherwise.
pub fn never_visit_probability(i: u32, j: u32, params: &ModelParams) -> Result<f64> {
    check_state("i", i)?;
    check_state("j", j)?;
    if i <= j {
        return Ok(0.0);
    }
    Ok(-(-2.0 * (i - j) as f64 * params.lambda().ln()).exp_m1())
}

/// `E_i(T_j) = lambda^{-2 max(i, j)} / (1 - lambda^{-2})`.
pub fn expected_occupation(i: u32, j: u32, params: &ModelParams) -> Result<f64> {
    check_state("i", i)?;
    check_state("j", j)?;
    Ok(inv_pow(params, i.max(j)) / (1.0 - params.inv_lambda_sq()))
}

/// Mean explosion time from `i`, `sum_j E_i(T_j)`.
pub fn expected_lifetime(i: u32, params: &ModelParams) -> Result<f64> {
    check_state("i", i)?;
    let r = params.inv_lambda_sq();
    Ok(inv_pow(params, i) * ((i - 1) as f64 + 1.0 / (1.0 - r)) / (1.0 - r))
}

/// Bound on `|P(path alive at t) - P_i(tau > t)|` from stopping at `cap`.
///
/// The two differ only when the cap is hit before `t` and the true lifetime
/// exceeds `t`. The remaining lifetime `R` is independent of the hitting time,
/// whose density is at most the first holding rate, so the error is at most
/// `holding_rate(i) E[R]`.
pub fn cap_bias_bound(i: u32, cap: u32, params: &ModelParams) -> Result<f64> {
    Ok(holding_rate(i, params)? * expected_lifetime(cap, params)?)
}

/// `(exp((lambda^2 - 1)^3 t / lambda^4) - 1)^{-1}`.
pub fn survival_upper_bound(t: f64, params: &ModelParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("must be positive, got {t}")));
    }
    let l2 = params.lambda() * params.lambda();
    let c = (l2 - 1.0).powi(3) / (l2 * l2);
    Ok(1.0 / (c * t).exp_m1())
}

/// Time after which [`survival_upper_bound`] drops below 1.
pub fn survival_threshold(params: &ModelParams) -> f64 {
    let l2 = params.lambda() * params.lambda();
    std::f64::consts::LN_2 * l2 * l2 / (l2 - 1.0).powi(3)
}

/// Simulate one path from `i0` until `horizon` (may be infinite) or until it
/// reaches `cap`.
pub fn simulate_chain(
    i0: u32,
    horizon: f64,
    cap: u32,
    seed: u64,
    path_index: u64,
    params: &ModelParams,
) -> Result<ChainPath> {
    check_state("i0", i0)?;
    if cap <= i0 {
        return Err(Error::invalid("cap", format!("cap {cap} must exceed the start state {i0}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", format!("must be positive, got {horizon}")));
    }
    let rates: Vec<f64> = (1..=cap).map(|j| holding_rate(j, params)).collect::<Result<_>>()?;
    let theta = jump_up_probability(2, params)?;
    let tail = expected_lifetime(cap, params)?;
    let mut stream = ChainStream::new(seed, path_index);

    let mut visit_states = vec![i0];
    let mut holding_times = Vec::new();
    let mut occupation = vec![0.0; i0 as usize];
    let mut state = i0;
    let mut clock = 0.0;
    let mut jumps = 0u64;
    loop {
        let hold = stream.exp1() / rates[state as usize - 1];
        if clock + hold >= horizon {
            let cut = horizon - clock;
            holding_times.push(cut);
            occupation[state as usize - 1] += cut;
            return Ok(ChainPath {
                start_state: i0,
                visit_states,
                holding_times,
                occupation,
                exploded: false,
                explosion_time: None,
                censored_at_cap: false,
            });
        }
        clock += hold;
        holding_times.push(hold);
        occupation[state as usize - 1] += hold;
        jumps += 1;
        if jumps >= JUMP_LIMIT {
            return Err(Error::SafetyLimit(format!(
                "chain from {i0} made {JUMP_LIMIT} jumps without reaching the cap {cap}"
            )));
        }
        let up = state == 1 || stream.uniform() < theta;
        state = if up { state + 1 } else { state - 1 };
        if state == cap {
            return Ok(ChainPath {
                start_state: i0,
                visit_states,
                holding_times,
                occupation,
                exploded: true,
                explosion_time: Some(clock + tail),
                censored_at_cap: true,
            });
        }
        visit_states.push(state);
        if occupation.len() < state as usize {
            occupation.push(0.0);
        }
    }
}

/// Independent seed for a family of runs sharing `seed`.
fn subseed(seed: u64, tag: u64, i: u32) -> u64 {
    key_hash(&[seed, tag, i as u64])
}

fn check_paths(n_paths: usize, min: usize) -> Result<()> {
    if n_paths < min {
        return Err(Error::invalid("n_paths", format!("need at least {min} paths, got {n_paths}")));
    }
    Ok(())
}

fn run_paths<T: Send>(
    i0: u32,
    horizon: f64,
    cap: u32,
    seed: u64,
    n_paths: usize,
    params: &ModelParams,
    f: impl Fn(ChainPath) -> T + Sync,
) -> Result<Vec<T>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_chain(i0, horizon, cap, seed, p, params).map(&f))
        .collect()
}

fn warn_bias(est: &SurvivalEstimate) {
    if est.cap_bias_bound > 0.1 * est.half_width {
        log::warn!(
            "cap censoring bias bound {:e} exceeds a tenth of the CI half-width {:e}",
            est.cap_bias_bound,
            est.half_width
        );
    }
}

/// Estimate `P_{i0}(tau > t)` for each `t` in `times` from one set of paths,
/// so the estimates are nonincreasing in `t` path by path.
pub fn estimate_survival_grid(
    i0: u32,
    times: &[f64],
    params: &ModelParams,
    n_paths: usize,
    seed: u64,
    cap: u32,
) -> Result<Vec<SurvivalEstimate>> {
    check_paths(n_paths, 100)?;
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::invalid("t", "survival times must be finite and nonnegative"));
    }
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    if horizon == 0.0 {
        let p = Proportion::wilson(n_paths as u64, n_paths as u64, Z95);
        return Ok(times.iter().map(|&t| SurvivalEstimate::from_proportion(t, &p, 0.0)).collect());
    }
    let bias = cap_bias_bound(i0, cap, params)?;
    let deaths = run_paths(i0, horizon, cap, seed, n_paths, params, |path| {
        if path.exploded {
            Some(path.elapsed())
        } else {
            None
        }
    })?;
    let out: Vec<SurvivalEstimate> = times
        .iter()
        .map(|&t| {
            let alive = deaths.iter().filter(|d| d.is_none_or(|d| d > t)).count() as u64;
            let p = Proportion::wilson(alive, n_paths as u64, Z95);
            SurvivalEstimate::from_proportion(t, &p, bias)
        })
        .collect();
    out.iter().for_each(warn_bias);
    Ok(out)
}

/// Estimate `P_{i0}(tau > t)`: the fraction of paths not capped by `t`.
pub fn estimate_survival(
    i0: u32,
    t: f64,
    params: &ModelParams,
    n_paths: usize,
    seed: u64,
    cap: u32,
) -> Result<SurvivalEstimate> {
    Ok(estimate_survival_grid(i0, &[t], params, n_paths, seed, cap)?.remove(0))
}

/// Estimates of `f_{i,j}(t) = P(xi_t = j | xi_0 = i)` for `j = 1..=max_j`,
/// together with the survival estimate from the same paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub start_state: u32,
    pub t: f64,
    /// `entries[j - 1]` estimates `f_{i,j}(t)`.
    pub entries: Vec<Proportion>,
    pub survival: SurvivalEstimate,
}

/// Estimate the row `f_{i, 1..=max_j}(t)` from one set of paths.
pub fn estimate_transition_row(
    i: u32,
    max_j: u32,
    t: f64,
    params: &ModelParams,
    n_paths: usize,
    seed: u64,
    cap: u32,
) -> Result<TransitionRow> {
    check_paths(n_paths, 100)?;
    check_state("j", max_j)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid("t", format!("must be positive and finite, got {t}")));
    }
    let finals = run_paths(i, t, cap, seed, n_paths, params, |path| path.state_at(t))?;
    let n = n_paths as u64;
    let mut counts = vec![0u64; max_j as usize];
    let mut alive = 0u64;
    for s in finals.iter().flatten() {
        alive += 1;
        if *s <= max_j {
            counts[*s as usize - 1] += 1;
        }
    }
    let survival = SurvivalEstimate::from_proportion(
        t,
        &Proportion::wilson(alive, n, Z95),
        cap_bias_bound(i, cap, params)?,
    );
    warn_bias(&survival);
    Ok(TransitionRow {
        start_state: i,
        t,
        entries: counts.into_iter().map(|c| Proportion::wilson(c, n, Z95)).collect(),
        survival,
    })
}

/// Estimate `f_{i,j}(t)` with its Wilson interval.
pub fn estimate_transition(
    i: u32,
    j: u32,
    t: f64,
    params: &ModelParams,
    n_paths: usize,
    seed: u64,
    cap: u32,
) -> Result<Proportion> {
    check_state("j", j)?;
    let row = estimate_transition_row(i, j, t, params, n_paths, seed, cap)?;
    Ok(row.entries[j as usize - 1])
}

/// Sample moments of the occupation time `T_j` from state 1, compared with
/// the exponential law of mean `E_1(T_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationLawReport {
    pub j: u32,
    pub mean: MeanEstimate,
    pub expected_mean: f64,
    pub variance: f64,
    /// `variance / mean^2 - 1`, zero for an exponential law.
    pub diagnostic: f64,
    /// Delta-method standard error of `diagnostic`.
    pub diagnostic_se: f64,
    pub mean_ok: bool,
    pub law_ok: bool,
}

impl OccupationLawReport {
    pub fn passed(&self) -> bool {
        self.mean_ok && self.law_ok
    }
}

/// Check the occupation time of `j` from state 1: mean within 3 SE of the
/// closed form, and the `variance / mean^2 - 1` interval (3 SE) covering 0.
pub fn occupation_law_check(j: u32, params: &ModelParams, n_paths: usize, seed: u64) -> Result<OccupationLawReport> {
    check_state("j", j)?;
    check_paths(n_paths, 100)?;
    let cap = DEFAULT_CAP.max(j + 20);
    let samples = run_paths(1, f64::INFINITY, cap, seed, n_paths, params, |path| path.occupation_of(j))?;
    occupation_law_from_samples(j, &samples, expected_occupation(1, j, params)?)
}

fn occupation_law_from_samples(j: u32, samples: &[f64], expected_mean: f64) -> Result<OccupationLawReport> {
    let n = samples.len() as f64;
    let mean = MeanEstimate::from_samples(samples);
    let sq: Vec<f64> = samples.iter().map(|v| v * v).collect();
    let m1 = mean.mean;
    let m2 = MeanEstimate::from_samples(&sq);
    // var/m1^2 - 1 written as m2/m1^2 - 2 (plug-in, biased by O(1/n))
    let diagnostic = m2.mean / (m1 * m1) - 2.0;
    let g1 = -2.0 * m2.mean / (m1 * m1 * m1);
    let g2 = 1.0 / (m1 * m1);
    let cov = samples
        .iter()
        .zip(&sq)
        .map(|(a, b)| (a - m1) * (b - m2.mean))
        .sum::<f64>()
        / (n - 1.0);
    let var1 = mean.variance();
    let var2 = m2.variance();
    let diagnostic_se = ((g1 * g1 * var1 + 2.0 * g1 * g2 * cov + g2 * g2 * var2) / n).sqrt();
    let variance = var1;
    Ok(OccupationLawReport {
        j,
        mean,
        expected_mean,
        variance,
        diagnostic,
        diagnostic_se,
        mean_ok: mean.covers(expected_mean, 3.0, 0.0),
        law_ok: diagnostic.abs() <= 3.0 * diagnostic_se,
    })
}

/// Monte Carlo occupation means and never-visit frequencies on the grid
/// `1..=max_i` by `1..=max_j`, plus explosion-time means per start state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationGrid {
    /// `occupation[i - 1][j - 1]` estimates `E_i(T_j)`.
    pub occupation: Vec<Vec<MeanEstimate>>,
    /// `never_visit[i - 1][j - 1]` estimates `pi_{i,j}`.
    pub never_visit: Vec<Vec<Proportion>>,
    /// `lifetime[i - 1]` estimates `E_i(tau)`.
    pub lifetime: Vec<MeanEstimate>,
}

/// Run `n_paths` unbounded paths from every start state `1..=max_i`.
pub fn occupation_grid(max_i: u32, max_j: u32, params: &ModelParams, n_paths: usize, seed: u64) -> Result<OccupationGrid> {
    check_state("max_i", max_i)?;
    check_state("max_j", max_j)?;
    check_paths(n_paths, 2)?;
    let cap = DEFAULT_CAP.max(max_i.max(max_j) + 20);
    let mut occupation = Vec::new();
    let mut never_visit = Vec::new();
    let mut lifetime = Vec::new();
    for i in 1..=max_i {
        let rows = run_paths(i, f64::INFINITY, cap, subseed(seed, 0x6f63, i), n_paths, params, |path| {
            let occ: Vec<f64> = (1..=max_j).map(|j| path.occupation_of(j)).collect();
            (occ, path.explosion_time.unwrap_or(f64::NAN))
        })?;
        let mut column = vec![0.0; n_paths];
        let mut occ_row = Vec::new();
        let mut nv_row = Vec::new();
        for j in 0..max_j as usize {
            for (c, r) in column.iter_mut().zip(&rows) {
                *c = r.0[j];
            }
            occ_row.push(MeanEstimate::from_samples(&column));
            let missed = column.iter().filter(|v| **v == 0.0).count() as u64;
            nv_row.push(Proportion::wilson(missed, n_paths as u64, Z95));
        }
        for (c, r) in column.iter_mut().zip(&rows) {
            *c = r.1;
        }
        lifetime.push(MeanEstimate::from_samples(&column));
        occupation.push(occ_row);
        never_visit.push(nv_row);
    }
    Ok(OccupationGrid {
        occupation,
        never_visit,
        lifetime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two() -> ModelParams {
        ModelParams::new(2.0, 1.0).unwrap()
    }

    #[test]
    fn closed_forms_at_lambda_two() {
        let p = two();
        assert_eq!(jump_up_probability(1, &p).unwrap(), 1.0);
        assert_relative_eq!(jump_up_probability(5, &p).unwrap(), 0.8, max_relative = 1e-15);
        assert_eq!(holding_rate(1, &p).unwrap(), 4.0);
        assert_eq!(holding_rate(2, &p).unwrap(), 20.0);
        assert_eq!(never_visit_probability(2, 5, &p).unwrap(), 0.0);
        assert_eq!(never_visit_probability(4, 4, &p).unwrap(), 0.0);
        assert_relative_eq!(never_visit_probability(3, 1, &p).unwrap(), 15.0 / 16.0, max_relative = 1e-15);
        assert_relative_eq!(expected_occupation(1, 1, &p).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(expected_occupation(2, 1, &p).unwrap(), 1.0 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(expected_lifetime(1, &p).unwrap(), 4.0 / 9.0, max_relative = 1e-15);
    }

    #[test]
    fn lifetime_is_row_sum_of_occupations() {
        let p = ModelParams::new(1.7, 0.0).unwrap();
        for i in 1..6 {
            let direct: f64 = (1..400).map(|j| expected_occupation(i, j, &p).unwrap()).sum();
            assert_relative_eq!(expected_lifetime(i, &p).unwrap(), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn bound_and_threshold() {
        let p = two();
        assert_relative_eq!(survival_threshold(&p), 0.410_753_884_776_264, max_relative = 1e-12);
        assert_relative_eq!(survival_upper_bound(survival_threshold(&p), &p).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(survival_upper_bound(1.0, &p).unwrap(), 0.226_965_862_970_815, max_relative = 1e-12);
        assert!(survival_upper_bound(0.0, &p).is_err());
        assert!(survival_upper_bound(50.0, &p).unwrap() < 1e-30);
    }

    #[test]
    fn tiny_horizon_keeps_start_state() {
        let path = simulate_chain(3, 1e-12, 40, 1, 0, &two()).unwrap();
        assert_eq!(path.visit_states, vec![3]);
        assert!(!path.exploded);
        assert!(path.occupation_of(3) <= 1e-12);
    }

    #[test]
    fn path_structure() {
        let p = two();
        for k in 0..200 {
            let path = simulate_chain(1, f64::INFINITY, 30, 9, k, &p).unwrap();
            assert!(path.exploded && path.censored_at_cap);
            for w in path.visit_states.windows(2) {
                assert_eq!((w[0] as i64 - w[1] as i64).abs(), 1);
                if w[0] == 1 {
                    assert_eq!(w[1], 2);
                }
            }
            for j in 1..=path.occupation.len() as u32 {
                let from_visits: f64 = path
                    .visit_states
                    .iter()
                    .zip(&path.holding_times)
                    .filter(|(s, _)| **s == j)
                    .map(|(_, h)| h)
                    .sum();
                assert!((from_visits - path.occupation_of(j)).abs() <= 1e-12);
            }
            let t = path.explosion_time.unwrap();
            let tail = expected_lifetime(30, &p).unwrap();
            assert_relative_eq!(t, path.elapsed() + tail, max_relative = 1e-14);
        }
    }

    #[test]
    fn bad_arguments() {
        let p = two();
        assert!(simulate_chain(0, 1.0, 40, 0, 0, &p).is_err());
        assert!(simulate_chain(5, 1.0, 5, 0, 0, &p).is_err());
        assert!(simulate_chain(1, 0.0, 40, 0, 0, &p).is_err());
        assert!(estimate_survival(1, 1.0, &p, 99, 0, 40).is_err());
        assert!(expected_occupation(0, 1, &p).is_err());
    }

    #[test]
    fn estimates_are_reproducible() {
        let p = two();
        let a = estimate_survival(1, 0.3, &p, 500, 11, 40).unwrap();
        let b = estimate_survival(1, 0.3, &p, 500, 11, 40).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transition_row_sums_to_survival() {
        let p = two();
        let row = estimate_transition_row(2, 60, 0.2, &p, 2000, 5, 40).unwrap();
        let total: u64 = row.entries.iter().map(|e| e.successes).sum();
        assert_eq!(total, row.survival.point.mul_add(2000.0, 0.0).round() as u64);
    }

    #[test]
    fn exponential_samples_pass_the_law_check() {
        let mut s = ChainStream::new(3, 3);
        let xs: Vec<f64> = (0..20000).map(|_| 0.5 * s.exp1()).collect();
        let r = occupation_law_from_samples(1, &xs, 0.5).unwrap();
        assert!(r.passed(), "{r:?}");
        // a two-point law has variance / mean^2 - 1 = -1 + ...
        let ys: Vec<f64> = (0..20000).map(|k| if k % 2 == 0 { 0.4 } else { 0.6 }).collect();
        let r = occupation_law_from_samples(1, &ys, 0.5).unwrap();
        assert!(r.mean_ok && !r.law_ok);
    }
}
