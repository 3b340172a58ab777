use serde::{Deserialize, Serialize};

use super::scheme::{SchemeKind, SchemeSpec, Stepper};
use crate::error::{Error, Result};
use crate::model::{ModelParams, StateVector, TruncationSpec};
use crate::noise::{BrownianPath, LeafScratch};

/// One simulated trajectory, recorded at the sampling times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub sample_times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Left-point sum of `X_1 dW_0` over the whole path.
    pub w0_integral: f64,
    /// The same sum up to each sampling time.
    pub w0_at_samples: Vec<f64>,
    pub seed: u64,
    pub path_index: u64,
}

impl PathRecord {
    /// `||X(t)||^2 - ||x0||^2 - 2 sigma int X_1 dW_0 - sigma^2 t` at every
    /// sampling time. The exact process makes this identically zero.
    pub fn energy_residuals(&self, sigma: f64) -> Vec<f64> {
        let e0 = self.states[0].energy();
        self.states
            .iter()
            .zip(&self.sample_times)
            .zip(&self.w0_at_samples)
            .map(|((x, &t), &w)| x.energy() - e0 - 2.0 * sigma * w - sigma * sigma * t)
            .collect()
    }
}

/// Trajectories from two initial conditions driven by the same noise. The
/// difference is propagated with the unforced step, so it never sees the
/// forcing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledRecord {
    /// Path started from `y`.
    pub base: PathRecord,
    /// `X^x(t) - X^y(t)` at the sampling times.
    pub difference: Vec<StateVector>,
}

impl CoupledRecord {
    /// `X^x = X^y + D` at every sampling time.
    pub fn reconstructed(&self) -> Vec<StateVector> {
        self.base
            .states
            .iter()
            .zip(&self.difference)
            .map(|(b, d)| {
                StateVector::new(b.as_slice().iter().zip(d.as_slice()).map(|(p, q)| p + q).collect())
                    .expect("finite")
            })
            .collect()
    }
}

/// Advance every `(stepper, state)` pair over the scheme's time grid with one
/// shared Brownian path, calling `on_sample` at each sampling time.
///
/// Stepper `i` runs `lags[i]` levels above the finest one, taking the sum of
/// `2^lags[i]` consecutive leaves as its increment. Sampling times must lie
/// on the grid of the coarsest stepper.
pub(crate) fn drive(
    steppers: &mut [Stepper],
    lags: &[u32],
    states: &mut [Vec<f64>],
    scheme: &SchemeSpec,
    brownian: &BrownianPath,
    on_sample: &mut dyn FnMut(usize, f64, &[Vec<f64>], &[f64]),
) -> Result<()> {
    debug_assert_eq!(steppers.len(), lags.len());
    let channels = brownian.channels();
    let rotation = steppers[0].kind() == SchemeKind::RotationSplitting;
    let pairing = u32::from(rotation);
    let depth = scheme.refinement + pairing;
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if max_lag > scheme.refinement {
        return Err(Error::invalid("refinement", "coarse levels need a finer base grid"));
    }
    let period = 1u64 << (max_lag + pairing);
    let targets: Vec<f64> = (0..=scheme.samples)
        .map(|i| scheme.t_final * i as f64 / scheme.samples as f64)
        .collect();
    let mut w0 = vec![0.0; states.len()];
    on_sample(0, 0.0, states, &w0);
    let mut next_target = 1;

    let mut scratch = LeafScratch::default();
    // per stepper: accumulated increment, the pending first half of a
    // rotation step, and how many leaves went into each
    let mut acc = vec![vec![0.0; channels]; steppers.len()];
    let mut pending = vec![vec![0.0; channels]; steppers.len()];
    let mut acc_len = vec![0.0; steppers.len()];
    let mut pending_len = vec![0.0; steppers.len()];
    let mut time = 0.0;
    let mut failure: Option<Error> = None;
    let coarsest_step = scheme.step() * (1u64 << max_lag) as f64;

    for root in 0..brownian.n_root() {
        let root_start = root as f64 * scheme.dt;
        let mut offset = 0.0;
        let mut leaf = 0u64;
        brownian.for_each_leaf(root, depth, &mut scratch, &mut |inc, h| {
            if failure.is_some() {
                return;
            }
            leaf += 1;
            offset += h;
            for (i, st) in steppers.iter_mut().enumerate() {
                let group = 1u64 << lags[i];
                if group == 1 {
                    acc[i].copy_from_slice(inc);
                } else {
                    if (leaf - 1).is_multiple_of(group) {
                        acc[i].iter_mut().for_each(|v| *v = 0.0);
                        acc_len[i] = 0.0;
                    }
                    acc[i].iter_mut().zip(inc).for_each(|(a, b)| *a += b);
                }
                acc_len[i] = if group == 1 { h } else { acc_len[i] + h };
                if !leaf.is_multiple_of(group) {
                    continue;
                }
                let x = &mut states[i];
                let r = if rotation {
                    if (leaf / group) % 2 == 1 {
                        pending[i].copy_from_slice(&acc[i]);
                        pending_len[i] = acc_len[i];
                        continue;
                    }
                    st.rotation(x, &pending[i], &acc[i], pending_len[i] + acc_len[i])
                } else {
                    match st.kind() {
                        SchemeKind::ItoSplitting => st.ito(x, &acc[i], acc_len[i]),
                        _ => st.cayley(x, &acc[i], acc_len[i]),
                    }
                };
                match r {
                    Ok(v) => w0[i] += v,
                    Err(e) => failure = Some(e),
                }
            }
            if !leaf.is_multiple_of(period) {
                return;
            }
            time = root_start + offset;
            let tol = 1e-9 * coarsest_step;
            while next_target < targets.len() && time >= targets[next_target] - tol {
                let t = if next_target + 1 == targets.len() {
                    scheme.t_final
                } else {
                    time
                };
                on_sample(next_target, t, states, &w0);
                next_target += 1;
            }
        });
        if let Some(e) = failure.take() {
            return Err(e);
        }
    }
    debug_assert!(next_target == targets.len(), "final time {time} missed");
    Ok(())
}

fn prepare(
    params: &ModelParams,
    trunc: &TruncationSpec,
    scheme: &SchemeSpec,
) -> Result<Stepper> {
    scheme.validate()?;
    scheme.check_stability(params, trunc)?;
    Stepper::new(params, trunc, scheme.kind, scheme.forcing_order)
}

/// Simulate one path of the truncated system from `x0`.
///
/// The noise is a pure function of `(seed, path_index)`; runs that differ
/// only in `scheme.refinement` see the same Brownian path.
pub fn simulate_path(
    x0: &StateVector,
    params: &ModelParams,
    trunc: &TruncationSpec,
    scheme: &SchemeSpec,
    seed: u64,
    path_index: u64,
) -> Result<PathRecord> {
    let mut records = simulate_levels(x0, params, trunc, scheme, seed, path_index, &[0])?;
    Ok(records.pop().expect("one level"))
}

/// Simulate the same path at several step sizes in one pass over the noise.
/// Level `lag` uses the step `scheme.step() * 2^lag`; the results are those
/// of separate [`simulate_path`] calls up to roundoff in the summed
/// increments.
pub fn simulate_levels(
    x0: &StateVector,
    params: &ModelParams,
    trunc: &TruncationSpec,
    scheme: &SchemeSpec,
    seed: u64,
    path_index: u64,
    lags: &[u32],
) -> Result<Vec<PathRecord>> {
    x0.check_len(trunc)?;
    if lags.is_empty() {
        return Err(Error::invalid("lags", "need at least one level"));
    }
    let stepper = prepare(params, trunc, scheme)?;
    let mut steppers = vec![stepper; lags.len()];
    let brownian = BrownianPath::new(seed, path_index, trunc.n_modes() + 1, scheme.dt, scheme.t_final);
    let mut states = vec![x0.as_slice().to_vec(); lags.len()];
    let mut records: Vec<PathRecord> = lags
        .iter()
        .map(|_| PathRecord {
            sample_times: Vec::with_capacity(scheme.samples + 1),
            states: Vec::with_capacity(scheme.samples + 1),
            w0_integral: 0.0,
            w0_at_samples: Vec::with_capacity(scheme.samples + 1),
            seed,
            path_index,
        })
        .collect();
    let mut bad = None;
    drive(&mut steppers, lags, &mut states, scheme, &brownian, &mut |_, t, xs, w| {
        for ((record, x), &w) in records.iter_mut().zip(xs).zip(w) {
            record.sample_times.push(t);
            record.w0_at_samples.push(w);
            match StateVector::new(x.clone()) {
                Ok(v) => record.states.push(v),
                Err(_) => bad = Some(t),
            }
        }
    })?;
    if let Some(t) = bad {
        return Err(Error::range("state", format!("path left the finite range by t = {t}")));
    }
    for record in &mut records {
        record.w0_integral = *record.w0_at_samples.last().expect("final sample");
    }
    Ok(records)
}

/// Simulate the pair started from `x` and `y` under common noise.
pub fn simulate_coupled(
    x: &StateVector,
    y: &StateVector,
    params: &ModelParams,
    trunc: &TruncationSpec,
    scheme: &SchemeSpec,
    seed: u64,
    path_index: u64,
) -> Result<CoupledRecord> {
    x.check_len(trunc)?;
    y.check_len(trunc)?;
    let full = prepare(params, trunc, scheme)?;
    let homogeneous = full.homogeneous();
    let mut steppers = [full, homogeneous];
    let brownian = BrownianPath::new(seed, path_index, trunc.n_modes() + 1, scheme.dt, scheme.t_final);
    let diff0: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a - b).collect();
    let mut states = vec![y.as_slice().to_vec(), diff0];
    let mut base = PathRecord {
        sample_times: Vec::new(),
        states: Vec::new(),
        w0_integral: 0.0,
        w0_at_samples: Vec::new(),
        seed,
        path_index,
    };
    let mut difference = Vec::new();
    let mut bad = false;
    drive(&mut steppers, &[0, 0], &mut states, scheme, &brownian, &mut |_, t, xs, w| {
        base.sample_times.push(t);
        base.w0_at_samples.push(w[0]);
        match (StateVector::new(xs[0].clone()), StateVector::new(xs[1].clone())) {
            (Ok(a), Ok(b)) => {
                base.states.push(a);
                difference.push(b);
            }
            _ => bad = true,
        }
    })?;
    if bad {
        return Err(Error::range("state", "coupled path left the finite range"));
    }
    base.w0_integral = *base.w0_at_samples.last().expect("final sample");
    Ok(CoupledRecord { base, difference })
}
