use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{simulate_levels, simulate_path};
use super::scheme::SchemeSpec;
use crate::error::{Error, Result};
use crate::model::{ModelParams, StateVector, TruncationSpec};
use crate::moments::MomentVector;
use crate::noise::initial_normals;
use crate::stats::MeanEstimate;

/// Law of the initial condition of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLaw {
    Deterministic(StateVector),
    /// Independent centred Gaussians with the given per-mode variances, so
    /// that `E[X_n(0)^2]` equals `variances[n-1]`.
    Gaussian { variances: Vec<f64> },
}

impl InitialLaw {
    pub fn len(&self) -> usize {
        match self {
            InitialLaw::Deterministic(x) => x.len(),
            InitialLaw::Gaussian { variances } => variances.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `E[X_n(0)^2]`.
    pub fn second_moments(&self) -> Result<MomentVector> {
        match self {
            InitialLaw::Deterministic(x) => MomentVector::new(x.as_slice().iter().map(|v| v * v).collect()),
            InitialLaw::Gaussian { variances } => MomentVector::new(variances.clone()),
        }
    }

    fn draw(&self, seed: u64, path_index: u64) -> Result<StateVector> {
        match self {
            InitialLaw::Deterministic(x) => Ok(x.clone()),
            InitialLaw::Gaussian { variances } => {
                let mut z = vec![0.0; variances.len()];
                initial_normals(seed, path_index, &mut z);
                StateVector::new(z.iter().zip(variances).map(|(z, v)| z * v.sqrt()).collect())
            }
        }
    }

    fn validate(&self, trunc: &TruncationSpec) -> Result<()> {
        if self.len() != trunc.n_modes() {
            return Err(Error::invalid(
                "initial law",
                format!("length {} does not match n_modes {}", self.len(), trunc.n_modes()),
            ));
        }
        if let InitialLaw::Gaussian { variances } = self {
            if variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("variances", "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// Ensemble post-processing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    /// Combine each path with a coarse companion at twice the step on the
    /// same Brownian path: `(2^p v_fine - v_coarse) / (2^p - 1)` per path.
    pub richardson: bool,
    /// Assumed weak order `p` of the scheme.
    pub richardson_order: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            richardson: false,
            richardson_order: 1.0,
        }
    }
}

impl EnsembleOptions {
    pub fn richardson() -> Self {
        Self {
            richardson: true,
            ..Self::default()
        }
    }
}

/// Sample statistics of `X_n(t)^2` and of the energy across paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub sample_times: Vec<f64>,
    /// `mean_second_moments[k][n-1]` estimates `E[X_n(t_k)^2]`.
    pub mean_second_moments: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    pub mean_energy: Vec<f64>,
    pub energy_se: Vec<f64>,
    /// Largest `|energy identity residual|` over paths and sampling times.
    pub energy_residual_max: f64,
    pub extrapolated: bool,
}

impl EnsembleStats {
    /// Estimate of `E[X_n(t_k)^2]` with its standard error, `n >= 1`.
    pub fn moment(&self, k: usize, n: usize) -> MeanEstimate {
        MeanEstimate {
            mean: self.mean_second_moments[k][n - 1],
            se: self.std_errors[k][n - 1],
            n: self.n_paths,
        }
    }

    pub fn final_moments(&self) -> Result<MomentVector> {
        MomentVector::new(self.mean_second_moments.last().expect("sample").clone())
    }
}

struct PathSummary {
    squares: Vec<f64>,
    energies: Vec<f64>,
    residual: f64,
}

/// Run `n_paths` independent paths and collect second-moment statistics.
///
/// Paths are simulated in parallel, but every path is a pure function of
/// `(seed, path_index)` and the reduction runs in path order, so the result
/// is bit-identical for any thread count.
pub fn run_ensemble(
    init: &InitialLaw,
    params: &ModelParams,
    trunc: &TruncationSpec,
    scheme: &SchemeSpec,
    n_paths: usize,
    seed: u64,
    options: EnsembleOptions,
) -> Result<EnsembleStats> {
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", format!("need at least 2 paths, got {n_paths}")));
    }
    init.validate(trunc)?;
    scheme.validate()?;
    let fine_scheme = if options.richardson {
        scheme.with_refinement(scheme.refinement + 1)
    } else {
        *scheme
    };
    fine_scheme.check_stability(params, trunc)?;
    let weight = options.richardson_order.exp2();
    let sigma = params.sigma();
    let n = trunc.n_modes();

    let summaries = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| -> Result<PathSummary> {
            let x0 = init.draw(seed, p)?;
            let mut levels = if options.richardson {
                simulate_levels(&x0, params, trunc, &fine_scheme, seed, p, &[0, 1])?
            } else {
                vec![simulate_path(&x0, params, trunc, &fine_scheme, seed, p)?]
            };
            let coarse = if options.richardson { levels.pop() } else { None };
            let fine = levels.pop().expect("fine level");
            let residual = fine
                .energy_residuals(sigma)
                .into_iter()
                .fold(0.0, |m: f64, r| m.max(r.abs()));
            let mut squares: Vec<f64> = fine
                .states
                .iter()
                .flat_map(|x| x.as_slice().iter().map(|v| v * v))
                .collect();
            let mut energies: Vec<f64> = fine.states.iter().map(StateVector::energy).collect();
            if let Some(coarse) = coarse {
                let csq = coarse.states.iter().flat_map(|x| x.as_slice().iter().map(|v| v * v));
                for (f, c) in squares.iter_mut().zip(csq) {
                    *f = (weight * *f - c) / (weight - 1.0);
                }
                for (f, c) in energies.iter_mut().zip(coarse.states.iter().map(StateVector::energy)) {
                    *f = (weight * *f - c) / (weight - 1.0);
                }
            }
            Ok(PathSummary {
                squares,
                energies,
                residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n_times = scheme.samples + 1;
    let sample_times: Vec<f64> = (0..n_times)
        .map(|i| scheme.t_final * i as f64 / scheme.samples as f64)
        .collect();
    let mut mean_second_moments = vec![vec![0.0; n]; n_times];
    let mut std_errors = vec![vec![0.0; n]; n_times];
    let mut column = vec![0.0; n_paths];
    for k in 0..n_times {
        for m in 0..n {
            for (c, s) in column.iter_mut().zip(&summaries) {
                *c = s.squares[k * n + m];
            }
            let est = MeanEstimate::from_samples(&column);
            mean_second_moments[k][m] = est.mean;
            std_errors[k][m] = est.se;
        }
    }
    let mut mean_energy = Vec::with_capacity(n_times);
    let mut energy_se = Vec::with_capacity(n_times);
    for k in 0..n_times {
        for (c, s) in column.iter_mut().zip(&summaries) {
            *c = s.energies[k];
        }
        let est = MeanEstimate::from_samples(&column);
        mean_energy.push(est.mean);
        energy_se.push(est.se);
    }
    let energy_residual_max = summaries.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok(EnsembleStats {
        n_paths,
        sample_times,
        mean_second_moments,
        std_errors,
        mean_energy,
        energy_se,
        energy_residual_max,
        extrapolated: options.richardson,
    })
}
