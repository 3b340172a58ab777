use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Boundary, ModelParams, StateVector, TruncationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    ItoSplitting,
    CayleyStratonovich,
    RotationSplitting,
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ito_splitting" | "ito" => Ok(SchemeKind::ItoSplitting),
            "cayley_stratonovich" | "cayley" => Ok(SchemeKind::CayleyStratonovich),
            "rotation_splitting" | "rotation" => Ok(SchemeKind::RotationSplitting),
            other => Err(Error::invalid("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Where the additive forcing `sigma dW_0 e_1` enters a Cayley step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForcingOrder {
    Pre,
    Post,
    #[default]
    Strang,
}

impl std::str::FromStr for ForcingOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" => Ok(ForcingOrder::Pre),
            "post" => Ok(ForcingOrder::Post),
            "strang" => Ok(ForcingOrder::Strang),
            other => Err(Error::invalid("forcing_order", format!("unknown order `{other}`"))),
        }
    }
}

/// Time grid and discretization of a path simulation.
///
/// Steps have length `dt / 2^refinement`; the Brownian path is always rooted
/// on the `dt` grid so runs that differ only in `refinement` share it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub forcing_order: ForcingOrder,
    #[serde(default)]
    pub refinement: u32,
    /// Number of equal sampling intervals on `[0, t_final]`.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    1
}

/// Refuse Ito steps with `dt max_n (k_{n-1}^2 + k_n^2)` above this.
pub const ITO_STABILITY_LIMIT: f64 = 10.0;
/// Per-step limit on `k_n^2 dt` inside a single Ito step.
pub const ITO_STEP_LIMIT: f64 = 50.0;

impl SchemeSpec {
    pub fn new(kind: SchemeKind, dt: f64, t_final: f64) -> Result<Self> {
        let spec = Self {
            kind,
            dt,
            t_final,
            forcing_order: ForcingOrder::default(),
            refinement: 0,
            samples: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_refinement(mut self, refinement: u32) -> Self {
        self.refinement = refinement;
        self
    }

    pub fn with_forcing_order(mut self, order: ForcingOrder) -> Self {
        self.forcing_order = order;
        self
    }

    /// Default step `0.1 / lambda^{2(N-1)}`.
    pub fn default_dt(params: &ModelParams, trunc: &TruncationSpec) -> Result<f64> {
        Ok(0.1 / params.k2(trunc.n_modes() as u32 - 1)?)
    }

    /// Actual step length.
    pub fn step(&self) -> f64 {
        self.dt / (self.refinement as f64).exp2()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::invalid("t_final", format!("must be positive, got {}", self.t_final)));
        }
        if self.dt > self.t_final {
            return Err(Error::invalid("dt", format!("dt {} exceeds t_final {}", self.dt, self.t_final)));
        }
        if self.samples == 0 {
            return Err(Error::invalid("samples", "must be positive"));
        }
        if self.refinement > 30 {
            return Err(Error::invalid("refinement", "at most 30 halvings"));
        }
        Ok(())
    }

    /// Stability guard for the Ito splitting scheme.
    pub fn check_stability(&self, params: &ModelParams, trunc: &TruncationSpec) -> Result<()> {
        if self.kind != SchemeKind::ItoSplitting {
            return Ok(());
        }
        let rates = drift_rates(params, trunc)?;
        let max = rates.iter().cloned().fold(0.0, f64::max);
        let h = self.step();
        if h * max > ITO_STABILITY_LIMIT {
            return Err(Error::range(
                "dt",
                format!(
                    "ito_splitting needs dt * max(k_(n-1)^2 + k_n^2) <= {ITO_STABILITY_LIMIT}, got {:.3e} (dt = {h:e})",
                    h * max
                ),
            ));
        }
        Ok(())
    }
}

/// Ito damping rates: `k_1^2`, `k_{n-1}^2 + k_n^2`, and for row `N`
/// `k_{N-1}^2` or `k_{N-1}^2 + k_N^2` depending on the closure.
fn drift_rates(params: &ModelParams, trunc: &TruncationSpec) -> Result<Vec<f64>> {
    let n = trunc.n_modes();
    let k2 = params.k2_table(n as u32)?;
    Ok((1..=n)
        .map(|m| {
            let below = if m > 1 { k2[m - 1] } else { 0.0 };
            let above = if m < n || trunc.boundary() == Boundary::Absorbing {
                k2[m]
            } else {
                0.0
            };
            below + above
        })
        .collect())
}

/// Precomputed coefficients for repeated steps on one truncation.
#[derive(Debug, Clone)]
pub(crate) struct Stepper {
    n: usize,
    sigma: f64,
    boundary: Boundary,
    kind: SchemeKind,
    forcing: ForcingOrder,
    /// `k_0 .. k_N`
    k: Vec<f64>,
    rates: Vec<f64>,
    cached_h: f64,
    drift: Vec<f64>,
    absorb: f64,
    work: Vec<f64>,
    work2: Vec<f64>,
    work3: Vec<f64>,
}

impl Stepper {
    pub(crate) fn new(
        params: &ModelParams,
        trunc: &TruncationSpec,
        kind: SchemeKind,
        forcing: ForcingOrder,
    ) -> Result<Self> {
        let n = trunc.n_modes();
        let k = (0..=n as u32)
            .map(|m| params.wavenumber(m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            sigma: params.sigma(),
            boundary: trunc.boundary(),
            kind,
            forcing,
            rates: drift_rates(params, trunc)?,
            k,
            cached_h: f64::NAN,
            drift: vec![1.0; n],
            absorb: 1.0,
            work: vec![0.0; n],
            work2: vec![0.0; n],
            work3: vec![0.0; n],
        })
    }

    pub(crate) fn kind(&self) -> SchemeKind {
        self.kind
    }

    /// Copy of this stepper with the forcing switched off.
    pub(crate) fn homogeneous(&self) -> Self {
        let mut s = self.clone();
        s.sigma = 0.0;
        s
    }

    fn prepare(&mut self, h: f64) -> Result<()> {
        if h == self.cached_h {
            return Ok(());
        }
        if self.kind == SchemeKind::ItoSplitting {
            let top = match self.boundary {
                Boundary::Absorbing => self.n,
                Boundary::Conservative => self.n - 1,
            };
            let kmax = self.k[top];
            if kmax * kmax * h > ITO_STEP_LIMIT {
                return Err(Error::range(
                    "dt",
                    format!("k_{top}^2 dt = {:.3e} exceeds {ITO_STEP_LIMIT}", kmax * kmax * h),
                ));
            }
            for (d, &r) in self.drift.iter_mut().zip(&self.rates) {
                *d = (-0.5 * r * h).exp();
            }
        }
        let kn = self.k[self.n];
        self.absorb = match (self.boundary, self.kind) {
            (Boundary::Conservative, _) => 1.0,
            (Boundary::Absorbing, SchemeKind::RotationSplitting) => (-0.5 * kn * kn * h).exp(),
            (Boundary::Absorbing, _) => (-0.25 * kn * kn * h).exp(),
        };
        self.cached_h = h;
        Ok(())
    }

    /// One Ito splitting step. Returns the left-point `X_1 dW_0` contribution.
    pub(crate) fn ito(&mut self, x: &mut [f64], inc: &[f64], h: f64) -> Result<f64> {
        self.prepare(h)?;
        let n = self.n;
        let old = &mut self.work;
        old.copy_from_slice(x);
        for i in 0..n {
            let mut v = self.drift[i] * old[i];
            if i > 0 {
                v += self.k[i] * old[i - 1] * inc[i];
            }
            if i + 1 < n {
                v -= self.k[i + 1] * old[i + 1] * inc[i + 1];
            }
            x[i] = v;
        }
        x[0] += self.sigma * inc[0];
        Ok(old[0] * inc[0])
    }

    /// One Cayley step. Returns the left-point `X_1 dW_0` contribution.
    pub(crate) fn cayley(&mut self, x: &mut [f64], inc: &[f64], h: f64) -> Result<f64> {
        self.prepare(h)?;
        let n = self.n;
        let w0 = x[0] * inc[0];
        let f = self.sigma * inc[0];
        match self.forcing {
            ForcingOrder::Pre => x[0] += f,
            ForcingOrder::Strang => x[0] += 0.5 * f,
            ForcingOrder::Post => {}
        }
        x[n - 1] *= self.absorb;

        // half-couplings c_p / 2 with c_p = k_{p+1} dW_{p+1}, pair p = (p, p+1)
        let Self { work: y, work2: half, work3: cp, .. } = self;
        for p in 0..n - 1 {
            half[p] = 0.5 * self.k[p + 1] * inc[p + 1];
        }
        // y = (I + G/2) x
        for i in 0..n {
            let mut v = x[i];
            if i + 1 < n {
                v -= half[i] * x[i + 1];
            }
            if i > 0 {
                v += half[i - 1] * x[i - 1];
            }
            y[i] = v;
        }
        // (I - G/2) z = y with unit diagonal, super +c_p/2 and sub -c_p/2.
        // Elimination pivots are 1 + (c_p/2)^2 / previous >= 1.
        let mut pivot = 1.0;
        for i in 0..n {
            if i > 0 {
                pivot = 1.0 + half[i - 1] * cp[i - 1];
                y[i] = (y[i] + half[i - 1] * y[i - 1]) / pivot;
            }
            if !pivot.is_finite() {
                return Err(Error::LinearSolve { row: i, pivot });
            }
            if i + 1 < n {
                cp[i] = half[i] / pivot;
            }
        }
        x[n - 1] = y[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = y[i] - cp[i] * x[i + 1];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve { row: 0, pivot: f64::NAN });
        }

        x[n - 1] *= self.absorb;
        match self.forcing {
            ForcingOrder::Post => x[0] += f,
            ForcingOrder::Strang => x[0] += 0.5 * f,
            ForcingOrder::Pre => {}
        }
        Ok(w0)
    }

    /// One symmetric sweep of exact pair rotations over a step of length `h`
    /// whose Brownian increment is split into `first` and `second` halves.
    /// Returns the left-point `X_1 dW_0` sum over the two half steps.
    pub(crate) fn rotation(&mut self, x: &mut [f64], first: &[f64], second: &[f64], h: f64) -> Result<f64> {
        self.prepare(h)?;
        let n = self.n;
        let mut w0 = x[0] * first[0];
        x[0] += self.sigma * first[0];
        for p in 0..n - 1 {
            rotate(x, p, self.k[p + 1] * first[p + 1]);
        }
        x[n - 1] *= self.absorb;
        for p in (0..n - 1).rev() {
            rotate(x, p, self.k[p + 1] * second[p + 1]);
        }
        w0 += x[0] * second[0];
        x[0] += self.sigma * second[0];
        Ok(w0)
    }
}

/// Rotate the pair `(p, p + 1)` by `angle`: the exact flow of
/// `dX_p = -k X_{p+1} o dW`, `dX_{p+1} = k X_p o dW`.
#[inline]
fn rotate(x: &mut [f64], p: usize, angle: f64) {
    let (s, c) = angle.sin_cos();
    let a = x[p];
    let b = x[p + 1];
    x[p] = c * a - s * b;
    x[p + 1] = s * a + c * b;
}

fn check_increments(x: &StateVector, trunc: &TruncationSpec, inc: &[f64], dt: f64) -> Result<()> {
    x.check_len(trunc)?;
    if inc.len() != trunc.n_modes() + 1 {
        return Err(Error::invalid(
            "increments",
            format!("expected {} increments (W_0..W_N), got {}", trunc.n_modes() + 1, inc.len()),
        ));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    Ok(())
}

/// One Ito splitting step: exact diagonal damping, then Euler-Maruyama
/// diffusion evaluated at the pre-step state, plus `sigma dW_0` on mode 1.
/// `increments` holds `dW_0 .. dW_N`.
pub fn ito_splitting_step(
    x: &StateVector,
    increments: &[f64],
    dt: f64,
    params: &ModelParams,
    trunc: &TruncationSpec,
) -> Result<StateVector> {
    check_increments(x, trunc, increments, dt)?;
    let mut stepper = Stepper::new(params, trunc, SchemeKind::ItoSplitting, ForcingOrder::Pre)?;
    let mut out = x.as_slice().to_vec();
    stepper.ito(&mut out, increments, dt)?;
    StateVector::new(out)
}

/// One Cayley step `(I - G/2)^{-1} (I + G/2) x` of the Stratonovich system,
/// with the forcing placed according to `order`.
pub fn cayley_step(
    x: &StateVector,
    increments: &[f64],
    dt: f64,
    params: &ModelParams,
    trunc: &TruncationSpec,
    order: ForcingOrder,
) -> Result<StateVector> {
    check_increments(x, trunc, increments, dt)?;
    let mut stepper = Stepper::new(params, trunc, SchemeKind::CayleyStratonovich, order)?;
    let mut out = x.as_slice().to_vec();
    stepper.cayley(&mut out, increments, dt)?;
    StateVector::new(out)
}

/// One symmetric rotation sweep over a step of length `dt`; `first` and
/// `second` are the Brownian increments of the two half steps.
pub fn rotation_splitting_step(
    x: &StateVector,
    first: &[f64],
    second: &[f64],
    dt: f64,
    params: &ModelParams,
    trunc: &TruncationSpec,
) -> Result<StateVector> {
    check_increments(x, trunc, first, dt)?;
    check_increments(x, trunc, second, dt)?;
    let mut stepper = Stepper::new(params, trunc, SchemeKind::RotationSplitting, ForcingOrder::Strang)?;
    let mut out = x.as_slice().to_vec();
    stepper.rotation(&mut out, first, second, dt)?;
    StateVector::new(out)
}
