//! Second-moment dynamics: the tridiagonal q-matrix, its forward equations
//! on conservative and absorbing truncations, and functionals of moment
//! profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, expm_generator, solve_tridiagonal, DenseMatrix};
use crate::model::{Boundary, ModelParams, SobolevIndex, TruncationSpec};

/// Nonnegative second moments `u_1 .. u_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MomentVector(Vec<f64>);

/// Absolute floor below which negative entries are never treated as roundoff.
const CLAMP_FLOOR: f64 = 1e-12;
/// Relative (to the largest entry) tolerance for clamping negative entries.
const CLAMP_RELATIVE: f64 = 1e-9;

impl MomentVector {
    /// Validates finiteness and sign. Entries in `[-tol, 0)` with
    /// `tol = max(1e-12, 1e-9 max_n u_n)` are clamped to zero, anything more
    /// negative is an error.
    pub fn new(mut entries: Vec<f64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("moments", format!("entry {} is not finite", i + 1)));
        }
        let max = entries.iter().cloned().fold(0.0, f64::max);
        let tol = CLAMP_FLOOR.max(CLAMP_RELATIVE * max);
        for (i, v) in entries.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -tol {
                    return Err(Error::NegativeMoment { index: i + 1, value: *v });
                }
                *v = 0.0;
            }
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// `e_mode`, mode numbered from 1.
    pub fn unit(n: usize, mode: usize) -> Result<Self> {
        if mode == 0 || mode > n {
            return Err(Error::invalid("mode", format!("e{mode} outside 1..={n}")));
        }
        let mut v = vec![0.0; n];
        v[mode - 1] = 1.0;
        Ok(Self(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `u_n`, `n >= 1`.
    pub fn mode(&self, n: usize) -> f64 {
        self.0[n - 1]
    }

    /// `sum_n u_n`, the expected energy.
    pub fn total(&self) -> f64 {
        crate::stats::pairwise_sum(&self.0)
    }

    /// Multiply every entry by a nonnegative factor.
    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v * c).collect())
    }

    /// Zero-padded or truncated copy of length `n`.
    pub fn resized(&self, n: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(n, 0.0);
        Self(v)
    }
}

/// The tridiagonal generator `Pi` restricted to modes `1..=N`.
///
/// Off-diagonal entries `(n, n+1)` and `(n+1, n)` are both `k_n^2`. The
/// diagonal is `-k_1^2` on row 1 and `-(k_{n-1}^2 + k_n^2)` on interior rows;
/// row `N` is `-k_{N-1}^2` (conservative) or `-(k_{N-1}^2 + k_N^2)`
/// (absorbing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QMatrix {
    size: usize,
    /// `k_1^2 .. k_N^2`
    k2: Vec<f64>,
    boundary: Boundary,
}

impl QMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Entries `(n, n+1)` for `n = 1..N-1`.
    pub fn off_diagonal(&self) -> &[f64] {
        &self.k2[..self.size - 1]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.size;
        (0..n)
            .map(|i| {
                let below = if i > 0 { self.k2[i - 1] } else { 0.0 };
                let above = if i + 1 < n || self.boundary == Boundary::Absorbing {
                    self.k2[i]
                } else {
                    0.0
                };
                -(below + above)
            })
            .collect()
    }

    /// Entry `(i, j)`, both numbered from 1.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diagonal()[i - 1],
            1 => self.k2[i.min(j) - 1],
            _ => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let d = self.diagonal();
        let off = self.off_diagonal();
        (0..self.size)
            .map(|i| {
                let mut s = d[i];
                if i > 0 {
                    s += off[i - 1];
                }
                if i < off.len() {
                    s += off[i];
                }
                s
            })
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.size;
        let mut m = DenseMatrix::zeros(n);
        for (i, d) in self.diagonal().into_iter().enumerate() {
            m[(i, i)] = d;
        }
        for (i, &o) in self.off_diagonal().iter().enumerate() {
            m[(i, i + 1)] = o;
            m[(i + 1, i)] = o;
        }
        m
    }

    /// `u Pi` (equal to `Pi u` by symmetry).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let d = self.diagonal();
        let off = self.off_diagonal();
        (0..self.size)
            .map(|i| {
                let mut s = d[i] * u[i];
                if i > 0 {
                    s += off[i - 1] * u[i - 1];
                }
                if i < off.len() {
                    s += off[i] * u[i + 1];
                }
                s
            })
            .collect()
    }
}

pub fn build_q_matrix(params: &ModelParams, trunc: &TruncationSpec) -> Result<QMatrix> {
    let n = trunc.n_modes();
    let k2 = (1..=n as u32).map(|m| params.k2(m)).collect::<Result<Vec<_>>>()?;
    Ok(QMatrix {
        size: n,
        k2,
        boundary: trunc.boundary(),
    })
}

/// Output of [`solve_forward`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardSolution {
    /// Checkpoint times, starting at 0.
    pub times: Vec<f64>,
    pub states: Vec<MomentVector>,
    /// Normwise relative difference of the final state against a run with the
    /// checkpoint step halved.
    pub self_check: f64,
}

impl ForwardSolution {
    pub fn last(&self) -> &MomentVector {
        self.states.last().expect("at least the initial state")
    }
}

/// Accuracy goal for [`solve_forward`]; runs whose halved-step self-check
/// exceeds [`FORWARD_HARD_LIMIT`] fail.
pub const FORWARD_TARGET: f64 = 1e-8;
pub const FORWARD_HARD_LIMIT: f64 = 1e-6;

/// Solve `u' = u Pi + sigma^2 e_1`, `u(0) = u0`, reporting `u` at
/// `t k / n_checkpoints` for `k = 0..=n_checkpoints`.
///
/// The source term rides along as an extra coordinate held at 1, so a single
/// exponential of the bordered generator propagates both parts.
pub fn solve_forward(
    q: &QMatrix,
    u0: &MomentVector,
    sigma: f64,
    t: f64,
    n_checkpoints: usize,
) -> Result<ForwardSolution> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    if n_checkpoints == 0 {
        return Err(Error::invalid("n_checkpoints", "must be positive"));
    }
    if u0.len() != q.size() {
        return Err(Error::invalid(
            "u0",
            format!("length {} does not match generator size {}", u0.len(), q.size()),
        ));
    }
    let h = t / n_checkpoints as f64;
    let times: Vec<f64> = (0..=n_checkpoints).map(|k| k as f64 * h).collect();
    if t == 0.0 {
        return Ok(ForwardSolution {
            times,
            states: vec![u0.clone(); n_checkpoints + 1],
            self_check: 0.0,
        });
    }

    let primary = propagate(q, u0, sigma, h, n_checkpoints)?;
    let halved = propagate(q, u0, sigma, 0.5 * h, 2 * n_checkpoints)?;
    let last = primary.last().expect("nonempty");
    let check = halved.last().expect("nonempty");
    let scale = last.iter().map(|v| v.abs()).fold(f64::MIN_POSITIVE, f64::max);
    let self_check = last
        .iter()
        .zip(check)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale;
    if self_check > FORWARD_HARD_LIMIT {
        return Err(Error::Stiffness(format!(
            "halved-step self-check {self_check:e} exceeds {FORWARD_HARD_LIMIT:e}"
        )));
    }
    let states = primary
        .into_iter()
        .map(MomentVector::new)
        .collect::<Result<Vec<_>>>()?;
    Ok(ForwardSolution {
        times,
        states,
        self_check,
    })
}

/// Transition matrix over `h` of the chain on `1..=N` plus a cemetery state
/// collecting the mass that leaves through the absorbing boundary.
fn transition_matrix(q: &QMatrix, h: f64) -> Result<DenseMatrix> {
    let n = q.size();
    let mut gen = DenseMatrix::zeros(n + 1);
    for (i, &o) in q.off_diagonal().iter().enumerate() {
        gen[(i, i + 1)] = o * h;
        gen[(i + 1, i)] = o * h;
    }
    if q.boundary() == Boundary::Absorbing {
        gen[(n - 1, n)] = q.k2[n - 1] * h;
    }
    expm_generator(&gen)
}

fn step_homogeneous(p: &DenseMatrix, v: &[f64]) -> Vec<f64> {
    let mut ext = v.to_vec();
    ext.push(0.0);
    let mut out = p.vecmul(&ext);
    out.pop();
    out
}

/// `u_k = u(k h)` for `k = 0..=steps`.
///
/// Forcing is handled exactly: on the absorbing truncation through the
/// stationary solution, `u = s + (u0 - s) P`; on the conservative one through
/// `int_0^h e_1 P = h/N 1 + w (P - I)` with `w Pi = e_1 - 1/N`, which has the
/// explicit flux solution `w_{j+1} - w_j = (1 - j/N) / k_j^2`.
fn propagate(q: &QMatrix, u0: &MomentVector, sigma: f64, h: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    let n = q.size();
    let p = transition_matrix(q, h)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(u0.as_slice().to_vec());
    if sigma == 0.0 {
        let mut v = u0.as_slice().to_vec();
        for _ in 0..steps {
            v = step_homogeneous(&p, &v);
            out.push(v.clone());
        }
        return Ok(out);
    }
    let s2 = sigma * sigma;
    match q.boundary() {
        Boundary::Absorbing => {
            let stat = truncated_stationary(q, sigma)?.into_inner();
            let mut w: Vec<f64> = u0.as_slice().iter().zip(&stat).map(|(a, b)| a - b).collect();
            for _ in 0..steps {
                w = step_homogeneous(&p, &w);
                out.push(stat.iter().zip(&w).map(|(a, b)| a + b).collect());
            }
        }
        Boundary::Conservative => {
            let mut flux = vec![0.0; n];
            for j in 1..n {
                flux[j] = flux[j - 1] + (1.0 - j as f64 / n as f64) / q.k2[j - 1];
            }
            let moved = step_homogeneous(&p, &flux);
            let source: Vec<f64> = moved
                .iter()
                .zip(&flux)
                .map(|(a, b)| s2 * (h / n as f64 + (a - b)))
                .collect();
            let mut v = u0.as_slice().to_vec();
            for _ in 0..steps {
                v = step_homogeneous(&p, &v);
                v.iter_mut().zip(&source).for_each(|(a, b)| *a += b);
                out.push(v.clone());
            }
        }
    }
    Ok(out)
}

/// Advance by `h` and also return `int_0^h u(s) ds`, from one exponential of
/// the generator augmented with a running integral. Checked against two
/// half steps like [`solve_forward`].
pub fn forward_with_integral(
    q: &QMatrix,
    u0: &MomentVector,
    sigma: f64,
    h: f64,
) -> Result<(MomentVector, Vec<f64>)> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("h", format!("must be positive and finite, got {h}")));
    }
    if u0.len() != q.size() {
        return Err(Error::invalid(
            "u0",
            format!("length {} does not match generator size {}", u0.len(), q.size()),
        ));
    }
    let (u, integral) = integral_step(q, u0.as_slice(), sigma, h)?;
    let (mid, first) = integral_step(q, u0.as_slice(), sigma, 0.5 * h)?;
    let (end, second) = integral_step(q, &mid, sigma, 0.5 * h)?;
    let scale = integral.iter().map(|v| v.abs()).fold(f64::MIN_POSITIVE, f64::max);
    let gap = integral
        .iter()
        .zip(first.iter().zip(&second))
        .map(|(a, (b, c))| (a - b - c).abs())
        .chain(u.iter().zip(&end).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
        / scale;
    if gap > FORWARD_HARD_LIMIT {
        return Err(Error::Stiffness(format!(
            "halved-step self-check {gap:e} exceeds {FORWARD_HARD_LIMIT:e}"
        )));
    }
    Ok((MomentVector::new(u)?, integral))
}

fn integral_step(q: &QMatrix, u0: &[f64], sigma: f64, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    // state (u, I, 1): u' = u Pi + sigma^2 e_1, I' = u
    let n = q.size();
    let mut gen = DenseMatrix::zeros(2 * n + 1);
    let pi = q.to_dense();
    for i in 0..n {
        for j in 0..n {
            gen[(i, j)] = pi[(i, j)] * h;
        }
        gen[(i, n + i)] = h;
    }
    gen[(2 * n, 0)] = sigma * sigma * h;
    let step = expm(&gen)?;
    let mut v = u0.to_vec();
    v.extend(std::iter::repeat_n(0.0, n));
    v.push(1.0);
    let out = step.vecmul(&v);
    Ok((out[..n].to_vec(), out[n..2 * n].to_vec()))
}

/// Stationary solution of the absorbing truncation,
/// `u Pi + sigma^2 e_1 = 0`, by direct tridiagonal elimination.
pub fn truncated_stationary(q: &QMatrix, sigma: f64) -> Result<MomentVector> {
    if q.boundary() != Boundary::Absorbing {
        return Err(Error::invalid(
            "boundary",
            "the conservative truncation has no stationary solution under forcing",
        ));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    let n = q.size();
    let mut rhs = vec![0.0; n];
    rhs[0] = -sigma * sigma;
    let off = q.off_diagonal();
    let u = solve_tridiagonal(off, &q.diagonal(), off, &rhs)?;
    MomentVector::new(u)
}

/// `sum_n k_n^{-2} u_n`, the squared `H^{-1}` norm in expectation.
pub fn h_minus_one_functional(u: &MomentVector, params: &ModelParams) -> Result<f64> {
    let mut terms = Vec::with_capacity(u.len());
    for (i, &v) in u.as_slice().iter().enumerate() {
        terms.push(params.k_pow(i as u32 + 1, -2.0)? * v);
    }
    Ok(crate::stats::pairwise_sum(&terms))
}

/// Time derivative of [`h_minus_one_functional`] along unforced absorbing
/// forward solutions: `-(1 - lambda^{-2}) u_1 - lambda^{-2} u_N`.
pub fn h_minus_one_drift(u: &MomentVector, params: &ModelParams) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    let r = params.inv_lambda_sq();
    -(1.0 - r) * u.mode(1) - r * u.mode(u.len())
}

/// Partial sums of the time-unbounded majorant of `||X||^2` in
/// `L^2([0,T] x Omega; H^beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityBound {
    /// Sum over `j = 1..=cutoff`.
    pub value: f64,
    /// The `j = cutoff` term.
    pub last_term: f64,
    /// `last_term / value`.
    pub last_term_ratio: f64,
    /// Tail terms stopped decreasing.
    pub divergent: bool,
    pub terms: Vec<f64>,
}

/// `sum_i sum_{j <= cutoff} k_j^{2 beta} ubar_i k_{max(i,j)}^{-2} / (1 - lambda^{-2})`.
///
/// Divergence is flagged when the last term is not smaller than the one
/// before it.
pub fn regularity_bound(
    ubar: &MomentVector,
    beta: SobolevIndex,
    params: &ModelParams,
    cutoff: usize,
) -> Result<RegularityBound> {
    if cutoff < ubar.len() {
        return Err(Error::invalid(
            "cutoff",
            format!("cutoff {cutoff} is shorter than ubar ({})", ubar.len()),
        ));
    }
    if cutoff < 2 {
        return Err(Error::invalid("cutoff", "need at least two terms"));
    }
    let denom = 1.0 - params.inv_lambda_sq();
    let u = ubar.as_slice();
    // suffix[j] = sum_{i > j} ubar_i k_i^{-2} (j as offset, i.e. modes j+2..)
    let mut weighted = Vec::with_capacity(u.len());
    for (i, &v) in u.iter().enumerate() {
        weighted.push(v * params.k_pow(i as u32 + 1, -2.0)?);
    }
    let mut suffix = vec![0.0; cutoff + 1];
    for j in (0..cutoff).rev() {
        let next = weighted.get(j).copied().unwrap_or(0.0);
        suffix[j] = suffix[j + 1] + next;
    }
    let mut prefix = 0.0;
    let mut terms = Vec::with_capacity(cutoff);
    for j in 1..=cutoff {
        prefix += u.get(j - 1).copied().unwrap_or(0.0);
        // i <= j contributes k_j^{-2} ubar_i, i > j contributes ubar_i k_i^{-2}
        let low = params.k_pow(j as u32, 2.0 * beta.value() - 2.0)? * prefix;
        let high = if suffix[j] > 0.0 {
            params.k_pow(j as u32, 2.0 * beta.value())? * suffix[j]
        } else {
            0.0
        };
        terms.push((low + high) / denom);
    }
    let value = crate::stats::pairwise_sum(&terms);
    if !value.is_finite() {
        return Err(Error::range("beta", "partial sum overflows"));
    }
    let last_term = terms[cutoff - 1];
    let prev = terms[cutoff - 2];
    let divergent = last_term >= prev * (1.0 - 1e-12) && last_term > 0.0;
    Ok(RegularityBound {
        value,
        last_term,
        last_term_ratio: if value > 0.0 { last_term / value } else { 0.0 },
        divergent,
        terms,
    })
}
