//! Model constants, truncations, state vectors and the weighted norms built
//! on the wavenumbers `k_n = lambda^n`.
//!
//! Public interfaces use the model's own indexing: modes are numbered from 1.
//! Internally vectors are dense arrays with mode `n` stored at offset `n - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentVector;

/// Largest exponent `x` for which `exp(x)` is finite.
const LN_MAX: f64 = 709.0;

/// Above this magnitude powers are evaluated as `exp(x)` instead of `powf`.
const EXP_SWITCH: f64 = 300.0;

/// The spacing ratio `lambda > 1` and the forcing amplitude `sigma >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    lambda: f64,
    sigma: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, sigma: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 1.0 {
            return Err(Error::invalid("lambda", format!("must be finite and > 1, got {lambda}")));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { lambda, sigma })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Same spacing ratio with a different forcing amplitude.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.lambda, sigma)
    }

    /// `lambda^{-2}`, the ratio of consecutive squared wavenumbers.
    pub fn inv_lambda_sq(&self) -> f64 {
        1.0 / (self.lambda * self.lambda)
    }

    /// `k_n = lambda^n`. Fails when `lambda^{2n}` is not representable, since
    /// every consumer squares the wavenumber.
    pub fn wavenumber(&self, n: u32) -> Result<f64> {
        if 2.0 * n as f64 * self.lambda.ln() > LN_MAX {
            return Err(Error::range(
                "n",
                format!("lambda^(2n) overflows for n = {n} (lambda = {})", self.lambda),
            ));
        }
        Ok(powi(self.lambda, n))
    }

    /// `k_n^2`.
    pub fn k2(&self, n: u32) -> Result<f64> {
        let k = self.wavenumber(n)?;
        Ok(k * k)
    }

    /// `k_n^p` for a real exponent, switching to `exp(p n ln lambda)` for
    /// large arguments.
    pub fn k_pow(&self, n: u32, p: f64) -> Result<f64> {
        let x = p * n as f64 * self.lambda.ln();
        if x > LN_MAX {
            return Err(Error::range("n", format!("k_{n}^{p} overflows")));
        }
        if x.abs() > EXP_SWITCH {
            Ok(x.exp())
        } else {
            Ok(self.wavenumber_unchecked(n).powf(p))
        }
    }

    fn wavenumber_unchecked(&self, n: u32) -> f64 {
        powi(self.lambda, n)
    }

    /// Squared wavenumbers `k_0^2, k_1^2, ..., k_n^2` (offset equals index).
    pub fn k2_table(&self, n: u32) -> Result<Vec<f64>> {
        (0..=n).map(|m| self.k2(m)).collect()
    }
}

fn powi(base: f64, n: u32) -> f64 {
    match i32::try_from(n) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(n as f64),
    }
}

/// Boundary closure of a truncated system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// The Galerkin closure: the last mode keeps only its lower coupling and
    /// energy is conserved.
    Conservative,
    /// The last mode also loses energy at rate `k_N^2` to the discarded
    /// modes, approximating the minimal (mass-leaking) dynamics.
    Absorbing,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Conservative => f.write_str("conservative"),
            Boundary::Absorbing => f.write_str("absorbing"),
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(Boundary::Conservative),
            "absorbing" => Ok(Boundary::Absorbing),
            other => Err(Error::invalid("boundary", format!("unknown boundary `{other}`"))),
        }
    }
}

/// Number of retained modes and the boundary closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSpec {
    n_modes: usize,
    boundary: Boundary,
}

impl TruncationSpec {
    pub const MIN_MODES: usize = 3;

    pub fn new(n_modes: usize, boundary: Boundary) -> Result<Self> {
        if n_modes < Self::MIN_MODES {
            return Err(Error::invalid("n_modes", format!("must be >= 3, got {n_modes}")));
        }
        if u32::try_from(n_modes).is_err() {
            return Err(Error::invalid("n_modes", "too large"));
        }
        Ok(Self { n_modes, boundary })
    }

    pub fn conservative(n_modes: usize) -> Result<Self> {
        Self::new(n_modes, Boundary::Conservative)
    }

    pub fn absorbing(n_modes: usize) -> Result<Self> {
        Self::new(n_modes, Boundary::Absorbing)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
}

/// A point of the truncated phase space `R^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("state", format!("component {} is not finite", i + 1)));
        }
        Ok(Self(entries))
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self(vec![0.0; n_modes])
    }

    /// The unit vector `e_mode` (mode numbered from 1).
    pub fn unit(n_modes: usize, mode: usize) -> Result<Self> {
        if mode == 0 || mode > n_modes {
            return Err(Error::invalid("mode", format!("e{mode} outside 1..={n_modes}")));
        }
        let mut v = vec![0.0; n_modes];
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

    /// Component `x_n`, `n >= 1`.
    pub fn mode(&self, n: usize) -> f64 {
        self.0[n - 1]
    }

    /// Squared Euclidean norm, i.e. the energy.
    pub fn energy(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub(crate) fn check_len(&self, trunc: &TruncationSpec) -> Result<()> {
        if self.len() != trunc.n_modes() {
            return Err(Error::invalid(
                "state",
                format!("length {} does not match n_modes {}", self.len(), trunc.n_modes()),
            ));
        }
        Ok(())
    }
}

/// Regularity exponent `s` of the weighted space `H^s`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(s: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::invalid("s", "must be finite"));
        }
        Ok(Self(s))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// `k_n = lambda^n`; `n = 0` gives 1.
pub fn wavenumber(n: u32, params: &ModelParams) -> Result<f64> {
    params.wavenumber(n)
}

/// `(sum_n k_n^{2s} x_n^2)^{1/2}` over the retained modes.
pub fn sobolev_norm(x: &StateVector, s: SobolevIndex, params: &ModelParams) -> Result<f64> {
    let mut acc = 0.0;
    for (i, &xi) in x.as_slice().iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let w = params.k_pow(i as u32 + 1, 2.0 * s.value())?;
        acc += w * xi * xi;
    }
    if !acc.is_finite() {
        return Err(Error::range("s", format!("weighted sum overflows for s = {}", s.value())));
    }
    Ok(acc.sqrt())
}

/// The stationary second moments of the infinite forced system,
/// `s_n = sigma^2 lambda^{-2n} / (1 - lambda^{-2})`, for `n = 1..=n_modes`.
pub fn stationary_second_moments(params: &ModelParams, n_modes: usize) -> Result<MomentVector> {
    let sigma2 = params.sigma() * params.sigma();
    let denom = 1.0 - params.inv_lambda_sq();
    let entries = (1..=n_modes as u32)
        .map(|n| Ok(sigma2 * params.k_pow(n, -2.0)? / denom))
        .collect::<Result<Vec<_>>>()?;
    MomentVector::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p2(sigma: f64) -> ModelParams {
        ModelParams::new(2.0, sigma).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ModelParams::new(1.0, 1.0).is_err());
        assert!(ModelParams::new(0.5, 1.0).is_err());
        assert!(ModelParams::new(2.0, -1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0).is_err());
        assert!(TruncationSpec::conservative(2).is_err());
        assert!(TruncationSpec::absorbing(3).is_ok());
        assert!(StateVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn wavenumber_values() {
        let p = p2(1.0);
        assert_eq!(wavenumber(0, &p).unwrap(), 1.0);
        assert_eq!(wavenumber(1, &p).unwrap(), 2.0);
        assert_eq!(wavenumber(10, &p).unwrap(), 1024.0);
    }

    #[test]
    fn wavenumber_overflow_names_n() {
        let err = wavenumber(600, &p2(1.0)).unwrap_err();
        assert!(err.is_range());
        assert!(err.to_string().contains("600"));
        assert!(wavenumber(500, &p2(1.0)).is_ok());
    }

    #[test]
    fn sobolev_norm_examples() {
        let p = p2(1.0);
        let e1 = StateVector::unit(2, 1).unwrap();
        assert_eq!(sobolev_norm(&e1, SobolevIndex::new(1.0).unwrap(), &p).unwrap(), 2.0);
        assert_eq!(sobolev_norm(&e1, SobolevIndex::new(0.0).unwrap(), &p).unwrap(), 1.0);
        let ones = StateVector::new(vec![1.0, 1.0]).unwrap();
        let v = sobolev_norm(&ones, SobolevIndex::new(-1.0).unwrap(), &p).unwrap();
        assert_relative_eq!(v, 0.3125f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn sobolev_norm_large_index_uses_log_path() {
        let p = p2(1.0);
        let x = StateVector::unit(300, 300).unwrap();
        // 2 s n ln 2 = 2 * 0.9 * 300 * ln 2 ~ 374 > 300
        let v = sobolev_norm(&x, SobolevIndex::new(0.9).unwrap(), &p).unwrap();
        assert_relative_eq!(v.ln(), 0.9 * 300.0 * 2f64.ln(), max_relative = 1e-12);
        assert!(sobolev_norm(&x, SobolevIndex::new(2.0).unwrap(), &p).unwrap_err().is_range());
    }

    #[test]
    fn stationary_profile_examples() {
        let zero = stationary_second_moments(&p2(0.0), 8).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));
        let s = stationary_second_moments(&p2(1.0), 16).unwrap();
        assert_relative_eq!(s.mode(1), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(s.mode(2), 1.0 / 12.0, max_relative = 1e-15);
        for n in 1..16 {
            assert_relative_eq!(s.mode(n) / s.mode(n + 1), 4.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn stationary_profile_solves_moment_relations() {
        for &lambda in &[1.3, 2.0, 3.7] {
            let p = ModelParams::new(lambda, 1.7).unwrap();
            let n = 20;
            let s = stationary_second_moments(&p, n).unwrap();
            let k2 = p.k2_table(n as u32).unwrap();
            let sig2 = p.sigma() * p.sigma();
            let first = sig2 - k2[1] * s.mode(1) + k2[1] * s.mode(2);
            assert!(first.abs() <= 1e-12 * sig2, "first row residual {first}");
            for m in 2..n {
                let terms = [
                    k2[m - 1] * s.mode(m - 1),
                    (k2[m - 1] + k2[m]) * s.mode(m),
                    k2[m] * s.mode(m + 1),
                ];
                let r = terms[0] - terms[1] + terms[2];
                assert!(r.abs() <= 1e-12 * terms[1], "row {m} residual {r}");
            }
        }
    }

    proptest! {
        #[test]
        fn norms_are_monotone_in_index(
            x in proptest::collection::vec(-10.0f64..10.0, 3..24),
            p in -3.0f64..3.0,
            gap in 0.0f64..3.0,
            lambda in 1.05f64..4.0,
        ) {
            let params = ModelParams::new(lambda, 0.0).unwrap();
            let x = StateVector::new(x).unwrap();
            let lo = sobolev_norm(&x, SobolevIndex::new(p).unwrap(), &params).unwrap();
            let hi = sobolev_norm(&x, SobolevIndex::new(p + gap).unwrap(), &params).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-14));
        }

        #[test]
        fn wavenumbers_multiply(n in 0u32..60, m in 0u32..60, lambda in 1.01f64..3.0) {
            let params = ModelParams::new(lambda, 0.0).unwrap();
            let a = params.wavenumber(n).unwrap() * params.wavenumber(m).unwrap();
            let b = params.wavenumber(n + m).unwrap();
            prop_assert!((a - b).abs() <= 1e-13 * b);
        }

        #[test]
        fn wavenumbers_increase(n in 0u32..200, lambda in 1.001f64..3.0) {
            let params = ModelParams::new(lambda, 0.0).unwrap();
            prop_assert!(params.wavenumber(n + 1).unwrap() > params.wavenumber(n).unwrap());
        }
    }
}
