//! Initial-condition mini-language shared by `--x0` and `--u0`:
//!
//! * `zero`
//! * `e<k>`: unit vector on mode `k`
//! * `geom:<a>:<r>`: entries `a r^n`
//! * `stationary`: the stationary second moments of the forced system
//! * `gauss:<spec>`: independent centred Gaussians whose variances follow
//!   `<spec>` (any of the forms above, or a list)
//! * `v1,v2,...`: explicit entries, padded with zeros

use dyadic_core::galerkin::InitialLaw;
use dyadic_core::{stationary_second_moments, ModelParams, MomentVector, StateVector};

use crate::UsageError;

fn bad(flag: &str, spec: &str, why: impl std::fmt::Display) -> UsageError {
    UsageError(format!("invalid {flag} `{spec}`: {why}"))
}

fn number(flag: &str, spec: &str, s: &str) -> Result<f64, UsageError> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| bad(flag, spec, format!("`{s}` is not a number ({e})")))
}

/// Deterministic entries described by `spec`, or `None` for the random
/// forms.
fn entries(flag: &str, spec: &str, n: usize, params: &ModelParams) -> Result<Vec<f64>, UsageError> {
    let s = spec.trim();
    if s == "zero" {
        return Ok(vec![0.0; n]);
    }
    if s == "stationary" {
        return stationary_second_moments(params, n)
            .map(MomentVector::into_inner)
            .map_err(|e| bad(flag, spec, e));
    }
    if let Some(k) = s.strip_prefix('e') {
        if let Ok(k) = k.parse::<usize>() {
            if k == 0 || k > n {
                return Err(bad(flag, spec, format!("mode must be in 1..={n}")));
            }
            let mut v = vec![0.0; n];
            v[k - 1] = 1.0;
            return Ok(v);
        }
    }
    if let Some(rest) = s.strip_prefix("geom:") {
        let (a, r) = rest
            .split_once(':')
            .ok_or_else(|| bad(flag, spec, "expected geom:<a>:<r>"))?;
        let (a, r) = (number(flag, spec, a)?, number(flag, spec, r)?);
        return Ok((1..=n as i32).map(|m| a * r.powi(m)).collect());
    }
    let values = s
        .split(',')
        .map(|v| number(flag, spec, v))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() > n {
        return Err(bad(flag, spec, format!("{} entries for {n} modes", values.len())));
    }
    let mut v = values;
    v.resize(n, 0.0);
    Ok(v)
}

/// Law of the SDE initial condition. `stationary` is the Gaussian law with
/// the stationary variances.
pub fn initial_law(spec: &str, n: usize, params: &ModelParams) -> Result<InitialLaw, UsageError> {
    let s = spec.trim();
    let (random, inner) = match s.strip_prefix("gauss:") {
        Some(inner) => (true, inner),
        None => (s == "stationary", s),
    };
    let v = entries("--x0", inner, n, params)?;
    if random {
        if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(bad("--x0", spec, "variances must be finite and nonnegative"));
        }
        Ok(InitialLaw::Gaussian { variances: v })
    } else {
        StateVector::new(v).map(InitialLaw::Deterministic).map_err(|e| bad("--x0", spec, e))
    }
}

/// Second moments for the forward solve. A Gaussian law contributes its
/// variances.
pub fn second_moments(spec: &str, n: usize, params: &ModelParams) -> Result<MomentVector, UsageError> {
    let s = spec.trim();
    let inner = s.strip_prefix("gauss:").unwrap_or(s);
    let v = entries("--u0", inner, n, params)?;
    MomentVector::new(v).map_err(|e| bad("--u0", spec, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ModelParams {
        ModelParams::new(2.0, 1.0).unwrap()
    }

    #[test]
    fn forms() {
        assert_eq!(second_moments("e2", 4, &p()).unwrap().as_slice(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(second_moments("zero", 3, &p()).unwrap().as_slice(), &[0.0; 3]);
        assert_eq!(second_moments("geom:2:0.5", 3, &p()).unwrap().as_slice(), &[1.0, 0.5, 0.25]);
        assert_eq!(second_moments("1,0.5", 3, &p()).unwrap().as_slice(), &[1.0, 0.5, 0.0]);
        let s = second_moments("stationary", 2, &p()).unwrap();
        assert!((s.mode(1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(second_moments("gauss:e1", 3, &p()).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn laws() {
        assert!(matches!(initial_law("e1", 3, &p()).unwrap(), InitialLaw::Deterministic(_)));
        assert!(matches!(initial_law("stationary", 3, &p()).unwrap(), InitialLaw::Gaussian { .. }));
        match initial_law("gauss:geom:1:0.5", 3, &p()).unwrap() {
            InitialLaw::Gaussian { variances } => assert_eq!(variances, vec![0.5, 0.25, 0.125]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(initial_law("-1,2", 3, &p()).unwrap(), InitialLaw::Deterministic(_)));
    }

    #[test]
    fn errors_name_the_flag() {
        let e = second_moments("e9", 4, &p()).unwrap_err();
        assert!(e.0.contains("--u0"), "{}", e.0);
        assert!(second_moments("geom:1", 4, &p()).is_err());
        assert!(second_moments("-1", 4, &p()).is_err());
        assert!(initial_law("gauss:-1,1", 3, &p()).is_err());
        assert!(initial_law("1,2,3,4", 3, &p()).is_err());
        assert!(initial_law("bogus", 3, &p()).is_err());
    }
}
