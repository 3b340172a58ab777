//! Order-fixed reductions and interval estimates.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Sum with a fixed binary-tree association, so results do not depend on how
/// the input was produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    /// Two-pass mean and standard error (`s / sqrt(n)`).
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = pairwise_sum(values) / n as f64;
        if n == 1 {
            return Self { mean, se: f64::INFINITY, n };
        }
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Self {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        }
    }

    pub fn variance(&self) -> f64 {
        self.se * self.se * self.n as f64
    }

    /// Whether `reference` lies within `k` standard errors (plus an absolute
    /// floor) of the mean.
    pub fn covers(&self, reference: f64, k: f64, floor: f64) -> bool {
        (self.mean - reference).abs() <= k * self.se + floor
    }
}

/// A proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub point: f64,
    pub low: f64,
    pub high: f64,
}

impl Proportion {
    pub fn wilson(successes: u64, trials: u64, z: f64) -> Self {
        assert!(trials > 0, "empty sample");
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Self {
            successes,
            trials,
            point: p,
            low: if successes == 0 { 0.0 } else { (centre - half).max(0.0) },
            high: if successes == trials { 1.0 } else { (centre + half).min(1.0) },
        }
    }

    /// Largest distance from the point estimate to an interval end.
    pub fn half_width(&self) -> f64 {
        (self.point - self.low).max(self.high - self.point)
    }

    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn se(&self) -> f64 {
        (self.point * (1.0 - self.point) / self.trials as f64).sqrt()
    }
}
