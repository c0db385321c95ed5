//! Online statistics used by both detectors.

use serde::{Deserialize, Serialize};

/// Welford running statistics: mean, population variance, min, max, count.
///
/// Population variance (M2/n, not M2/(n-1)): the samples ARE the modeled
/// distribution, not a draw from a larger one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        RunningStats {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.push_weighted(x, 1.0);
    }

    /// Adds `x` with frequency weight `w`, equivalent to pushing it `w`
    /// times (exclusive of rounding differences).
    pub fn push_weighted(&mut self, x: f64, w: f64) {
        debug_assert!(w > 0.0, "weight must be positive");
        let n_new = self.n as f64 + w;
        let delta = x - self.mean;
        self.mean += delta * (w / n_new);
        self.m2 += w * delta * (x - self.mean);
        self.n += w as u64;
        if x < self.min {
            self.min = x;
        }
        if x > self.max {
            self.max = x;
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Mean of the samples; 0 when empty.
    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.mean
        }
    }

    /// Population variance M2/n; 0 when fewer than two samples.
    ///
    /// Clamped at zero: M2 can round to a tiny negative when all samples are
    /// equal.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

impl Default for RunningStats {
    fn default() -> Self {
        Self::new()
    }
}
