//! Log-space weights and the two semirings used over lattices.
//!
//! Scores are natural-log probabilities (or additive log scores), so larger is
//! better. The log semiring sums path probabilities; the tropical semiring here
//! is the max-plus variant and keeps the best path score.

use std::ops::{Add, Mul};

/// A weight in natural-log space.
///
/// `+` is log-sum-exp, `*` is ordinary addition, the zero element is `-inf` and
/// the one element is `0.0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct LogWeight(pub f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn new(value: f64) -> Self {
        LogWeight(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl Add for LogWeight {
    type Output = LogWeight;

    fn add(self, rhs: LogWeight) -> LogWeight {
        LogWeight(log_add(self.0, rhs.0))
    }
}

// Semiring product is addition of log scores.
#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for LogWeight {
    type Output = LogWeight;

    fn mul(self, rhs: LogWeight) -> LogWeight {
        LogWeight(self.0 + rhs.0)
    }
}

impl std::iter::Sum for LogWeight {
    fn sum<I: Iterator<Item = LogWeight>>(iter: I) -> LogWeight {
        LogWeight(log_sum_exp(iter.map(|w| w.0)))
    }
}

/// `ln(exp(a) + exp(b))` in max-shifted form.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum(exp(x)))` over an iterator, max-shifted. Empty input gives `-inf`.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// How path scores are combined at a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Semiring {
    /// Log-sum-exp over paths: total probability.
    Log,
    /// Max over paths: best-path score.
    Tropical,
}

impl Semiring {
    pub fn plus(self, a: f64, b: f64) -> f64 {
        match self {
            Semiring::Log => log_add(a, b),
            Semiring::Tropical => a.max(b),
        }
    }

    pub fn zero(self) -> f64 {
        f64::NEG_INFINITY
    }
}
