//! Scalar abstraction shared by the charts, scorers and optimizer.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar usable throughout the crate (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant, panicking only for unrepresentable values.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Streaming log-sum-exp accumulator.
///
/// Negative infinity terms are skipped, so an accumulator that only saw
/// `-inf` (or nothing) yields `-inf` rather than NaN.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp<T> {
    max: T,
    sum: T,
}

impl<T: Scalar> Default for LogSumExp<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> LogSumExp<T> {
    pub fn new() -> Self {
        LogSumExp {
            max: T::neg_infinity(),
            sum: T::zero(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: T) {
        if x == T::neg_infinity() {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + T::one();
            self.max = x;
        }
    }

    #[inline]
    pub fn value(&self) -> T {
        if self.max == T::neg_infinity() {
            T::neg_infinity()
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `log(sum(exp(xs)))` over a slice.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let mut acc = LogSumExp::new();
    for &x in xs {
        acc.push(x);
    }
    acc.value()
}

/// In-place log-softmax. A row of all `-inf` is left untouched.
pub fn log_softmax_in_place<T: Scalar>(xs: &mut [T]) {
    let z = log_sum_exp(xs);
    if z == T::neg_infinity() {
        return;
    }
    for x in xs.iter_mut() {
        *x -= z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_naive() {
        let xs = [0.3f64, -1.2, 2.5, 0.0];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_handles_neg_infinity() {
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 1.5]), 1.5);
    }

    #[test]
    fn logsumexp_is_stable_for_large_inputs() {
        let v = log_sum_exp(&[1000.0f64, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-9);
        let v32 = log_sum_exp(&[-500.0f32, -500.0]);
        assert!(v32.is_finite());
    }

    #[test]
    fn log_softmax_normalizes() {
        let mut xs = [1.0f64, 2.0, 3.0];
        log_softmax_in_place(&mut xs);
        assert!(log_sum_exp(&xs).abs() < 1e-12);
    }
}
