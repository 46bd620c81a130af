//! Nonnegative numbers stored by their natural logarithm.
//!
//! Boltzmann weights such as `exp(-(N-1) W)` with `W = 30, N = 50` sit far
//! below the smallest subnormal `f64`, so populations, degeneracies and Gibbs
//! weights are carried as logarithms and only brought back to the linear
//! domain once they are known to be representable.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign};

/// A nonnegative real `exp(ln)`; zero is `ln = -inf`.
#[derive(Clone, Copy, Default, PartialEq)]
pub struct LogScalar {
    ln: f64,
}

impl LogScalar {
    pub const ZERO: LogScalar = LogScalar {
        ln: f64::NEG_INFINITY,
    };
    pub const ONE: LogScalar = LogScalar { ln: 0.0 };

    /// Builds from a linear value. Negative or NaN input panics.
    pub fn from_f64(value: f64) -> Self {
        assert!(value >= 0.0, "LogScalar requires a nonnegative value, got {value}");
        LogScalar { ln: value.ln() }
    }

    pub fn from_ln(ln: f64) -> Self {
        assert!(!ln.is_nan(), "LogScalar log-value is NaN");
        LogScalar { ln }
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    pub fn to_f64(self) -> f64 {
        self.ln.exp()
    }

    pub fn is_zero(self) -> bool {
        self.ln == f64::NEG_INFINITY
    }

    /// `self^k` for a nonnegative integer exponent, with `0^0 = 1`.
    pub fn powi(self, k: u64) -> Self {
        if k == 0 {
            LogScalar::ONE
        } else {
            LogScalar { ln: k as f64 * self.ln }
        }
    }

    /// `self - other`, or `None` when the difference would be negative.
    pub fn checked_sub(self, other: Self) -> Option<Self> {
        match self.ln.partial_cmp(&other.ln)? {
            Ordering::Less => None,
            Ordering::Equal => Some(LogScalar::ZERO),
            Ordering::Greater if other.is_zero() => Some(self),
            Ordering::Greater => Some(LogScalar {
                ln: self.ln + ln_one_minus_exp(other.ln - self.ln),
            }),
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self.ln >= other.ln {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self.ln <= other.ln {
            self
        } else {
            other
        }
    }
}

impl fmt::Debug for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "LogScalar(0)")
        } else {
            write!(f, "LogScalar(exp({}))", self.ln)
        }
    }
}

impl PartialOrd for LogScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ln.partial_cmp(&other.ln)
    }
}

impl Add for LogScalar {
    type Output = LogScalar;

    fn add(self, rhs: Self) -> Self::Output {
        LogScalar {
            ln: log_add_exp(self.ln, rhs.ln),
        }
    }
}

impl AddAssign for LogScalar {
    fn add_assign(&mut self, rhs: Self) {
        self.ln = log_add_exp(self.ln, rhs.ln);
    }
}

impl Mul for LogScalar {
    type Output = LogScalar;

    fn mul(self, rhs: Self) -> Self::Output {
        if self.is_zero() || rhs.is_zero() {
            LogScalar::ZERO
        } else {
            LogScalar {
                ln: self.ln + rhs.ln,
            }
        }
    }
}

impl MulAssign for LogScalar {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl Div for LogScalar {
    type Output = LogScalar;

    fn div(self, rhs: Self) -> Self::Output {
        assert!(!rhs.is_zero(), "LogScalar division by zero");
        if self.is_zero() {
            LogScalar::ZERO
        } else {
            LogScalar {
                ln: self.ln - rhs.ln,
            }
        }
    }
}

impl std::iter::Sum for LogScalar {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        LogScalar {
            ln: ln_sum_exp(iter.map(|v| v.ln)),
        }
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln(1 - exp(x))` for `x <= 0`.
pub fn ln_one_minus_exp(x: f64) -> f64 {
    debug_assert!(x <= 0.0);
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Stable `ln(sum(exp(x_i)))`; an empty input gives `-inf`.
pub fn ln_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let scaled = neumaier_sum(values.iter().map(|v| (v - max).exp()));
    max + scaled.ln()
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    statrs::function::factorial::ln_binomial(n, k)
}

/// `x ln x` with the continuous extension `0 ln 0 = 0`.
pub fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn zero_absorbs_multiplication() {
        let big = LogScalar::from_ln(1e6);
        assert!((LogScalar::ZERO * big).is_zero());
        assert!((big * LogScalar::ZERO).is_zero());
        assert_eq!((LogScalar::ZERO + big).ln(), 1e6);
    }

    #[test]
    fn handles_magnitudes_far_below_f64() {
        // exp(-1470) underflows f64 but sums fine in the log domain.
        let a = LogScalar::from_ln(-49.0 * 30.0);
        let b = LogScalar::from_ln(-50.0 * 30.0);
        assert_eq!(a.to_f64(), 0.0);
        let s = a + b;
        assert!(rel_close(s.ln(), -1470.0 + (-30.0f64).exp().ln_1p(), 1e-15));
    }

    #[test]
    fn checked_sub_behaviour() {
        let three = LogScalar::from_f64(3.0);
        let one = LogScalar::from_f64(1.0);
        assert!(rel_close(three.checked_sub(one).unwrap().to_f64(), 2.0, 1e-15));
        assert!(one.checked_sub(three).is_none());
        assert!(one.checked_sub(one).unwrap().is_zero());
        assert_eq!(one.checked_sub(LogScalar::ZERO).unwrap(), one);
    }

    #[test]
    fn powi_zero_exponent_is_one() {
        assert_eq!(LogScalar::ZERO.powi(0), LogScalar::ONE);
        assert!(LogScalar::ZERO.powi(3).is_zero());
    }

    #[test]
    fn binomials() {
        assert_eq!(ln_binomial(5, 0), 0.0);
        assert!(rel_close(ln_binomial(5, 2), 10f64.ln(), 1e-14));
        assert!(rel_close(ln_binomial(50, 25).exp(), 126_410_606_437_752.0, 1e-12));
        assert_eq!(ln_binomial(3, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn ln_sum_exp_of_empty_and_zero() {
        assert_eq!(ln_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
        assert_eq!(ln_sum_exp(vec![f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn linear_round_trip(x in 1e-300f64..1e300) {
            let back = LogScalar::from_f64(x).to_f64();
            prop_assert!(rel_close(back, x, 1e-12));
        }

        #[test]
        fn addition_matches_linear(a in 0.0f64..1e3, b in 0.0f64..1e3) {
            let s = (LogScalar::from_f64(a) + LogScalar::from_f64(b)).to_f64();
            prop_assert!(rel_close(s, a + b, 1e-13));
        }

        #[test]
        fn product_matches_linear(a in 1e-100f64..1e100, b in 1e-100f64..1e100) {
            let p = (LogScalar::from_f64(a) * LogScalar::from_f64(b)).to_f64();
            prop_assert!(rel_close(p, a * b, 1e-12));
        }
    }
}
