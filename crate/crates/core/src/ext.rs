//! Extended nonnegative reals.
//!
//! Entropy values, perspective functions and transport costs live in
//! `[0, +inf]`. Plain `f64` gets `0 * inf = NaN` wrong for our purposes: an
//! atom of zero mass at infinite cost contributes nothing, so [`ExtReal`]
//! multiplies with the convention `0 * inf = 0`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal(0.0);
    pub const INFINITY: ExtReal = ExtReal(f64::INFINITY);

    /// Wraps a value; NaN is rejected by a debug assertion.
    pub fn new(v: f64) -> Self {
        debug_assert!(!v.is_nan(), "ExtReal cannot hold NaN");
        ExtReal(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// Finite value or `None`.
    pub fn finite(self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }

    pub fn min(self, other: ExtReal) -> ExtReal {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// `x^a` with `inf^a = inf` for `a > 0`.
    pub fn powf(self, a: f64) -> ExtReal {
        ExtReal(self.0.powf(a))
    }
}

/// Product with the measure-theoretic convention `0 * inf = 0`.
pub fn ext_mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::new(v)
    }
}

impl From<ExtReal> for f64 {
    fn from(v: ExtReal) -> Self {
        v.0
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        ExtReal(self.0 + rhs.0)
    }
}

impl AddAssign for ExtReal {
    fn add_assign(&mut self, rhs: ExtReal) {
        self.0 += rhs.0;
    }
}

impl Mul for ExtReal {
    type Output = ExtReal;
    fn mul(self, rhs: ExtReal) -> ExtReal {
        ExtReal(ext_mul(self.0, rhs.0))
    }
}

impl Mul<f64> for ExtReal {
    type Output = ExtReal;
    fn mul(self, rhs: f64) -> ExtReal {
        ExtReal(ext_mul(self.0, rhs))
    }
}

impl std::iter::Sum for ExtReal {
    fn sum<I: Iterator<Item = ExtReal>>(iter: I) -> ExtReal {
        iter.fold(ExtReal::ZERO, |acc, x| acc + x)
    }
}

impl fmt::Debug for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.0, f)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "+inf")
        } else {
            fmt::Display::fmt(&self.0, f)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_times_infinity_is_zero() {
        assert_eq!(ExtReal::ZERO * ExtReal::INFINITY, ExtReal::ZERO);
        assert_eq!(ExtReal::INFINITY * 0.0, ExtReal::ZERO);
        assert_eq!(ext_mul(0.0, f64::INFINITY), 0.0);
    }

    #[test]
    fn ordering_and_sum() {
        let xs = [ExtReal::new(1.0), ExtReal::new(2.5)];
        assert_eq!(xs.iter().copied().sum::<ExtReal>(), ExtReal::new(3.5));
        assert!(ExtReal::new(1e300) < ExtReal::INFINITY);
        assert_eq!(ExtReal::new(2.0).min(ExtReal::INFINITY), ExtReal::new(2.0));
        assert!((ExtReal::INFINITY + ExtReal::new(1.0)).is_infinite());
    }
}
