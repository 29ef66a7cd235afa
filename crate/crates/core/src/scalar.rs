//! Scalar abstraction for soft messages.
//!
//! All soft-decision code (trellis, TA decoder, min-sum baselines) is written
//! against [`Real`] so the same kernels run in `f32` or `f64`.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point type usable for LLR arithmetic.
pub trait Real:
    'static
    + Copy
    + Send
    + Sync
    + Default
    + Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Clamps into `[-bound, bound]`; NaN maps to zero.
    #[inline]
    fn clip(self, bound: Self) -> Self {
        if self.is_nan() {
            Self::zero()
        } else if self > bound {
            bound
        } else if self < -bound {
            -bound
        } else {
            self
        }
    }

    /// Sign with `sgn(0) = +1`.
    #[inline]
    fn sgn(self) -> Self {
        if self < Self::zero() {
            -Self::one()
        } else {
            Self::one()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Symmetric clip applied to every metric and message.
pub const LLR_MAX: f64 = 30.0;

/// `ln((1 - q) / q)`, clipped to `±LLR_MAX`.
pub fn prob_to_llr(q: f64) -> f64 {
    if q <= 0.0 {
        return LLR_MAX;
    }
    if q >= 1.0 {
        return -LLR_MAX;
    }
    ((1.0 - q) / q).ln().clamp(-LLR_MAX, LLR_MAX)
}

/// Probability that exactly one of two independent events fires.
#[inline]
pub fn xor_combine(a: f64, b: f64) -> f64 {
    a + b - 2.0 * a * b
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn llr_of_tenth_is_ln9() {
        assert!((prob_to_llr(0.1) - 9f64.ln()).abs() < 1e-12);
        assert_eq!(prob_to_llr(0.0), LLR_MAX);
    }

    #[test]
    fn softplus_matches_naive() {
        for &x in &[-20.0f64, -1.0, 0.0, 0.5, 3.0, 25.0] {
            assert!((softplus(x) - (1.0 + x.exp()).ln()).abs() < 1e-12);
        }
        assert!(softplus(800.0f64).is_finite());
    }

    #[test]
    fn sgn_of_zero_is_positive() {
        assert_eq!(0.0f32.sgn(), 1.0);
        assert_eq!((-0.5f64).sgn(), -1.0);
        assert_eq!(f64::NAN.clip(3.0), 0.0);
        assert_eq!(50f32.clip(30.0), 30.0);
    }
}
