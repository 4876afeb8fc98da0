//! Scalar abstraction shared by every numeric container in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into the scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerically exact for `a == b`, which keeps constant fields constant.
#[inline]
pub(crate) fn lerp<T: Real>(a: T, b: T, t: T) -> T {
    a + (b - a) * t
}

/// Running mean that reproduces a constant sequence bit-exactly.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RunningMean<T> {
    pub mean: T,
    pub count: usize,
}

impl<T: Real> RunningMean<T> {
    pub fn new() -> Self {
        Self { mean: T::zero(), count: 0 }
    }

    #[inline]
    pub fn push(&mut self, v: T) {
        self.count += 1;
        if self.count == 1 {
            self.mean = v;
        } else {
            self.mean += (v - self.mean) / T::lit(self.count as f64);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_mean_of_constant_is_exact() {
        let mut m = RunningMean::<f64>::new();
        for _ in 0..16 {
            m.push(0.1);
        }
        assert_eq!(m.mean, 0.1);
    }

    #[test]
    fn lerp_endpoints() {
        assert_eq!(lerp(0.3f64, 0.3, 0.77), 0.3);
        assert_eq!(lerp(1.0f32, 3.0, 0.5), 2.0);
    }
}
