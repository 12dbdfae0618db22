//! Scalar abstraction shared by the geometry, metric and statistics code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wraps an angle into `[-pi, pi)`.
/// Angles already in range are returned unchanged, bit for bit.
pub fn wrap_angle<T: Real>(angle: T) -> T {
    if angle >= -T::PI() && angle < T::PI() {
        return angle;
    }
    let two_pi = T::PI() + T::PI();
    let shifted = (angle + T::PI()) % two_pi;
    let shifted = if shifted < T::zero() { shifted + two_pi } else { shifted };
    let wrapped = shifted - T::PI();
    // `% two_pi` can land exactly on two_pi after the correction above.
    if wrapped >= T::PI() {
        wrapped - two_pi
    } else {
        wrapped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        for &a in &[0.0, PI, -PI, 3.0 * PI, -3.5 * PI, 7.25, -0.1] {
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w), "{a} -> {w}");
            let k = ((a - w) / (2.0 * PI)).round();
            assert!((a - w - k * 2.0 * PI).abs() < 1e-12);
        }
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(0.6996f64).to_bits(), 0.6996f64.to_bits());
    }

    #[test]
    fn wrap_angle_f32() {
        let w = wrap_angle(4.0f32);
        assert!((w - (4.0 - 2.0 * std::f32::consts::PI)).abs() < 1e-6);
    }
}
