//! Scalar abstraction shared by every numeric module.
//!
//! All math is written against [`Real`], implemented for `f32` and `f64`.
//! The crate root re-exports `f64` aliases for the common types.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FloatConst, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating point scalar: f32 or f64.
pub trait Real:
    RealField + Copy + FloatConst + ToPrimitive + Serialize + DeserializeOwned
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over [`Real`].
pub type Cx<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    lit(n as f64)
}

/// `e^{jθ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Cx<T> {
    Complex::new(theta.cos(), theta.sin())
}

#[inline]
pub fn cabs<T: Real>(z: Cx<T>) -> T {
    z.re.hypot(z.im)
}

#[inline]
pub fn carg<T: Real>(z: Cx<T>) -> T {
    z.im.atan2(z.re)
}

#[inline]
pub fn cx<T: Real>(re: T, im: T) -> Cx<T> {
    Complex::new(re, im)
}

#[inline]
pub fn czero<T: Real>() -> Cx<T> {
    Complex::new(T::zero(), T::zero())
}

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let two_pi = T::two_pi();
    let mut w = theta % two_pi;
    if w < T::zero() {
        w += two_pi;
    }
    if w >= two_pi {
        w -= two_pi;
    }
    w
}

/// dBm to linear milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Round half away from zero.
pub fn round_half_away<T: Real>(x: T) -> T {
    x.round()
}
