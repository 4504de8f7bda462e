//! Scalar abstraction shared by every numerical kernel in the crate.
//!
//! All math is written against [`Real`], a real floating-point type that
//! nalgebra can factorize. Complex quantities are `Complex<T>` on top of it.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` literal or parameter into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 value representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex sample over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

/// Unit phasor `e^{j·phase}` with the phase evaluated in `f64`.
///
/// Dictionary phases are large multiples of 2π; reducing them in double
/// precision keeps `f32` dictionaries accurate too.
#[inline]
pub fn cis<T: Real>(phase: f64) -> Cplx<T> {
    let (s, c) = phase.sin_cos();
    Complex::new(T::of(c), T::of(s))
}

#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> Cplx<T> {
    Complex::new(T::of(re), T::of(im))
}

#[inline]
pub fn czero<T: Real>() -> Cplx<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> Cplx<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn creal<T: Real>(x: T) -> Cplx<T> {
    Complex::new(x, T::zero())
}

/// Modulus of a complex sample.
#[inline]
pub fn cabs<T: Real>(z: Cplx<T>) -> T {
    nalgebra::ComplexField::modulus(z)
}
