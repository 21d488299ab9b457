//! Scalar abstraction: the numeric kernels are generic over `f32`/`f64`.

/// Floating-point scalar usable by every numeric kernel in this crate.
pub trait Real: nalgebra::RealField + num_traits::FromPrimitive + Copy {}

impl<T> Real for T where T: nalgebra::RealField + num_traits::FromPrimitive + Copy {}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite f64 constant")
}
