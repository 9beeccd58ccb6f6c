use crate::scalar::Real;

/// Complementary error function, `1 − erf(x)`.
pub fn erfc<T: Real>(x: T) -> T {
    T::of(libm::erfc(x.f64()))
}
