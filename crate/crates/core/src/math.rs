//! Transcendental functions through `libm`, so results are identical whether
//! or not `std` (and its platform math library) is linked.

use num_complex::Complex64;

pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

pub fn sin_cos(x: f64) -> (f64, f64) {
    libm::sincos(x)
}

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// `|z|`.
pub fn modulus(z: Complex64) -> f64 {
    libm::hypot(z.re, z.im)
}

/// `e^{iθ}`.
pub fn cis(theta: f64) -> Complex64 {
    let (s, c) = sin_cos(theta);
    Complex64::new(c, s)
}
