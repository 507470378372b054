//! Seeded, band-limited initial data.
//!
//! A [`FourierSeries`] is drawn once from `(seed, stream, modes)` and then
//! sampled on any grid, so refinement studies see the same continuous function
//! at every resolution.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // unused only when std is in the build graph
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clifford::Spinor;
use crate::grid::{Field, Grid};
use crate::math;

/// Deterministic generator for stream `stream` of run seed `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `f(x) = Σ_{|k| ≤ K} c_k e^{2πikx/L}` with coefficients decaying like `1/(1+k²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries {
    length: f64,
    modes: usize,
    coeffs: Vec<Complex64>,
}

impl FourierSeries {
    pub fn random(rng: &mut ChaCha8Rng, length: f64, modes: usize, amplitude: f64) -> Self {
        let mut coeffs = Vec::with_capacity(2 * modes + 1);
        for j in 0..=2 * modes {
            let k = j as f64 - modes as f64;
            let decay = amplitude / (1.0 + k * k);
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            coeffs.push(Complex64::new(re, im) * decay);
        }
        Self {
            length,
            modes,
            coeffs,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    fn wavenumber(&self, j: usize) -> f64 {
        2.0 * core::f64::consts::PI * (j as f64 - self.modes as f64) / self.length
    }

    /// `order`-th x-derivative at `x`.
    pub fn eval_derivative(&self, x: f64, order: u32) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in self.coeffs.iter().enumerate() {
            let k = self.wavenumber(j);
            let factor = Complex64::new(0.0, k).powu(order);
            acc += c * factor * math::cis(k * x);
        }
        acc
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.eval_derivative(x, 0)
    }
}

/// Mode count actually used on `grid`: at most `N/8` so the data stay resolved.
pub fn resolved_modes(grid: &Grid, requested: usize) -> usize {
    requested.min(grid.cells() / 8).max(1)
}

/// Smooth random spinor field with `dim` components per point.
///
/// Each of the `2·dim` complex component functions is an independent series
/// on its own RNG stream.
pub fn random_spinor_field(
    grid: Grid,
    dim: usize,
    seed: u64,
    modes: usize,
    amplitude: f64,
) -> Field<Spinor> {
    let series = spinor_series(grid.length(), dim, seed, modes, amplitude);
    Field::from_fn_multi(grid, dim, |x, c| {
        Spinor::new(series[2 * c].eval(x), series[2 * c + 1].eval(x))
    })
}

/// The series behind [`random_spinor_field`], for callers that need exact derivatives.
pub fn spinor_series(
    length: f64,
    dim: usize,
    seed: u64,
    modes: usize,
    amplitude: f64,
) -> Vec<FourierSeries> {
    (0..2 * dim)
        .map(|s| FourierSeries::random(&mut rng(seed, s as u64), length, modes, amplitude))
        .collect()
}

/// Real smooth random field with `dim` components, streams offset by `stream0`.
pub fn random_real_field(
    grid: Grid,
    dim: usize,
    seed: u64,
    stream0: u64,
    modes: usize,
    amplitude: f64,
) -> Field<f64> {
    let series: Vec<FourierSeries> = (0..dim)
        .map(|s| {
            FourierSeries::random(
                &mut rng(seed, stream0 + s as u64),
                grid.length(),
                modes,
                amplitude,
            )
        })
        .collect();
    Field::from_fn_multi(grid, dim, |x, c| series[c].eval(x).re)
}

/// Smooth bump `amplitude · exp(−(d/width)²)` with `d` the periodic distance to `center`.
pub fn periodic_bump(length: f64, center: f64, width: f64, amplitude: f64, x: f64) -> f64 {
    let mut d = (x - center) % length;
    if d > 0.5 * length {
        d -= length;
    } else if d < -0.5 * length {
        d += length;
    }
    amplitude * math::exp(-(d / width) * (d / width))
}
