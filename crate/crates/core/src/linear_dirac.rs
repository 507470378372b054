//! The free equation `Dψ = 0` and the massive equation `iDψ = λψ` for
//! untwisted spinor fields, with their energy functionals.
//!
//! In the chiral representation `Dψ = γ_t∂_tψ − γ_x∂_xψ` has components
//! `((∂_t − ∂_x)v, (∂_t + ∂_x)u)`, so `u` moves right and `v` moves left at
//! unit speed, and the mass term couples them through `i(∂_t + ∂_x)u = λv`,
//! `i(∂_t − ∂_x)v = λu`.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // unused only when std is in the build graph
use num_traits::Float;

use crate::clifford::{self, Spinor};
use crate::grid::{check_cfl, Field, Grid, History, StepError};
use crate::math;

/// Characteristic transport over one step with `dt = dx`: every `u` moves one
/// cell right, every `v` one cell left. Works for any number of components
/// per point. No arithmetic is performed on the values.
pub fn transport(psi: &Field<Spinor>) -> Field<Spinor> {
    let grid = *psi.grid();
    let n = grid.cells();
    let d = psi.dim();
    let src = psi.values();
    let mut out = Vec::with_capacity(src.len());
    for i in 0..n {
        let left = (i + n - 1) % n * d;
        let right = (i + 1) % n * d;
        for c in 0..d {
            out.push(Spinor::new(src[left + c].u, src[right + c].v));
        }
    }
    Field::from_values_unchecked(grid, d, out)
}

pub fn free_transport_step(psi: &Field<Spinor>) -> Field<Spinor> {
    transport(psi)
}

/// Exact flow of `i u' = λv, i v' = λu` for time `tau`.
#[inline]
pub fn mass_rotation(s: Spinor, lambda: f64, tau: f64) -> Spinor {
    let (sin, cos) = math::sin_cos(lambda * tau);
    let mi_sin = Complex64::new(0.0, -sin);
    Spinor::new(s.u * cos + s.v * mi_sin, s.v * cos + s.u * mi_sin)
}

pub fn rotate_field(psi: &Field<Spinor>, lambda: f64, tau: f64) -> Field<Spinor> {
    psi.map(|s| mass_rotation(s, lambda, tau))
}

/// Strang step for `iDψ = λψ`: half mass rotation, transport, half rotation.
pub fn massive_step(psi: &Field<Spinor>, lambda: f64, dt: f64) -> Result<Field<Spinor>, StepError> {
    check_cfl(psi.grid(), dt)?;
    if lambda == 0.0 {
        return Ok(transport(psi));
    }
    let half = rotate_field(psi, lambda, 0.5 * dt);
    Ok(rotate_field(&transport(&half), lambda, 0.5 * dt))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlaneWaveError {
    /// `mode = 0` with `λ = 0`: the symbol vanishes and no direction is selected.
    Degenerate,
}

/// Exact solution `ψ(t,x) = e^{i(kx − ωt)} χ` of `iDψ = λψ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneWave {
    pub k: f64,
    pub omega: f64,
    pub chi: Spinor,
}

impl PlaneWave {
    /// `k = 2π·mode/L`, `ω = branch·√(k² + λ²)`, `χ` the unit eigenvector of
    /// the symbol `[[k, λ], [λ, −k]]` for eigenvalue `ω`.
    pub fn new(length: f64, mode: i64, lambda: f64, branch: i8) -> Result<Self, PlaneWaveError> {
        if mode == 0 && lambda == 0.0 {
            return Err(PlaneWaveError::Degenerate);
        }
        let k = 2.0 * core::f64::consts::PI * mode as f64 / length;
        let sign = if branch < 0 { -1.0 } else { 1.0 };
        let omega = sign * (k * k + lambda * lambda).sqrt();
        // Both candidate vectors solve the eigen-equation; keep the better conditioned one.
        let a = (lambda, omega - k);
        let b = (omega + k, lambda);
        let na = a.0 * a.0 + a.1 * a.1;
        let nb = b.0 * b.0 + b.1 * b.1;
        let (p, q, nrm) = if na >= nb {
            (a.0, a.1, na.sqrt())
        } else {
            (b.0, b.1, nb.sqrt())
        };
        Ok(Self {
            k,
            omega,
            chi: Spinor::from_re(p / nrm, q / nrm),
        })
    }

    pub fn value(&self, t: f64, x: f64) -> Spinor {
        self.chi * math::cis(self.k * x - self.omega * t)
    }

    pub fn sample(&self, grid: Grid, t: f64) -> Field<Spinor> {
        Field::from_fn(grid, |x| self.value(t, x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhsModel {
    Free,
    Massive,
}

/// `γ_t∂_tψ − γ_x∂_xψ (+ iλψ)` at the middle level with centered stencils.
pub fn dirac_residual(h: &History<Spinor>, lambda: f64, model: RhsModel) -> Field<Spinor> {
    let dpsi_t = h.time_diff();
    let dpsi_x = h.mid.central_diff();
    let d = dpsi_t.zip_with(&dpsi_x, |a, b| clifford::gamma_t(a) - clifford::gamma_x(b));
    match model {
        RhsModel::Free => d,
        RhsModel::Massive => d.zip_with(&h.mid, |r, s| r + s.times_i() * lambda),
    }
}

/// Discrete `D` on a space-time torus of `levels` spaced by `dt`.
fn torus_dirac(levels: &[Field<Spinor>], dt: f64, n: usize) -> Field<Spinor> {
    let m = levels.len();
    let next = &levels[(n + 1) % m];
    let prev = &levels[(n + m - 1) % m];
    let dpsi_t = next.zip_with(prev, |a, b| (a - b) * (0.5 / dt));
    let dpsi_x = levels[n].central_diff();
    dpsi_t.zip_with(&dpsi_x, |a, b| clifford::gamma_t(a) - clifford::gamma_x(b))
}

fn torus_pairing(a: &[Field<Spinor>], b: &[Field<Spinor>]) -> Complex64 {
    a.iter()
        .zip(b)
        .flat_map(|(fa, fb)| fa.values().iter().zip(fb.values()))
        .map(|(&x, &y)| clifford::pairing(x, y))
        .sum()
}

/// `|Σ⟨ξ, Dψ⟩ + Σ⟨Dξ, ψ⟩|·dt·dx` over a periodic space-time sampling.
///
/// Both slices hold the same number of equally spaced time levels; the time
/// direction wraps around.
pub fn spacetime_pairing_defect(xi: &[Field<Spinor>], psi: &[Field<Spinor>], dt: f64) -> f64 {
    assert_eq!(xi.len(), psi.len(), "time level counts differ");
    assert!(xi.len() >= 3, "need at least three time levels");
    let d_psi: Vec<_> = (0..psi.len()).map(|n| torus_dirac(psi, dt, n)).collect();
    let d_xi: Vec<_> = (0..xi.len()).map(|n| torus_dirac(xi, dt, n)).collect();
    let dx = xi[0].grid().dx();
    math::modulus(torus_pairing(xi, &d_psi) + torus_pairing(&d_xi, psi)) * dt * dx
}

/// `|ψ|²_β` summed over the components at each point.
pub fn beta_density(psi: &Field<Spinor>) -> Field<f64> {
    psi.map_points(|p| p.iter().map(|&s| clifford::beta_sq(s)).sum())
}

/// `⟨∂_x·ψ, ψ⟩` summed over the components at each point.
pub fn chirality_density(psi: &Field<Spinor>) -> Field<f64> {
    psi.map_points(|p| p.iter().map(|&s| clifford::chirality(s)).sum())
}

/// `E1 = ½∫|ψ|²_β`.
pub fn e1(psi: &Field<Spinor>) -> f64 {
    0.5 * beta_density(psi).integrate()
}

/// `E4 = ∫(|ψ|⁴_β + ⟨∂_x·ψ,ψ⟩²)`.
pub fn e4(psi: &Field<Spinor>) -> f64 {
    beta_density(psi)
        .zip_with(&chirality_density(psi), |r, w| r * r + w * w)
        .integrate()
}

/// Wave energy `½∫((∂_tf)² + (∂_xf)²)` of a scalar history.
pub fn wave_energy(h: &History<f64>) -> f64 {
    let ft = h.time_diff();
    let fx = h.mid.central_diff();
    0.5 * ft.zip_with(&fx, |a, b| a * a + b * b).integrate()
}

/// `E2`: wave energy of `|ψ|²_β`.
pub fn e2(h: &History<Spinor>) -> f64 {
    wave_energy(&h.map(beta_density))
}

/// `½(|∇_tψ|²_β + |∇_xψ|²_β)` at the middle level, summed over components.
pub fn gradient_density(h: &History<Spinor>) -> Field<f64> {
    let pt = h.time_diff();
    let px = h.mid.central_diff();
    pt.zip_with(&px, |a, b| 0.5 * (a.norm_sqr() + b.norm_sqr()))
        .map_points(|p| p.iter().sum())
}

/// `E3 = ∫e(ψ)` with `e(ψ) = ½(|∇_tψ|²_β + |∇_xψ|²_β)`.
pub fn e3(h: &History<Spinor>) -> f64 {
    gradient_density(h).integrate()
}

/// `E5`: wave energy of `e(ψ)`; needs five consecutive levels.
pub fn e5(levels: [&Field<Spinor>; 5], dt: f64) -> f64 {
    let e = |a: usize| {
        let h = History::new(
            levels[a].clone(),
            levels[a + 1].clone(),
            levels[a + 2].clone(),
            dt,
        )
        .expect("consistent levels");
        gradient_density(&h)
    };
    let h = History::new(e(0), e(1), e(2), dt).expect("consistent levels");
    wave_energy(&h)
}

/// `½∫(|∇_tψ|²_β + |∇_xψ|²_β + s·λ²|ψ|²_β)`; `s = +1` is the Klein–Gordon
/// energy conserved by `iDψ = λψ`, `s = −1` the opposite-sign variant.
pub fn e6(h: &History<Spinor>, lambda: f64, mass_sign: f64) -> f64 {
    let grad = gradient_density(h).integrate();
    grad + 0.5 * mass_sign * lambda * lambda * beta_density(&h.mid).integrate()
}

/// Pointwise `(∂_t|ψ|²_β − ∂_x⟨∂_x·ψ,ψ⟩, ∂_t⟨∂_x·ψ,ψ⟩ − ∂_x|ψ|²_β)`; both vanish
/// for free solutions.
pub fn current_identity_residuals(h: &History<Spinor>) -> (Field<f64>, Field<f64>) {
    let rho = h.map(beta_density);
    let w = h.map(chirality_density);
    let a = rho
        .time_diff()
        .zip_with(&w.mid.central_diff(), |p, q| p - q);
    let b = w
        .time_diff()
        .zip_with(&rho.mid.central_diff(), |p, q| p - q);
    (a, b)
}
