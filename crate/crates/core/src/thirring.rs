//! The Thirring model `iDψ = λψ + κ·ε_j⟨ψ, e_j·ψ⟩ e_j·ψ`.
//!
//! Expanding the Clifford products in the chiral representation gives the
//! classical component form
//!
//! ```text
//! i(∂_t + ∂_x)u = λv + 2κ|v|²u
//! i(∂_t − ∂_x)v = λu + 2κ|u|²v
//! ```
//!
//! The spinor returned by [`thirring_rhs`] is ordered like `iDψ`, whose first
//! component is `i(∂_t − ∂_x)v`: it is `(λu + 2κ|u|²v, λv + 2κ|v|²u)`.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)] // unused only when std is in the build graph
use num_traits::Float;

use crate::clifford::{self, CliffordRep, Spinor, TangentVector};
use crate::grid::{box_residual, check_cfl, Field, Grid, History, StepError};
use crate::linear_dirac::{beta_density, chirality_density, mass_rotation, transport};

/// Real potential `V(|ψ|²_β, ⟨∂_x·ψ,ψ⟩)` multiplying the cubic term.
#[derive(Clone, Copy)]
pub struct Potential {
    pub name: &'static str,
    pub eval: fn(f64, f64) -> f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .finish()
    }
}

impl PartialEq for Potential {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

fn v_unit(_: f64, _: f64) -> f64 {
    1.0
}

fn v_saturating(rho: f64, _: f64) -> f64 {
    1.0 / (1.0 + rho)
}

fn v_chiral(rho: f64, w: f64) -> f64 {
    1.0 + 0.5 * (w * w) / (1.0 + rho * rho)
}

impl Potential {
    pub const BUILTIN: [Potential; 3] = [
        Potential {
            name: "unit",
            eval: v_unit,
        },
        Potential {
            name: "saturating",
            eval: v_saturating,
        },
        Potential {
            name: "chiral",
            eval: v_chiral,
        },
    ];

    pub fn by_name(name: &str) -> Option<Potential> {
        Self::BUILTIN.iter().copied().find(|p| p.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThirringParams {
    pub lambda: f64,
    pub kappa: f64,
    /// When present the equation is `iDψ = κV·ε_j⟨ψ,e_j·ψ⟩e_j·ψ`; `lambda`
    /// is still honoured but the identities for the potential variant assume 0.
    pub potential: Option<Potential>,
}

impl ThirringParams {
    pub fn new(lambda: f64, kappa: f64) -> Self {
        Self {
            lambda,
            kappa,
            potential: None,
        }
    }

    fn coupling(&self, s: Spinor) -> f64 {
        match self.potential {
            None => self.kappa,
            Some(p) => self.kappa * (p.eval)(clifford::beta_sq(s), clifford::chirality(s)),
        }
    }
}

/// `λψ + κ[⟨ψ,∂_t·ψ⟩∂_t·ψ − ⟨ψ,∂_x·ψ⟩∂_x·ψ]` through the representation matrices.
pub fn thirring_rhs_geometric(rep: &CliffordRep, s: Spinor, lambda: f64, kappa: f64) -> Spinor {
    let et = rep.clifford_mul(TangentVector::DT, s);
    let ex = rep.clifford_mul(TangentVector::DX, s);
    let ct = rep.indef_product(s, et);
    let cx = rep.indef_product(s, ex);
    s * lambda + (et * ct - ex * cx) * kappa
}

/// Component fast path of [`thirring_rhs_geometric`].
#[inline]
pub fn thirring_rhs_point(s: Spinor, lambda: f64, kappa: f64) -> Spinor {
    let uu = s.u.norm_sqr();
    let vv = s.v.norm_sqr();
    Spinor::new(
        s.u * lambda + s.v * (2.0 * kappa * uu),
        s.v * lambda + s.u * (2.0 * kappa * vv),
    )
}

pub fn thirring_rhs(psi: &Field<Spinor>, lambda: f64, kappa: f64) -> Field<Spinor> {
    psi.map(|s| thirring_rhs_point(s, lambda, kappa))
}

/// `(u', v')` of the local system `i u' = λv + 2κ|v|²u`, `i v' = λu + 2κ|u|²v`.
#[inline]
fn local_velocity(s: Spinor, params: &ThirringParams) -> Spinor {
    let k = params.coupling(s);
    let r = thirring_rhs_point(s, params.lambda, k);
    // r is ordered like iDψ: r.u drives v, r.v drives u.
    let mi = Complex64::new(0.0, -1.0);
    Spinor::new(r.v * mi, r.u * mi)
}

/// Zero-order substep over `tau`: the exact rotation when the equation is
/// linear, one explicit midpoint step otherwise.
pub fn local_substep(s: Spinor, params: &ThirringParams, tau: f64) -> Spinor {
    if params.kappa == 0.0 {
        return mass_rotation(s, params.lambda, tau);
    }
    let mid = s + local_velocity(s, params) * (0.5 * tau);
    s + local_velocity(mid, params) * tau
}

/// Strang step: half local substep, transport, half local substep.
pub fn thirring_step(
    psi: &Field<Spinor>,
    params: &ThirringParams,
    dt: f64,
) -> Result<Field<Spinor>, StepError> {
    check_cfl(psi.grid(), dt)?;
    let half = psi.map(|s| local_substep(s, params, 0.5 * dt));
    Ok(transport(&half).map(|s| local_substep(s, params, 0.5 * dt)))
}

/// Evolves `psi0` for `steps` steps and returns every level (including the first).
/// Stops early at the first level holding a non-finite value.
pub fn evolve(
    psi0: &Field<Spinor>,
    params: &ThirringParams,
    steps: usize,
) -> Result<Vec<Field<Spinor>>, StepError> {
    let dt = psi0.grid().dx();
    let mut levels = Vec::with_capacity(steps + 1);
    levels.push(psi0.clone());
    for _ in 0..steps {
        let next = thirring_step(levels.last().expect("nonempty"), params, dt)?;
        let bad = next.first_non_finite().is_some();
        levels.push(next);
        if bad {
            break;
        }
    }
    Ok(levels)
}

/// `⟨i∂_x·∂_t·ψ, ψ⟩ = 2 Im(ū v)` summed over components.
pub fn mixed_density(psi: &Field<Spinor>) -> Field<f64> {
    psi.map_points(|p| p.iter().map(|&s| clifford::mixed_density(s)).sum())
}

/// `□|ψ|²_β − c·∂_x⟨i∂_x·∂_t·ψ,ψ⟩` at the middle level. The identities of
/// the massive equation give `c = −2λ`; `c = 0` is the massless law.
pub fn box_rho_residual(h: &History<Spinor>, coefficient: f64) -> Field<f64> {
    let rho = h.map(beta_density);
    let rhs = mixed_density(&h.mid).central_diff().scale(coefficient);
    box_residual(&rho, Some(&rhs))
}

/// `∫(⅓|ψ|⁶_β + ⟨∂_x·ψ,ψ⟩²|ψ|²_β)`.
pub fn l6_functional(psi: &Field<Spinor>) -> f64 {
    beta_density(psi)
        .zip_with(&chirality_density(psi), |r, w| r * r * r / 3.0 + w * w * r)
        .integrate()
}

/// `∫ |ψ|²_β ⟨∂_x·ψ,ψ⟩ ⟨i∂_x·∂_t·ψ,ψ⟩`.
pub fn l6_source(psi: &Field<Spinor>) -> f64 {
    let rho = beta_density(psi);
    let w = chirality_density(psi);
    let s = mixed_density(psi);
    rho.zip_with(&w, |a, b| a * b)
        .zip_with(&s, |a, b| a * b)
        .integrate()
}

/// `d/dt ∫(⅓ρ³ + w²ρ) − sign·4λ∫ρ w s` at the middle level; the derived
/// identity holds with `sign = −1`.
pub fn l6_residual(h: &History<Spinor>, lambda: f64, sign: f64) -> f64 {
    let rate = (l6_functional(&h.next) - l6_functional(&h.prev)) / (2.0 * h.dt);
    rate - sign * 4.0 * lambda * l6_source(&h.mid)
}

/// `∫(|∇_tψ|²_β + |∇_xψ|²_β)` at the middle level.
pub fn h1_seminorm_sq(h: &History<Spinor>) -> f64 {
    2.0 * crate::linear_dirac::e3(h)
}

/// Bound on `sup_x |ψ|²_β` for the massless flow: `|u|²` and `|v|²` are
/// transported, so `max|u0|² + max|v0|²` dominates every later time. Written
/// through the densities as `max ½(ρ−w) + max ½(ρ+w)`.
pub fn massless_pointwise_bound(psi0: &Field<Spinor>) -> f64 {
    let rho = beta_density(psi0);
    let w = chirality_density(psi0);
    let right = rho.zip_with(&w, |r, w| 0.5 * (r - w)).max_value();
    let left = rho.zip_with(&w, |r, w| 0.5 * (r + w)).max_value();
    right + left
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScalingError {
    /// `r²T` is not a whole number of steps on the source grid.
    Incompatible {
        steps: f64,
    },
    NonPositive,
    Step(StepError),
}

impl fmt::Display for ScalingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalingError::Incompatible { steps } => {
                write!(f, "r²T/dx = {steps} is not an integer step count")
            }
            ScalingError::NonPositive => write!(f, "scale and time must be positive"),
            ScalingError::Step(e) => write!(f, "{e}"),
        }
    }
}

/// Compares `r·ψ(r²t, r²x)` at `t = T` against the evolution of `r·ψ0(r²·)`
/// on the grid of length `L/r²` (same cell count, so the samples coincide).
/// Returns the L² norm of the difference on the rescaled grid.
pub fn scaling_check(
    psi0: &Field<Spinor>,
    params: &ThirringParams,
    r: f64,
    t_final: f64,
) -> Result<f64, ScalingError> {
    if !(r > 0.0 && t_final > 0.0) {
        return Err(ScalingError::NonPositive);
    }
    let grid = *psi0.grid();
    let steps_f = r * r * t_final / grid.dx();
    let steps = steps_f.round();
    if (steps - steps_f).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(ScalingError::Incompatible { steps: steps_f });
    }
    let steps = steps as usize;
    let original = evolve(psi0, params, steps).map_err(ScalingError::Step)?;
    let small = Grid::new(grid.length() / (r * r), grid.cells()).expect("rescaled grid");
    let scaled0 = Field::from_values_unchecked(
        small,
        psi0.dim(),
        psi0.values().iter().map(|&s| s * r).collect(),
    );
    let scaled = evolve(&scaled0, params, steps).map_err(ScalingError::Step)?;
    let a = original.last().expect("nonempty");
    let b = scaled.last().expect("nonempty");
    let sq: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&p, &q)| (p * r - q).norm_sqr())
        .sum();
    Ok((small.dx() * sq).sqrt())
}

/// `∫|ψ_a − ψ_b|²_β` per step for the runs from `psi0` and `psi0 + delta`.
pub fn perturbation_growth(
    psi0: &Field<Spinor>,
    delta: &Field<Spinor>,
    params: &ThirringParams,
    steps: usize,
) -> Result<Vec<f64>, StepError> {
    let dt = psi0.grid().dx();
    let mut a = psi0.clone();
    let mut b = psi0.zip_with(delta, |p, q| p + q);
    let diff = |a: &Field<Spinor>, b: &Field<Spinor>| {
        beta_density(&a.zip_with(b, |p, q| p - q)).integrate()
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(diff(&a, &b));
    for _ in 0..steps {
        a = thirring_step(&a, params, dt)?;
        b = thirring_step(&b, params, dt)?;
        out.push(diff(&a, &b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::random_spinor_field;
    use crate::linear_dirac::massive_step;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spinor() -> impl Strategy<Value = Spinor> {
        prop::array::uniform4(-2.0..2.0f64).prop_map(|a| Spinor::new(c(a[0], a[1]), c(a[2], a[3])))
    }

    #[test]
    fn linear_limit() {
        let s = Spinor::new(c(0.3, 0.1), c(-0.2, 0.9));
        assert_eq!(thirring_rhs_point(s, 1.5, 0.0), s * 1.5);
    }

    #[test]
    fn pure_u_has_no_source() {
        let s = Spinor::from_re(1.0, 0.0);
        assert_eq!(thirring_rhs_point(s, 0.0, 1.0), Spinor::ZERO);
        let rep = CliffordRep::chiral();
        assert!(thirring_rhs_geometric(&rep, s, 0.0, 1.0).norm_sqr() < 1e-30);
    }

    proptest! {
        #[test]
        fn fast_path_matches_geometry(s in spinor(), lambda in -2.0..2.0f64, kappa in -2.0..2.0f64) {
            let rep = CliffordRep::chiral();
            let a = thirring_rhs_geometric(&rep, s, lambda, kappa);
            let b = thirring_rhs_point(s, lambda, kappa);
            prop_assert!(a.max_abs_diff(&b) <= 1e-12);
        }

        #[test]
        fn nonlinearity_pairs_to_a_real_number(s in spinor(), kappa in -2.0..2.0f64) {
            let n = thirring_rhs_point(s, 0.0, kappa);
            prop_assert!(clifford::pairing(n, s).im.abs() <= 1e-12);
        }
    }

    #[test]
    fn local_system_norm_error_is_high_order() {
        let p = ThirringParams::new(1.0, 1.0);
        let s = Spinor::new(c(0.6, 0.2), c(-0.3, 0.5));
        let err = |tau: f64| (local_substep(s, &p, tau).norm_sqr() - s.norm_sqr()).abs();
        // Per-step defect of the quadratic invariant is O(τ⁴) for the midpoint rule.
        let ratio = err(0.01) / err(0.005);
        assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn linear_reduction_matches_massive_step() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let psi = random_spinor_field(g, 1, 2, 4, 1.0);
        let a = thirring_step(&psi, &ThirringParams::new(0.8, 0.0), g.dx()).unwrap();
        let b = massive_step(&psi, 0.8, g.dx()).unwrap();
        assert!(a.zip_with(&b, |p, q| p - q).max_magnitude() <= 1e-12);
    }

    #[test]
    fn pure_right_mover_is_transported() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let psi = Field::from_fn(g, |x| Spinor::new(c(x.cos(), x.sin()) * 0.7, c(0.0, 0.0)));
        let next = thirring_step(&psi, &ThirringParams::new(0.0, 1.0), g.dx()).unwrap();
        assert_eq!(next, transport(&psi));
    }

    #[test]
    fn scaling_examples() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let psi = random_spinor_field(g, 1, 5, 3, 0.8);
        let massless = ThirringParams::new(0.0, 1.0);
        let t = 16.0 * g.dx();
        assert_eq!(scaling_check(&psi, &massless, 1.0, t).unwrap(), 0.0);
        assert!(scaling_check(&psi, &massless, 2.0, t).unwrap() < 1e-12);
        assert!(scaling_check(&psi, &ThirringParams::new(1.0, 1.0), 2.0, t).unwrap() > 1e-2);
        assert!(matches!(
            scaling_check(&psi, &massless, 1.5, 0.37),
            Err(ScalingError::Incompatible { .. })
        ));
    }

    #[test]
    fn zero_perturbation_stays_zero() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let psi = random_spinor_field(g, 1, 5, 3, 0.4);
        let series = perturbation_growth(
            &psi,
            &Field::zeros(g, 1),
            &ThirringParams::new(1.0, 1.0),
            20,
        )
        .unwrap();
        assert!(series.iter().all(|&v| v == 0.0), "{series:?}");
    }

    #[test]
    fn potential_lookup() {
        assert_eq!(
            Potential::by_name("saturating").map(|p| p.name),
            Some("saturating")
        );
        assert!(Potential::by_name("nope").is_none());
    }

    #[test]
    fn wave_bound_is_max_u_plus_max_v() {
        let g = Grid::new(1.0, 8).unwrap();
        let psi = Field::from_fn(g, |x| Spinor::from_re(x, 1.0 - x));
        let want = g.x(7) * g.x(7) + 1.0;
        assert!((massless_pointwise_bound(&psi) - want).abs() < 1e-14);
    }
}
