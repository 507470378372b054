//! Dirac-wave maps into a target `N ⊂ R^q` given by an explicit embedding.
//!
//! The map `φ` carries `q` real components per point and the vector spinor
//! `ψ` carries `q` spinors per point, one per ambient direction. The
//! extrinsic system is
//!
//! ```text
//! □φ = II(φ_t,φ_t) − II(φ_x,φ_x) + ½V(γ_t, φ_t) − ½V(γ_x, φ_x)
//! γ_t∂_tψ − γ_x∂_xψ = II(φ_t, γ_tψ) − II(φ_x, γ_xψ)
//! ```
//!
//! with `V(γ, X) = Σ_{c,d} H^{cd} R(e_c, e_d)X` and `H^{cd} = ⟨ψ^c, iγψ^d⟩`.
//! In components the spinor equation says that `u` is parallel along the
//! right-moving characteristics and `v` along the left-moving ones, which is
//! how the stepper advances it.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)] // unused only when std is in the build graph
use num_traits::Float;

use crate::clifford::{gamma_t, gamma_x, pairing, Spinor};
use crate::grid::{check_cfl, Field, Grid, History, StepError};
use crate::init::{random_real_field, random_spinor_field};
use crate::linear_dirac::beta_density;
use crate::math;
use crate::monitors::RateRecord;

const C0: Complex64 = Complex64::new(0.0, 0.0);

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A Riemannian manifold isometrically embedded in `R^q`. Points and vectors
/// are ambient slices of length `q`.
pub trait Target: Sync {
    fn name(&self) -> &'static str;
    fn ambient_dim(&self) -> usize;
    /// Moves an ambient point onto the target.
    fn retract(&self, p: &mut [f64]);
    fn constraint_defect(&self, p: &[f64]) -> f64;
    /// Removes the normal part of `w` at `p`; returns its size.
    fn project_tangent(&self, p: &[f64], w: &mut [f64]) -> f64;
    /// Same for every spinor component of an ambient-valued spinor.
    fn project_tangent_spinor(&self, p: &[f64], s: &mut [Spinor]) -> f64;
    /// `II(X, Y)` at `p`.
    fn second_fundamental_form(&self, p: &[f64], x: &[f64], y: &[f64], out: &mut [f64]);
    /// `P(ξ, X)` at `p`, defined by `⟨P(ξ,X), Y⟩ = ⟨II(X,Y), ξ⟩`.
    fn shape_operator(&self, p: &[f64], xi: &[f64], x: &[f64], out: &mut [f64]);
    /// `R(A, B)C` at `p`.
    fn curvature(&self, p: &[f64], a: &[f64], b: &[f64], c: &[f64], out: &mut [f64]);
    /// Parallel transport of tangent spinors from `from` to `to` along the
    /// shortest connecting curve.
    fn transport_spinor(&self, from: &[f64], to: &[f64], s: &mut [Spinor]);

    /// `II(X, s)` for an ambient-valued spinor `s`, extended complex-linearly.
    fn second_fundamental_form_spinor(
        &self,
        p: &[f64],
        x: &[f64],
        s: &[Spinor],
        out: &mut [Spinor],
    ) {
        let q = self.ambient_dim();
        let mut e = vec![0.0; q];
        let mut ii = vec![0.0; q];
        out.iter_mut().for_each(|o| *o = Spinor::ZERO);
        for a in 0..q {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[a] = 1.0;
            self.second_fundamental_form(p, x, &e, &mut ii);
            for (o, &k) in out.iter_mut().zip(&ii) {
                *o += s[a] * k;
            }
        }
    }

    /// `Σ_{c,d} h[c·q + d] R(e_c, e_d)X`.
    fn curvature_contraction(&self, p: &[f64], h: &[Complex64], x: &[f64], out: &mut [Complex64]) {
        let q = self.ambient_dim();
        let (mut ec, mut ed, mut r) = (vec![0.0; q], vec![0.0; q], vec![0.0; q]);
        out.iter_mut().for_each(|o| *o = C0);
        for c in 0..q {
            for d in 0..q {
                ec.iter_mut().for_each(|v| *v = 0.0);
                ed.iter_mut().for_each(|v| *v = 0.0);
                ec[c] = 1.0;
                ed[d] = 1.0;
                self.curvature(p, &ec, &ed, x, &mut r);
                for (o, &k) in out.iter_mut().zip(&r) {
                    *o += h[c * q + d] * k;
                }
            }
        }
    }
}

/// The unit sphere `S^{q−1} ⊂ R^q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SphereTarget {
    pub q: usize,
}

impl Target for SphereTarget {
    fn name(&self) -> &'static str {
        "sphere"
    }

    fn ambient_dim(&self) -> usize {
        self.q
    }

    fn retract(&self, p: &mut [f64]) {
        let n = dot(p, p).sqrt();
        p.iter_mut().for_each(|v| *v /= n);
    }

    fn constraint_defect(&self, p: &[f64]) -> f64 {
        (dot(p, p).sqrt() - 1.0).abs()
    }

    fn project_tangent(&self, p: &[f64], w: &mut [f64]) -> f64 {
        let n = dot(p, w);
        for (wi, pi) in w.iter_mut().zip(p) {
            *wi -= n * pi;
        }
        n.abs()
    }

    fn project_tangent_spinor(&self, p: &[f64], s: &mut [Spinor]) -> f64 {
        let mut n = Spinor::ZERO;
        for (si, &pi) in s.iter().zip(p) {
            n += *si * pi;
        }
        for (si, &pi) in s.iter_mut().zip(p) {
            *si -= n * pi;
        }
        n.norm_sqr().sqrt()
    }

    fn second_fundamental_form(&self, p: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) {
        let k = -dot(x, y);
        for (o, pi) in out.iter_mut().zip(p) {
            *o = k * pi;
        }
    }

    fn shape_operator(&self, p: &[f64], xi: &[f64], x: &[f64], out: &mut [f64]) {
        let k = -dot(p, xi);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = k * xi;
        }
    }

    fn curvature(&self, _p: &[f64], a: &[f64], b: &[f64], c: &[f64], out: &mut [f64]) {
        let (bc, ac) = (dot(b, c), dot(a, c));
        for ((o, ai), bi) in out.iter_mut().zip(a).zip(b) {
            *o = bc * ai - ac * bi;
        }
    }

    /// Rotation in the plane of `from` and `to` taking one to the other.
    fn transport_spinor(&self, from: &[f64], to: &[f64], s: &mut [Spinor]) {
        let c = 1.0 + dot(from, to);
        let (mut along_sum, mut along_from) = (Spinor::ZERO, Spinor::ZERO);
        for ((si, f), t) in s.iter().zip(from).zip(to) {
            along_sum += *si * (f + t);
            along_from += *si * *f;
        }
        let k = along_sum * (1.0 / c);
        for ((si, f), t) in s.iter_mut().zip(from).zip(to) {
            *si = *si - k * (f + t) + along_from * (2.0 * t);
        }
    }

    fn second_fundamental_form_spinor(
        &self,
        p: &[f64],
        x: &[f64],
        s: &[Spinor],
        out: &mut [Spinor],
    ) {
        let mut k = Spinor::ZERO;
        for (si, xi) in s.iter().zip(x) {
            k += *si * *xi;
        }
        for (o, pi) in out.iter_mut().zip(p) {
            *o = k * (-pi);
        }
    }

    /// `(Σ_d h^{ad}X^d − Σ_c h^{ca}X^c)_a`.
    fn curvature_contraction(&self, _p: &[f64], h: &[Complex64], x: &[f64], out: &mut [Complex64]) {
        let q = self.q;
        for (a, o) in out.iter_mut().enumerate() {
            *o = (0..q).map(|d| (h[a * q + d] - h[d * q + a]) * x[d]).sum();
        }
    }
}

/// A flat target: `R^q` itself (a flat torus seen through its universal
/// cover). Map and spinor decouple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlatTarget {
    pub q: usize,
}

impl Target for FlatTarget {
    fn name(&self) -> &'static str {
        "flat"
    }
    fn ambient_dim(&self) -> usize {
        self.q
    }
    fn retract(&self, _p: &mut [f64]) {}
    fn constraint_defect(&self, _p: &[f64]) -> f64 {
        0.0
    }
    fn project_tangent(&self, _p: &[f64], _w: &mut [f64]) -> f64 {
        0.0
    }
    fn project_tangent_spinor(&self, _p: &[f64], _s: &mut [Spinor]) -> f64 {
        0.0
    }
    fn second_fundamental_form(&self, _p: &[f64], _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    fn shape_operator(&self, _p: &[f64], _xi: &[f64], _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    fn curvature(&self, _p: &[f64], _a: &[f64], _b: &[f64], _c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    fn transport_spinor(&self, _from: &[f64], _to: &[f64], _s: &mut [Spinor]) {}
}

/// `H^{cd} = ⟨ψ^c, iγψ^d⟩` for the spinors at one point, row-major.
pub fn pairing_matrix(psi: &[Spinor], gamma: fn(Spinor) -> Spinor) -> Vec<Complex64> {
    let q = psi.len();
    let mut h = vec![C0; q * q];
    for c in 0..q {
        for d in 0..q {
            h[c * q + d] = pairing(psi[c], gamma(psi[d]).times_i());
        }
    }
    h
}

/// `V(γ, X)` at one point, before taking real parts. Its imaginary part
/// vanishes because `H` is anti-Hermitian.
pub fn curvature_term(
    target: &dyn Target,
    p: &[f64],
    psi: &[Spinor],
    gamma: fn(Spinor) -> Spinor,
    x: &[f64],
) -> Vec<Complex64> {
    let h = pairing_matrix(psi, gamma);
    let mut out = vec![C0; target.ambient_dim()];
    target.curvature_contraction(p, &h, x, &mut out);
    out
}

/// `Σ_{c,d} Re H^{cd} P(II(e_d, X), e_c)`: the coupling written through the
/// shape operator. On the sphere it equals `½V(γ, X)`.
pub fn shape_form_term(
    target: &dyn Target,
    p: &[f64],
    psi: &[Spinor],
    gamma: fn(Spinor) -> Spinor,
    x: &[f64],
) -> Vec<f64> {
    let q = target.ambient_dim();
    let h = pairing_matrix(psi, gamma);
    let (mut ed, mut ec, mut ii, mut pr) = (vec![0.0; q], vec![0.0; q], vec![0.0; q], vec![0.0; q]);
    let mut out = vec![0.0; q];
    for c in 0..q {
        for d in 0..q {
            ed.iter_mut().for_each(|v| *v = 0.0);
            ec.iter_mut().for_each(|v| *v = 0.0);
            ed[d] = 1.0;
            ec[c] = 1.0;
            target.second_fundamental_form(p, &ed, x, &mut ii);
            target.shape_operator(p, &ii, &ec, &mut pr);
            for (o, v) in out.iter_mut().zip(&pr) {
                *o += h[c * q + d].re * v;
            }
        }
    }
    out
}

/// Right side of the map equation and the size of the normal component
/// removed from the coupling term.
#[derive(Clone, Debug)]
pub struct MapRhs {
    pub value: Field<f64>,
    pub normal_residual: f64,
}

/// `II(φ_t,φ_t) − II(φ_x,φ_x) + ½V(γ_t,φ_t) − ½V(γ_x,φ_x)`; the coupling
/// part is projected onto the tangent space.
pub fn dwm_rhs_map(
    target: &dyn Target,
    phi: &Field<f64>,
    phi_t: &Field<f64>,
    phi_x: &Field<f64>,
    psi: &Field<Spinor>,
) -> MapRhs {
    let q = target.ambient_dim();
    let n = phi.len();
    let mut values = Vec::with_capacity(n * q);
    let (mut a, mut b) = (vec![0.0; q], vec![0.0; q]);
    let mut coupling = vec![0.0; q];
    let mut normal_residual = 0.0_f64;
    for i in 0..n {
        let (p, pt, px, s) = (phi.point(i), phi_t.point(i), phi_x.point(i), psi.point(i));
        let vt = curvature_term(target, p, s, gamma_t, pt);
        let vx = curvature_term(target, p, s, gamma_x, px);
        for k in 0..q {
            coupling[k] = 0.5 * (vt[k].re - vx[k].re);
        }
        normal_residual = normal_residual.max(target.project_tangent(p, &mut coupling));
        target.second_fundamental_form(p, pt, pt, &mut a);
        target.second_fundamental_form(p, px, px, &mut b);
        values.extend((0..q).map(|k| a[k] - b[k] + coupling[k]));
    }
    MapRhs {
        value: Field::from_values_unchecked(*phi.grid(), q, values),
        normal_residual,
    }
}

/// `II(φ_t, γ_tψ) − II(φ_x, γ_xψ)`.
pub fn dwm_rhs_spinor(
    target: &dyn Target,
    phi: &Field<f64>,
    phi_t: &Field<f64>,
    phi_x: &Field<f64>,
    psi: &Field<Spinor>,
) -> Field<Spinor> {
    let q = target.ambient_dim();
    let mut values = Vec::with_capacity(psi.values().len());
    let (mut a, mut b) = (vec![Spinor::ZERO; q], vec![Spinor::ZERO; q]);
    for i in 0..phi.len() {
        let s = psi.point(i);
        let gt: Vec<Spinor> = s.iter().map(|&v| gamma_t(v)).collect();
        let gx: Vec<Spinor> = s.iter().map(|&v| gamma_x(v)).collect();
        target.second_fundamental_form_spinor(phi.point(i), phi_t.point(i), &gt, &mut a);
        target.second_fundamental_form_spinor(phi.point(i), phi_x.point(i), &gx, &mut b);
        values.extend(a.iter().zip(&b).map(|(&x, &y)| x - y));
    }
    Field::from_values_unchecked(*psi.grid(), q, values)
}

#[derive(Clone, Debug, PartialEq)]
pub enum DwmError {
    Step(StepError),
    /// Fields do not have `q` components per point.
    Shape {
        expected: usize,
        got: usize,
    },
    /// The map left the target by more than the abort threshold.
    Constraint {
        defect: f64,
    },
    NonFinite,
}

impl fmt::Display for DwmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DwmError::Step(e) => write!(f, "{e}"),
            DwmError::Shape { expected, got } => {
                write!(f, "expected {expected} ambient components, got {got}")
            }
            DwmError::Constraint { defect } => {
                write!(f, "target constraint violated by {defect:e}")
            }
            DwmError::NonFinite => write!(f, "non-finite value in the solution"),
        }
    }
}

impl From<StepError> for DwmError {
    fn from(e: StepError) -> Self {
        DwmError::Step(e)
    }
}

/// Constraint violations above this abort a run.
pub const CONSTRAINT_ABORT: f64 = 1e-6;

/// Two time levels of the map and the spinor at the later one.
#[derive(Clone, Debug, PartialEq)]
pub struct DWState {
    pub phi: Field<f64>,
    pub phi_prev: Field<f64>,
    pub psi: Field<Spinor>,
    pub t: f64,
}

impl DWState {
    /// Builds the state from Cauchy data `(φ, φ_t, ψ)`; the previous map level
    /// comes from a second-order Taylor step back in time.
    pub fn from_velocity(
        target: &dyn Target,
        phi: Field<f64>,
        phi_t: &Field<f64>,
        psi: Field<Spinor>,
        t: f64,
        dt: f64,
    ) -> Result<Self, DwmError> {
        check_shape(target, &phi, &psi)?;
        let phi_x = phi.central_diff();
        let accel = phi.second_diff().zip_with(
            &dwm_rhs_map(target, &phi, phi_t, &phi_x, &psi).value,
            |a, b| a + b,
        );
        let mut prev = Vec::with_capacity(phi.values().len());
        for i in 0..phi.len() {
            let mut p: Vec<f64> = (0..target.ambient_dim())
                .map(|k| {
                    phi.point(i)[k] - dt * phi_t.point(i)[k] + 0.5 * dt * dt * accel.point(i)[k]
                })
                .collect();
            target.retract(&mut p);
            prev.extend(p);
        }
        let phi_prev = Field::from_values_unchecked(*phi.grid(), phi.dim(), prev);
        Ok(Self {
            phi,
            phi_prev,
            psi,
            t,
        })
    }

    /// Largest distance of the map from the target.
    pub fn constraint_defect(&self, target: &dyn Target) -> f64 {
        (0..self.phi.len())
            .map(|i| target.constraint_defect(self.phi.point(i)))
            .fold(0.0, f64::max)
    }

    /// Largest normal component of the spinor, `|Σ_a φ^a ψ^a|` on the sphere.
    pub fn tangency_defect(&self, target: &dyn Target) -> f64 {
        (0..self.phi.len())
            .map(|i| {
                let mut s = self.psi.point(i).to_vec();
                target.project_tangent_spinor(self.phi.point(i), &mut s)
            })
            .fold(0.0, f64::max)
    }
}

fn check_shape(target: &dyn Target, phi: &Field<f64>, psi: &Field<Spinor>) -> Result<(), DwmError> {
    let q = target.ambient_dim();
    for got in [phi.dim(), psi.dim()] {
        if got != q {
            return Err(DwmError::Shape { expected: q, got });
        }
    }
    Ok(())
}

/// Sizes of the corrections a step applied.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Largest distance moved by the retraction onto the target.
    pub retraction: f64,
    /// Largest normal component removed from the spinor.
    pub tangency_projection: f64,
    /// Largest normal component removed from the coupling term.
    pub coupling_normal: f64,
}

/// One step with `dt = dx`.
///
/// The map takes a leapfrog step, `φ⁺ = φ_{i+1} + φ_{i−1} − φ⁻ + dt²·rhs`,
/// with the right side evaluated twice: first with a one-sided velocity,
/// then with the centered velocity from the predicted level. The result is
/// retracted onto the target. The spinor moves along characteristics, each
/// component parallel-transported from its foot point at the old level to
/// its arrival point at the new level, and is then projected onto the
/// tangent space.
pub fn dwm_step(
    state: &DWState,
    target: &dyn Target,
    dt: f64,
) -> Result<(DWState, StepDiagnostics), DwmError> {
    let grid = *state.phi.grid();
    check_cfl(&grid, dt)?;
    check_shape(target, &state.phi, &state.psi)?;
    let q = target.ambient_dim();
    let n = grid.cells();
    let phi = &state.phi;
    let phi_x = phi.central_diff();
    let spread = phi
        .shift(1)
        .zip_with(&phi.shift(-1), |a, b| a + b)
        .zip_with(&state.phi_prev, |a, b| a - b);

    let advance = |phi_t: &Field<f64>| {
        let rhs = dwm_rhs_map(target, phi, phi_t, &phi_x, &state.psi);
        let mut retraction = 0.0_f64;
        let mut out = spread.zip_with(&rhs.value, |a, r| a + dt * dt * r);
        for i in 0..n {
            let p = out.point_mut(i);
            let before = p.to_vec();
            target.retract(p);
            let moved = before
                .iter()
                .zip(p.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            retraction = retraction.max(moved);
        }
        (out, retraction, rhs.normal_residual)
    };

    let one_sided = phi.zip_with(&state.phi_prev, |a, b| (a - b) / dt);
    let (predicted, _, _) = advance(&one_sided);
    let centered = predicted.zip_with(&state.phi_prev, |a, b| (a - b) / (2.0 * dt));
    let (next_phi, retraction, coupling_normal) = advance(&centered);

    let mut tangency = 0.0_f64;
    let mut psi_values = Vec::with_capacity(n * q);
    let mut u = vec![Spinor::ZERO; q];
    let mut v = vec![Spinor::ZERO; q];
    for i in 0..n {
        let (left, right) = ((i + n - 1) % n, (i + 1) % n);
        let to = next_phi.point(i);
        for (k, s) in state.psi.point(left).iter().enumerate() {
            u[k] = Spinor::new(s.u, C0);
        }
        for (k, s) in state.psi.point(right).iter().enumerate() {
            v[k] = Spinor::new(C0, s.v);
        }
        target.transport_spinor(phi.point(left), to, &mut u);
        target.transport_spinor(phi.point(right), to, &mut v);
        let mut merged: Vec<Spinor> = u
            .iter()
            .zip(&v)
            .map(|(a, b)| Spinor::new(a.u, b.v))
            .collect();
        tangency = tangency.max(target.project_tangent_spinor(to, &mut merged));
        psi_values.extend(merged);
    }
    let next_psi = Field::from_values_unchecked(grid, q, psi_values);

    if next_phi.first_non_finite().is_some() || next_psi.first_non_finite().is_some() {
        return Err(DwmError::NonFinite);
    }
    let next = DWState {
        phi: next_phi,
        phi_prev: state.phi.clone(),
        psi: next_psi,
        t: state.t + dt,
    };
    let defect = next.constraint_defect(target);
    if defect > CONSTRAINT_ABORT {
        return Err(DwmError::Constraint { defect });
    }
    Ok((
        next,
        StepDiagnostics {
            retraction,
            tangency_projection: tangency,
            coupling_normal,
        },
    ))
}

/// A failed run: the step index (1-based) and the cause.
#[derive(Clone, Debug, PartialEq)]
pub struct RunError {
    pub step: usize,
    pub error: DwmError,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.error)
    }
}

/// All time levels of a run. Level `n` is at `t0 + n·dt`; `phi_before`
/// is the map one step before level 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DwmRun {
    pub t0: f64,
    pub dt: f64,
    pub phi_before: Field<f64>,
    pub phi: Vec<Field<f64>>,
    pub psi: Vec<Field<Spinor>>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl DwmRun {
    pub fn levels(&self) -> usize {
        self.phi.len()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn phi_level(&self, n: isize) -> &Field<f64> {
        if n < 0 {
            &self.phi_before
        } else {
            &self.phi[n as usize]
        }
    }

    /// Map levels `n−1, n, n+1`; needs `n + 1 < levels`.
    pub fn phi_history(&self, n: usize) -> History<f64> {
        let n = n as isize;
        History::new(
            self.phi_level(n - 1).clone(),
            self.phi_level(n).clone(),
            self.phi_level(n + 1).clone(),
            self.dt,
        )
        .expect("consistent levels")
    }

    /// Spinor levels `n−1, n, n+1`; needs `1 ≤ n` and `n + 1 < levels`.
    pub fn psi_history(&self, n: usize) -> History<Spinor> {
        History::new(
            self.psi[n - 1].clone(),
            self.psi[n].clone(),
            self.psi[n + 1].clone(),
            self.dt,
        )
        .expect("consistent levels")
    }

    pub fn state(&self, n: usize) -> DWState {
        DWState {
            phi: self.phi[n].clone(),
            phi_prev: self.phi_level(n as isize - 1).clone(),
            psi: self.psi[n].clone(),
            t: self.time(n),
        }
    }
}

/// Runs `steps` steps from `state0`.
pub fn evolve(
    target: &dyn Target,
    state0: DWState,
    dt: f64,
    steps: usize,
) -> Result<DwmRun, RunError> {
    let mut run = DwmRun {
        t0: state0.t,
        dt,
        phi_before: state0.phi_prev.clone(),
        phi: vec![state0.phi.clone()],
        psi: vec![state0.psi.clone()],
        diagnostics: Vec::with_capacity(steps),
    };
    let mut state = state0;
    for step in 1..=steps {
        let (next, diag) =
            dwm_step(&state, target, dt).map_err(|error| RunError { step, error })?;
        run.phi.push(next.phi.clone());
        run.psi.push(next.psi.clone());
        run.diagnostics.push(diag);
        state = next;
    }
    Ok(run)
}

/// Cauchy data `(φ, φ_t, ψ)` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyData {
    pub phi: Field<f64>,
    pub phi_t: Field<f64>,
    pub psi: Field<Spinor>,
}

impl CauchyData {
    /// Smooth seeded data: `φ` a retracted perturbation of the last
    /// coordinate axis, `φ_t` and `ψ` random fields projected onto the
    /// tangent spaces.
    pub fn random(
        target: &dyn Target,
        grid: Grid,
        seed: u64,
        modes: usize,
        amplitudes: [f64; 3],
    ) -> Self {
        let q = target.ambient_dim();
        let mut phi = random_real_field(grid, q, seed, 10, modes, amplitudes[0]);
        let mut phi_t = random_real_field(grid, q, seed, 20, modes, amplitudes[1]);
        let mut psi = random_spinor_field(grid, q, seed.wrapping_add(1), modes, amplitudes[2]);
        for i in 0..grid.cells() {
            let p = phi.point_mut(i);
            p[q - 1] += 1.0;
            target.retract(p);
            let p = phi.point(i).to_vec();
            target.project_tangent(&p, phi_t.point_mut(i));
            target.project_tangent_spinor(&p, psi.point_mut(i));
        }
        Self { phi, phi_t, psi }
    }

    /// Adds `δ`-sized seeded noise to every field and restores the constraints.
    pub fn perturbed(&self, target: &dyn Target, seed: u64, modes: usize, delta: f64) -> Self {
        let grid = *self.phi.grid();
        let q = target.ambient_dim();
        let add = |a: &Field<f64>, stream: u64| {
            a.zip_with(
                &random_real_field(grid, q, seed, stream, modes, delta),
                |x, y| x + y,
            )
        };
        let mut phi = add(&self.phi, 40);
        let mut phi_t = add(&self.phi_t, 50);
        let noise = random_spinor_field(grid, q, seed.wrapping_add(2), modes, delta);
        let mut psi = self.psi.zip_with(&noise, |x, y| x + y);
        for i in 0..grid.cells() {
            target.retract(phi.point_mut(i));
            let p = phi.point(i).to_vec();
            target.project_tangent(&p, phi_t.point_mut(i));
            target.project_tangent_spinor(&p, psi.point_mut(i));
        }
        Self { phi, phi_t, psi }
    }

    pub fn into_state(self, target: &dyn Target, t: f64, dt: f64) -> Result<DWState, DwmError> {
        DWState::from_velocity(target, self.phi, &self.phi_t, self.psi, t, dt)
    }
}

/// Samples the twistor spinor `ψ1 + (t·γ_t + x·γ_x)ψ2` at time `t`.
pub fn twistor_field(grid: Grid, t: f64, psi1: Spinor, psi2: Spinor) -> Field<Spinor> {
    Field::from_fn(grid, |x| twistor_value(t, x, psi1, psi2))
}

fn twistor_value(t: f64, x: f64, psi1: Spinor, psi2: Spinor) -> Spinor {
    psi1 + gamma_t(psi2) * t + gamma_x(psi2) * x
}

/// The uncoupled solution over the geodesic wave map
/// `φ = (cos θ, sin θ, 0)`, `θ = at + bx`, into `S² ⊂ R³`, with
/// `ψ = γ_tχ ⊗ φ_t − γ_xχ ⊗ φ_x` for the twistor spinor `χ` of `(χ1, χ2)`.
/// Periodic on a grid of length `L` when `bL ∈ 2πZ` and `χ2 = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncoupledSolution {
    pub a: f64,
    pub b: f64,
    pub chi1: Spinor,
    pub chi2: Spinor,
}

impl UncoupledSolution {
    pub const TARGET: SphereTarget = SphereTarget { q: 3 };

    pub fn new(a: f64, b: f64, chi1: Spinor, chi2: Spinor) -> Self {
        Self { a, b, chi1, chi2 }
    }

    fn angle(&self, t: f64, x: f64) -> (f64, f64) {
        math::sin_cos(self.a * t + self.b * x)
    }

    pub fn phi(&self, t: f64, x: f64) -> [f64; 3] {
        let (s, c) = self.angle(t, x);
        [c, s, 0.0]
    }

    pub fn phi_t(&self, t: f64, x: f64) -> [f64; 3] {
        let (s, c) = self.angle(t, x);
        [-self.a * s, self.a * c, 0.0]
    }

    pub fn phi_x(&self, t: f64, x: f64) -> [f64; 3] {
        let (s, c) = self.angle(t, x);
        [-self.b * s, self.b * c, 0.0]
    }

    pub fn chi(&self, t: f64, x: f64) -> Spinor {
        twistor_value(t, x, self.chi1, self.chi2)
    }

    pub fn psi(&self, t: f64, x: f64) -> [Spinor; 3] {
        let chi = self.chi(t, x);
        let (gt, gx) = (gamma_t(chi), gamma_x(chi));
        let (pt, px) = (self.phi_t(t, x), self.phi_x(t, x));
        core::array::from_fn(|k| gt * pt[k] - gx * px[k])
    }

    pub fn sample_phi(&self, grid: Grid, t: f64) -> Field<f64> {
        Field::from_fn_multi(grid, 3, |x, k| self.phi(t, x)[k])
    }

    pub fn sample_phi_t(&self, grid: Grid, t: f64) -> Field<f64> {
        Field::from_fn_multi(grid, 3, |x, k| self.phi_t(t, x)[k])
    }

    pub fn sample_psi(&self, grid: Grid, t: f64) -> Field<Spinor> {
        Field::from_fn_multi(grid, 3, |x, k| self.psi(t, x)[k])
    }

    /// Exact state at `t` with the previous map level at `t − dt`.
    pub fn state(&self, grid: Grid, t: f64, dt: f64) -> DWState {
        DWState {
            phi: self.sample_phi(grid, t),
            phi_prev: self.sample_phi(grid, t - dt),
            psi: self.sample_psi(grid, t),
            t,
        }
    }
}

/// `φ_t` and `φ_x` at the middle level from centered differences.
fn map_derivatives(phi: &History<f64>) -> (Field<f64>, Field<f64>) {
    (phi.time_diff(), phi.mid.central_diff())
}

/// Discrete `□φ − rhs` at the middle level.
pub fn map_residual(
    target: &dyn Target,
    phi: &History<f64>,
    psi_mid: &Field<Spinor>,
) -> Field<f64> {
    let (pt, px) = map_derivatives(phi);
    let rhs = dwm_rhs_map(target, &phi.mid, &pt, &px, psi_mid);
    crate::grid::box_residual(phi, Some(&rhs.value))
}

/// Discrete `γ_t∂_tψ − γ_x∂_xψ − (II(φ_t,γ_tψ) − II(φ_x,γ_xψ))` at the middle level.
pub fn spinor_residual(
    target: &dyn Target,
    phi: &History<f64>,
    psi: &History<Spinor>,
) -> Field<Spinor> {
    let (pt, px) = map_derivatives(phi);
    let rhs = dwm_rhs_spinor(target, &phi.mid, &pt, &px, &psi.mid);
    let d = psi
        .time_diff()
        .zip_with(&psi.mid.central_diff(), |a, b| gamma_t(a) - gamma_x(b));
    d.zip_with(&rhs, |a, b| a - b)
}

/// Tangential parts `(∇̃_tψ, ∇̃_xψ)` of the centered derivatives at the middle level.
pub fn covariant_derivatives(
    target: &dyn Target,
    phi_mid: &Field<f64>,
    psi: &History<Spinor>,
) -> (Field<Spinor>, Field<Spinor>) {
    let project = |mut f: Field<Spinor>| {
        for i in 0..f.len() {
            target.project_tangent_spinor(phi_mid.point(i), f.point_mut(i));
        }
        f
    };
    (project(psi.time_diff()), project(psi.mid.central_diff()))
}

/// `Σ_a ⟨ψ^a, iγ η^a⟩` at each point.
fn pair_i_gamma(
    psi: &Field<Spinor>,
    gamma: fn(Spinor) -> Spinor,
    eta: &Field<Spinor>,
) -> Vec<Complex64> {
    (0..psi.len())
        .map(|i| {
            psi.point(i)
                .iter()
                .zip(eta.point(i))
                .map(|(&s, &e)| pairing(s, gamma(e).times_i()))
                .sum()
        })
        .collect()
}

fn real_field(grid: Grid, values: Vec<f64>) -> Field<f64> {
    Field::from_values_unchecked(grid, 1, values)
}

fn sq_sum(f: &Field<f64>) -> Field<f64> {
    f.map_points(|p| p.iter().map(|v| v * v).sum())
}

/// `½∫(|φ_t|² + |φ_x|² + σ·Re⟨ψ, iγ_t∇̃_tψ⟩)` at the middle level.
pub fn e_dw(target: &dyn Target, phi: &History<f64>, psi: &History<Spinor>, sigma: f64) -> f64 {
    let (pt, px) = map_derivatives(phi);
    let (nt, _) = covariant_derivatives(target, &phi.mid, psi);
    let spin: f64 = pair_i_gamma(&psi.mid, gamma_t, &nt)
        .iter()
        .map(|z| z.re)
        .sum();
    let grad = sq_sum(&pt).integrate() + sq_sum(&px).integrate();
    0.5 * (grad + sigma * spin * phi.grid().dx())
}

/// Components of the energy-momentum tensor at the middle level.
#[derive(Clone, Debug)]
pub struct EnergyMomentum {
    pub tt: Field<f64>,
    pub tx: Field<f64>,
    pub xx: Field<f64>,
    /// Largest imaginary part dropped from the spinor terms.
    pub imaginary: f64,
}

/// `T_ij = 2⟨φ_i, φ_j⟩ − g_ij(|φ_t|² − |φ_x|²) + ½Re⟨ψ, i(e_i·∇̃_j + e_j·∇̃_i)ψ⟩`.
pub fn energy_momentum(
    target: &dyn Target,
    phi: &History<f64>,
    psi: &History<Spinor>,
) -> EnergyMomentum {
    let grid = *phi.grid();
    let (pt, px) = map_derivatives(phi);
    let (nt, nx) = covariant_derivatives(target, &phi.mid, psi);
    let stt = pair_i_gamma(&psi.mid, gamma_t, &nt);
    let sxx = pair_i_gamma(&psi.mid, gamma_x, &nx);
    let stx: Vec<Complex64> = pair_i_gamma(&psi.mid, gamma_t, &nx)
        .iter()
        .zip(pair_i_gamma(&psi.mid, gamma_x, &nt))
        .map(|(a, b)| (a + b) * 0.5)
        .collect();
    let imaginary = stt
        .iter()
        .chain(&sxx)
        .chain(&stx)
        .fold(0.0_f64, |m, z| m.max(z.im.abs()));
    let (tsq, xsq) = (sq_sum(&pt), sq_sum(&px));
    let cross: Field<f64> = pt
        .zip_with(&px, |a, b| a * b)
        .map_points(|p| p.iter().sum());
    let n = grid.cells();
    let tt = (0..n)
        .map(|i| tsq.values()[i] + xsq.values()[i] + stt[i].re)
        .collect();
    let xx = (0..n)
        .map(|i| tsq.values()[i] + xsq.values()[i] + sxx[i].re)
        .collect();
    let tx = (0..n)
        .map(|i| 2.0 * cross.values()[i] + stx[i].re)
        .collect();
    EnergyMomentum {
        tt: real_field(grid, tt),
        tx: real_field(grid, tx),
        xx: real_field(grid, xx),
        imaginary,
    }
}

fn level_history<V: crate::grid::Fiber>(levels: &[&Field<V>], n: usize, dt: f64) -> History<V> {
    History::new(
        levels[n - 1].clone(),
        levels[n].clone(),
        levels[n + 1].clone(),
        dt,
    )
    .expect("consistent levels")
}

/// `(∂_tT_tt − ∂_xT_xt, ∂_tT_tx − ∂_xT_xx)` at the middle of five levels.
pub fn divergence_residual(
    target: &dyn Target,
    phis: [&Field<f64>; 5],
    psis: [&Field<Spinor>; 5],
    dt: f64,
) -> (Field<f64>, Field<f64>) {
    let t: Vec<EnergyMomentum> = (1..4)
        .map(|n| {
            energy_momentum(
                target,
                &level_history(&phis, n, dt),
                &level_history(&psis, n, dt),
            )
        })
        .collect();
    let ddt = |a: &Field<f64>, b: &Field<f64>| a.zip_with(b, |x, y| (x - y) / (2.0 * dt));
    let rt = ddt(&t[2].tt, &t[0].tt).zip_with(&t[1].tx.central_diff(), |a, b| a - b);
    let rx = ddt(&t[2].tx, &t[0].tx).zip_with(&t[1].xx.central_diff(), |a, b| a - b);
    (rt, rx)
}

/// `□e(φ) − ½(∂_t²B_x − ∂_x²B_t)` with `B_j = Re Σ_a⟨∇̃_jψ^a, iγ_jψ^a⟩`, at
/// the middle of five levels.
pub fn box_e_residual(
    target: &dyn Target,
    phis: [&Field<f64>; 5],
    psis: [&Field<Spinor>; 5],
    dt: f64,
) -> Field<f64> {
    let mut e = Vec::new();
    let mut bt = Vec::new();
    let mut bx = Vec::new();
    for n in 1..4 {
        let ph = level_history(&phis, n, dt);
        let ps = level_history(&psis, n, dt);
        let grid = *ph.grid();
        let (pt, px) = map_derivatives(&ph);
        e.push(sq_sum(&pt).zip_with(&sq_sum(&px), |a, b| 0.5 * (a + b)));
        let (nt, nx) = covariant_derivatives(target, &ph.mid, &ps);
        // ⟨a, iγb⟩ = −conj⟨b, iγa⟩ in real part, so B_j = −Re⟨ψ, iγ_j∇̃_jψ⟩.
        bt.push(real_field(
            grid,
            pair_i_gamma(&ps.mid, gamma_t, &nt)
                .iter()
                .map(|z| -z.re)
                .collect(),
        ));
        bx.push(real_field(
            grid,
            pair_i_gamma(&ps.mid, gamma_x, &nx)
                .iter()
                .map(|z| -z.re)
                .collect(),
        ));
    }
    let box_e = crate::grid::box_residual(
        &History::new(e[0].clone(), e[1].clone(), e[2].clone(), dt).expect("levels"),
        None,
    );
    let btt = History::new(bx[0].clone(), bx[1].clone(), bx[2].clone(), dt)
        .expect("levels")
        .time_second_diff();
    let bxx = bt[1].second_diff();
    box_e.zip_with(&btt.zip_with(&bxx, |a, b| 0.5 * (a - b)), |a, b| a - b)
}

/// `max_i | |∇̃_tψ|²_β − |∇̃_xψ|²_β |` at the middle level.
pub fn gradient_balance_defect(
    target: &dyn Target,
    phi_mid: &Field<f64>,
    psi: &History<Spinor>,
) -> f64 {
    let (nt, nx) = covariant_derivatives(target, phi_mid, psi);
    beta_density(&nt)
        .zip_with(&beta_density(&nx), |a, b| a - b)
        .max_abs()
}

/// `E_(ψ,1,2) = ½∫(|∂_tψ|²_β + |∂_xψ|²_β)` with ambient derivatives.
pub fn e_psi_1_2(psi: &History<Spinor>) -> f64 {
    crate::linear_dirac::e3(psi)
}

/// `E_(ψ,1,4) = ∫(|a_t|⁴ + |a_x|⁴ + 2|a_t|²|a_x|² + 4|⟨γ_t a_x, a_t⟩|²)` with
/// `a_j = ∂_jψ` ambient and the pairing summed over ambient components.
pub fn e_psi_1_4(psi: &History<Spinor>) -> f64 {
    let at = psi.time_diff();
    let ax = psi.mid.central_diff();
    let (rt, rx) = (beta_density(&at), beta_density(&ax));
    let cross: Vec<f64> = (0..at.len())
        .map(|i| {
            let z: Complex64 = at
                .point(i)
                .iter()
                .zip(ax.point(i))
                .map(|(&t, &x)| pairing(gamma_t(x), t))
                .sum();
            z.norm_sqr()
        })
        .collect();
    let dx = psi.grid().dx();
    (0..at.len())
        .map(|i| {
            let (a, b) = (rt.values()[i], rx.values()[i]);
            a * a + b * b + 2.0 * a * b + 4.0 * cross[i]
        })
        .sum::<f64>()
        * dx
}

/// `E_(φ,2,2) = ½∫(|φ_xx|² + |φ_xt|²)` at the middle level.
pub fn e_phi_2_2(phi: &History<f64>) -> f64 {
    let xx = phi.mid.second_diff();
    let xt = phi.time_diff().central_diff();
    0.5 * (sq_sum(&xx).integrate() + sq_sum(&xt).integrate())
}

/// `∫e(φ) = ½∫(|φ_t|² + |φ_x|²)` at the middle level.
pub fn map_energy(phi: &History<f64>) -> f64 {
    let (pt, px) = map_derivatives(phi);
    0.5 * (sq_sum(&pt).integrate() + sq_sum(&px).integrate())
}

/// Rate records for a functional evaluated at interior levels: the rate at
/// level `n` is the centered difference of its values at `n ± 1`.
fn rate_records(
    run: &DwmRun,
    value: impl Fn(usize) -> f64,
    shape: impl Fn(usize, f64) -> f64,
) -> Vec<RateRecord> {
    let m = run.levels();
    if m < 5 {
        return Vec::new();
    }
    let vals: Vec<f64> = (1..m - 1).map(&value).collect(); // vals[j] at level j + 1
    (2..m - 2)
        .map(|n| RateRecord {
            t: run.time(n),
            rate: (vals[n] - vals[n - 2]) / (2.0 * run.dt),
            shape: shape(n, vals[n - 1]),
        })
        .collect()
}

/// `dE_(ψ,1,2)/dt` against `E + E^½`.
pub fn e_psi_1_2_audit(run: &DwmRun) -> Vec<RateRecord> {
    rate_records(run, |n| e_psi_1_2(&run.psi_history(n)), |_, e| e + e.sqrt())
}

/// `dE_(φ,2,2)/dt` against `E·∫e(φ) + E + ∫(|ψ|²_β + |∇ψ|⁴_β)`.
pub fn e_phi_2_2_audit(run: &DwmRun) -> Vec<RateRecord> {
    rate_records(
        run,
        |n| e_phi_2_2(&run.phi_history(n)),
        |n, e| {
            let ph = run.phi_history(n);
            let ps = run.psi_history(n);
            let grad4 = beta_density(&ps.time_diff())
                .zip_with(&beta_density(&ps.mid.central_diff()), |a, b| {
                    (a + b) * (a + b)
                })
                .integrate();
            e * map_energy(&ph) + e + beta_density(&ps.mid).integrate() + grad4
        },
    )
}

/// `∫(|η|²_β + |w|² + |w_t|² + |w_x|²)` with `w = φ_a − φ_b`, `η = ψ_a − ψ_b`
/// at level `n` of two runs on the same grid.
pub fn difference_energy(a: &DwmRun, b: &DwmRun, n: usize) -> f64 {
    let (ha, hb) = (a.phi_history(n), b.phi_history(n));
    let dw = |x: &Field<f64>, y: &Field<f64>| x.zip_with(y, |p, q| p - q);
    let wh = History::new(
        dw(&ha.prev, &hb.prev),
        dw(&ha.mid, &hb.mid),
        dw(&ha.next, &hb.next),
        a.dt,
    )
    .expect("levels");
    let eta = a.psi[n].zip_with(&b.psi[n], |p, q| p - q);
    beta_density(&eta).integrate()
        + sq_sum(&wh.mid).integrate()
        + sq_sum(&wh.time_diff()).integrate()
        + sq_sum(&wh.mid.central_diff()).integrate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_dirac::{e1, free_transport_step};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    const S2: SphereTarget = SphereTarget { q: 3 };

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize) -> Grid {
        Grid::new(2.0 * PI, n).unwrap()
    }

    fn tangent_at(p: &[f64], w: [f64; 3]) -> Vec<f64> {
        let mut w = w.to_vec();
        S2.project_tangent(p, &mut w);
        w
    }

    fn unit(v: [f64; 3]) -> Vec<f64> {
        let mut p = v.to_vec();
        S2.retract(&mut p);
        p
    }

    fn coupled_state(g: Grid, seed: u64, dt: f64) -> DWState {
        CauchyData::random(&S2, g, seed, 3, [0.5, 0.5, 0.3])
            .into_state(&S2, 0.0, dt)
            .unwrap()
    }

    proptest! {
        #[test]
        fn sphere_second_fundamental_form_is_normal_and_dual(
            p in prop::array::uniform3(-1.0..1.0f64),
            x in prop::array::uniform3(-1.0..1.0f64),
            y in prop::array::uniform3(-1.0..1.0f64),
            w in prop::array::uniform3(-1.0..1.0f64),
            k in -2.0..2.0f64,
        ) {
            prop_assume!(p.iter().map(|v| v * v).sum::<f64>() > 0.01);
            let p = unit(p);
            let (x, y, w) = (tangent_at(&p, x), tangent_at(&p, y), tangent_at(&p, w));
            let xi: Vec<f64> = p.iter().map(|v| k * v).collect();
            let mut ii = vec![0.0; 3];
            S2.second_fundamental_form(&p, &x, &y, &mut ii);
            prop_assert!(dot(&ii, &w).abs() < 1e-12);
            let mut pr = vec![0.0; 3];
            S2.shape_operator(&p, &xi, &x, &mut pr);
            prop_assert!((dot(&pr, &y) - dot(&ii, &xi)).abs() < 1e-12);
        }

        #[test]
        fn sphere_transport_is_an_isometry_onto_the_new_tangent_space(
            a in prop::array::uniform3(-1.0..1.0f64),
            b in prop::array::uniform3(-0.3..0.3f64),
            s in prop::array::uniform4(-1.0..1.0f64),
        ) {
            prop_assume!(a.iter().map(|v| v * v).sum::<f64>() > 0.1);
            let from = unit(a);
            let to = unit([from[0] + b[0], from[1] + b[1], from[2] + b[2]]);
            let mut v: Vec<Spinor> = tangent_at(&from, [s[0], s[1], s[2]]).iter().map(|&r| Spinor::new(c(r, s[3] * r), c(-r, r))).collect();
            let before: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            S2.transport_spinor(&from, &to, &mut v);
            let after: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((before - after).abs() < 1e-12);
            let mut probe = v.clone();
            prop_assert!(S2.project_tangent_spinor(&to, &mut probe) < 1e-12);
        }
    }

    #[test]
    fn rhs_without_spinor_is_the_wave_map_term() {
        let g = grid(16);
        let st = coupled_state(g, 3, g.dx());
        let (pt, px) = (
            st.phi.zip_with(&st.phi_prev, |a, b| a - b),
            st.phi.central_diff(),
        );
        let rhs = dwm_rhs_map(&S2, &st.phi, &pt, &px, &Field::zeros(g, 3));
        for i in 0..16 {
            let k = dot(pt.point(i), pt.point(i)) - dot(px.point(i), px.point(i));
            for a in 0..3 {
                assert!((rhs.value.point(i)[a] + k * st.phi.point(i)[a]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_map_has_no_forcing() {
        let g = grid(16);
        let st = coupled_state(g, 5, g.dx());
        let phi = Field::from_fn_multi(g, 3, |_, k| if k == 2 { 1.0 } else { 0.0 });
        let zero = Field::zeros(g, 3);
        let rhs = dwm_rhs_map(&S2, &phi, &zero, &zero, &st.psi);
        assert!(rhs.value.values().iter().all(|&v| v == 0.0));
        let rs = dwm_rhs_spinor(&S2, &phi, &zero, &zero, &st.psi);
        assert!(rs.values().iter().all(|&v| v == Spinor::ZERO));
        let none = dwm_rhs_spinor(&S2, &st.phi, &st.phi, &st.phi, &Field::zeros(g, 3));
        assert!(none.values().iter().all(|&v| v == Spinor::ZERO));
    }

    #[test]
    fn curvature_term_is_real_and_tangent() {
        let g = grid(32);
        let st = coupled_state(g, 11, g.dx());
        let pt = st.phi.zip_with(&st.phi_prev, |a, b| (a - b) / g.dx());
        for i in 0..32 {
            let p = st.phi.point(i);
            for gamma in [gamma_t as fn(Spinor) -> Spinor, gamma_x] {
                let v = curvature_term(&S2, p, st.psi.point(i), gamma, pt.point(i));
                assert!(v.iter().all(|z| z.im.abs() < 1e-12), "{v:?}");
                let re: Vec<f64> = v.iter().map(|z| z.re).collect();
                assert!(dot(&re, p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_contraction_matches_generic_curvature_sum() {
        let g = grid(16);
        let st = coupled_state(g, 2, g.dx());
        let p = st.phi.point(4);
        let h = pairing_matrix(st.psi.point(4), gamma_t);
        let x = [0.3, -0.2, 0.5];
        let mut fast = vec![C0; 3];
        S2.curvature_contraction(p, &h, &x, &mut fast);
        struct Slow;
        impl Target for Slow {
            fn name(&self) -> &'static str {
                "slow"
            }
            fn ambient_dim(&self) -> usize {
                3
            }
            fn retract(&self, p: &mut [f64]) {
                S2.retract(p)
            }
            fn constraint_defect(&self, p: &[f64]) -> f64 {
                S2.constraint_defect(p)
            }
            fn project_tangent(&self, p: &[f64], w: &mut [f64]) -> f64 {
                S2.project_tangent(p, w)
            }
            fn project_tangent_spinor(&self, p: &[f64], s: &mut [Spinor]) -> f64 {
                S2.project_tangent_spinor(p, s)
            }
            fn second_fundamental_form(&self, p: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) {
                S2.second_fundamental_form(p, x, y, out)
            }
            fn shape_operator(&self, p: &[f64], xi: &[f64], x: &[f64], out: &mut [f64]) {
                S2.shape_operator(p, xi, x, out)
            }
            fn curvature(&self, p: &[f64], a: &[f64], b: &[f64], c: &[f64], out: &mut [f64]) {
                S2.curvature(p, a, b, c, out)
            }
            fn transport_spinor(&self, from: &[f64], to: &[f64], s: &mut [Spinor]) {
                S2.transport_spinor(from, to, s)
            }
        }
        let mut slow = vec![C0; 3];
        Slow.curvature_contraction(p, &h, &x, &mut slow);
        let mut ii_fast = vec![Spinor::ZERO; 3];
        let mut ii_slow = vec![Spinor::ZERO; 3];
        S2.second_fundamental_form_spinor(p, &x, st.psi.point(4), &mut ii_fast);
        Slow.second_fundamental_form_spinor(p, &x, st.psi.point(4), &mut ii_slow);
        for k in 0..3 {
            assert!((fast[k] - slow[k]).norm() < 1e-14);
            assert!(ii_fast[k].max_abs_diff(&ii_slow[k]) < 1e-14);
        }
    }

    #[test]
    fn shape_operator_form_is_half_the_curvature_term() {
        let g = grid(16);
        let st = coupled_state(g, 9, g.dx());
        let x = [0.1, 0.7, -0.4];
        for i in 0..16 {
            let p = st.phi.point(i);
            for gamma in [gamma_t as fn(Spinor) -> Spinor, gamma_x] {
                let v = curvature_term(&S2, p, st.psi.point(i), gamma, &x);
                let s = shape_form_term(&S2, p, st.psi.point(i), gamma, &x);
                for k in 0..3 {
                    assert!((s[k] - 0.5 * v[k].re).abs() < 1e-13, "{s:?} {v:?}");
                }
            }
        }
    }

    fn geodesic_error(n: usize, t_final: f64) -> f64 {
        let g = grid(n);
        let dt = g.dx();
        let sol = UncoupledSolution::new(1.3, 1.0, Spinor::ZERO, Spinor::ZERO);
        let st = DWState::from_velocity(
            &S2,
            sol.sample_phi(g, 0.0),
            &sol.sample_phi_t(g, 0.0),
            Field::zeros(g, 3),
            0.0,
            dt,
        )
        .unwrap();
        let steps = (t_final / dt).round() as usize;
        let run = evolve(&S2, st, dt, steps).unwrap();
        let exact = sol.sample_phi(g, run.time(steps));
        run.phi[steps].zip_with(&exact, |a, b| a - b).l2_norm()
    }

    #[test]
    fn geodesic_wave_map_converges_at_second_order() {
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&n| geodesic_error(n, 1.0))
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..2.2).contains(&order), "{errs:?}");
        }
    }

    #[test]
    fn flat_target_spinor_is_free_transport() {
        let g = grid(32);
        let flat = FlatTarget { q: 2 };
        let phi = random_real_field(g, 2, 1, 0, 3, 1.0);
        let phi_t = random_real_field(g, 2, 1, 5, 3, 1.0);
        let psi = random_spinor_field(g, 2, 4, 3, 1.0);
        let st = DWState::from_velocity(&flat, phi, &phi_t, psi.clone(), 0.0, g.dx()).unwrap();
        let run = evolve(&flat, st, g.dx(), 10).unwrap();
        let mut want = psi;
        for n in 1..=10 {
            want = free_transport_step(&want);
            let diff = run.psi[n].zip_with(&want, |a, b| a - b).max_magnitude();
            assert!(diff <= 1e-12, "{diff}");
        }
    }

    #[test]
    fn constraint_and_tangency_hold_every_step() {
        let g = grid(64);
        let run = evolve(&S2, coupled_state(g, 7, g.dx()), g.dx(), 40).unwrap();
        for n in 0..run.levels() {
            let st = run.state(n);
            assert!(st.constraint_defect(&S2) <= 1e-12);
            assert!(st.tangency_defect(&S2) <= 1e-12);
        }
    }

    #[test]
    fn wrong_shape_and_cfl_are_rejected() {
        let g = grid(16);
        let st = coupled_state(g, 1, g.dx());
        assert!(matches!(
            dwm_step(&st, &S2, 0.5 * g.dx()),
            Err(DwmError::Step(StepError::Cfl { .. }))
        ));
        assert!(matches!(
            dwm_step(&st, &SphereTarget { q: 4 }, g.dx()),
            Err(DwmError::Shape {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn twistor_with_zero_slope_is_constant() {
        let s = Spinor::new(c(0.2, 0.1), c(-0.4, 0.3));
        let f = twistor_field(grid(16), 1.7, s, Spinor::ZERO);
        assert!(f.values().iter().all(|&v| v == s));
    }

    #[test]
    fn twistor_equation_holds_in_the_adopted_convention() {
        let g = Grid::new(4.0, 64).unwrap();
        let (p1, p2) = (
            Spinor::new(c(0.2, 0.1), c(-0.4, 0.3)),
            Spinor::new(c(0.5, -0.2), c(0.1, 0.6)),
        );
        let dt = g.dx();
        let h = History::new(
            twistor_field(g, 0.3 - dt, p1, p2),
            twistor_field(g, 0.3, p1, p2),
            twistor_field(g, 0.3 + dt, p1, p2),
            dt,
        )
        .unwrap();
        let dtf = h.time_diff();
        let dxf = h.mid.central_diff();
        for i in 1..63 {
            let (a, b) = (dtf.values()[i], dxf.values()[i]);
            let d = gamma_t(a) - gamma_x(b);
            assert!(d.max_abs_diff(&(p2 * 2.0)) < 1e-12);
            assert!((a - gamma_t(d) * 0.5).norm_sqr() < 1e-24);
            assert!((b - gamma_x(d) * 0.5).norm_sqr() < 1e-24);
        }
    }

    fn uncoupled_residuals(sol: UncoupledSolution, n: usize) -> (f64, f64) {
        let g = grid(n);
        let dt = g.dx();
        let t = 0.4;
        let ph = History::new(
            sol.sample_phi(g, t - dt),
            sol.sample_phi(g, t),
            sol.sample_phi(g, t + dt),
            dt,
        )
        .unwrap();
        let ps = History::new(
            sol.sample_psi(g, t - dt),
            sol.sample_psi(g, t),
            sol.sample_psi(g, t + dt),
            dt,
        )
        .unwrap();
        (
            map_residual(&S2, &ph, &ps.mid).max_abs(),
            spinor_residual(&S2, &ph, &ps).max_magnitude(),
        )
    }

    #[test]
    fn uncoupled_solution_residuals_are_second_order() {
        let chi = Spinor::new(c(0.6, 0.2), c(-0.3, 0.5));
        for (a, b) in [(1.0, 0.0), (1.0, 1.0), (0.5, 2.0)] {
            let sol = UncoupledSolution::new(a, b, chi, Spinor::ZERO);
            let (m1, s1) = uncoupled_residuals(sol, 64);
            let (m2, s2) = uncoupled_residuals(sol, 128);
            let map_ok = m2 < 1e-11 || (3.5..4.5).contains(&(m1 / m2));
            let spin_ok = s2 < 1e-11 || (3.5..4.5).contains(&(s1 / s2));
            assert!(
                map_ok && spin_ok,
                "a={a} b={b}: map {m1:e} {m2:e}, spinor {s1:e} {s2:e}"
            );
        }
    }

    #[test]
    fn static_uncoupled_solution_is_trivial() {
        let sol = UncoupledSolution::new(
            0.0,
            0.0,
            Spinor::new(c(1.0, 0.0), c(0.0, 1.0)),
            Spinor::ZERO,
        );
        let g = grid(16);
        assert!(sol
            .sample_psi(g, 0.5)
            .values()
            .iter()
            .all(|&s| s == Spinor::ZERO));
        assert_eq!(uncoupled_residuals(sol, 16), (0.0, 0.0));
    }

    #[test]
    fn uncoupled_solution_is_tangent_with_vanishing_coupling() {
        let sol = UncoupledSolution::new(
            1.0,
            1.0,
            Spinor::new(c(0.6, 0.2), c(-0.3, 0.5)),
            Spinor::ZERO,
        );
        let g = grid(64);
        let st = sol.state(g, 0.3, g.dx());
        assert!(st.tangency_defect(&S2) <= 1e-12);
        for i in 0..64 {
            let x = g.x(i);
            let p = st.phi.point(i);
            let vt = curvature_term(&S2, p, st.psi.point(i), gamma_t, &sol.phi_t(0.3, x));
            let vx = curvature_term(&S2, p, st.psi.point(i), gamma_x, &sol.phi_x(0.3, x));
            assert!(vt.iter().chain(&vx).all(|z| z.norm() <= 1e-12));
        }
    }

    #[test]
    fn twistor_uncoupled_solution_solves_the_spinor_equation() {
        // χ2 ≠ 0 breaks periodicity, so only interior points are checked.
        let sol = UncoupledSolution::new(
            0.7,
            1.0,
            Spinor::new(c(0.6, 0.2), c(-0.3, 0.5)),
            Spinor::new(c(0.1, -0.2), c(0.3, 0.1)),
        );
        let res = |n: usize| {
            let g = grid(n);
            let dt = g.dx();
            let ph = History::new(
                sol.sample_phi(g, 0.5 - dt),
                sol.sample_phi(g, 0.5),
                sol.sample_phi(g, 0.5 + dt),
                dt,
            )
            .unwrap();
            let ps = History::new(
                sol.sample_psi(g, 0.5 - dt),
                sol.sample_psi(g, 0.5),
                sol.sample_psi(g, 0.5 + dt),
                dt,
            )
            .unwrap();
            let r = spinor_residual(&S2, &ph, &ps);
            let m = map_residual(&S2, &ph, &ps.mid);
            let sr = (1..n - 1)
                .map(|i| r.point(i).iter().map(|s| s.norm_sqr()).sum::<f64>())
                .fold(0.0, f64::max)
                .sqrt();
            let mr = (1..n - 1)
                .map(|i| m.point(i).iter().map(|s| s * s).sum::<f64>())
                .fold(0.0, f64::max)
                .sqrt();
            (sr, mr)
        };
        let (s1, m1) = res(64);
        let (s2, m2) = res(128);
        assert!((3.5..4.5).contains(&(s1 / s2)), "{s1:e} {s2:e}");
        assert!((3.5..4.5).contains(&(m1 / m2)), "{m1:e} {m2:e}");
    }

    fn coupled_run(n: usize, t_final: f64) -> DwmRun {
        let g = grid(n);
        let steps = (t_final / g.dx()).round() as usize;
        evolve(&S2, coupled_state(g, 21, g.dx()), g.dx(), steps).unwrap()
    }

    fn e_dw_drift(run: &DwmRun, sigma: f64) -> f64 {
        let vals: Vec<f64> = (1..run.levels() - 1)
            .map(|n| e_dw(&S2, &run.phi_history(n), &run.psi_history(n), sigma))
            .collect();
        crate::monitors::relative_drift(&vals)
    }

    #[test]
    fn energy_sign_is_calibrated_on_coupled_data() {
        let (a, b) = (coupled_run(64, 1.0), coupled_run(128, 1.0));
        let plus = (e_dw_drift(&a, 1.0), e_dw_drift(&b, 1.0));
        let minus = (e_dw_drift(&a, -1.0), e_dw_drift(&b, -1.0));
        assert!(
            (3.0..5.0).contains(&(plus.0 / plus.1)),
            "{plus:?} {minus:?}"
        );
        assert!(minus.1 > 10.0 * plus.1, "{plus:?} {minus:?}");
    }

    #[test]
    fn spinor_l2_energy_is_conserved_along_coupled_runs() {
        let run = coupled_run(64, 1.0);
        let vals: Vec<f64> = run.psi.iter().map(e1).collect();
        assert!(crate::monitors::relative_drift(&vals) < 1e-12);
    }

    fn five<T>(v: &[T], n: usize) -> [&T; 5] {
        core::array::from_fn(|k| &v[n - 2 + k])
    }

    fn identity_residuals(n: usize) -> (f64, f64, f64) {
        let run = coupled_run(n, 0.5);
        let mid = run.levels() / 2;
        let (rt, rx) = divergence_residual(&S2, five(&run.phi, mid), five(&run.psi, mid), run.dt);
        let be = box_e_residual(&S2, five(&run.phi, mid), five(&run.psi, mid), run.dt);
        let bal = gradient_balance_defect(&S2, &run.phi[mid], &run.psi_history(mid));
        (rt.max_abs().max(rx.max_abs()), be.max_abs(), bal)
    }

    #[test]
    fn local_identities_hold_at_second_order() {
        let a = identity_residuals(64);
        let b = identity_residuals(128);
        assert!((3.0..5.0).contains(&(a.0 / b.0)), "divergence {a:?} {b:?}");
        assert!((3.0..5.0).contains(&(a.1 / b.1)), "box e {a:?} {b:?}");
        assert!((3.0..5.0).contains(&(a.2 / b.2)), "balance {a:?} {b:?}");
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        assert_eq!(coupled_run(32, 0.5), coupled_run(32, 0.5));
    }
}
