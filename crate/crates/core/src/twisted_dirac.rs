//! Spinors twisted by a trivial `C^r` bundle with a metric connection.
//!
//! A twisted field is a `Field<Spinor>` with `r` components per point; the
//! connection `∇̃ = ∂ + A` acts on the component index. In components the
//! equation `iD^Fψ = λψ` reads
//!
//! ```text
//! (∂_t + ∂_x)u = −(A_t + A_x)u − iλv
//! (∂_t − ∂_x)v = −(A_t − A_x)v − iλu
//! ```
//!
//! so along each characteristic the zero-order part is a skew-Hermitian
//! linear system and its exponential is unitary.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // unused only when std is in the build graph
use num_traits::Float;

use crate::clifford::{self, Spinor};
use crate::cmat::CMat;
use crate::grid::{check_cfl, Field, Grid, History, StepError};
use crate::linear_dirac::{beta_density, chirality_density, transport};
use crate::math;

const I: Complex64 = Complex64::new(0.0, 1.0);
const FD_STEP: f64 = 1e-5;

/// Connection coefficients `A_t(t,x)`, `A_x(t,x)`, skew-Hermitian `r×r`.
///
/// The derivative methods default to centered finite differences; closed-form
/// connections override them.
pub trait Connection: Sync {
    fn rank(&self) -> usize;
    fn a_t(&self, t: f64, x: f64) -> CMat;
    fn a_x(&self, t: f64, x: f64) -> CMat;

    /// True when neither coefficient depends on `t`.
    fn is_static(&self) -> bool {
        false
    }

    fn dt_a_t(&self, t: f64, x: f64) -> CMat {
        fd(|s| self.a_t(t + s, x))
    }
    fn dt_a_x(&self, t: f64, x: f64) -> CMat {
        fd(|s| self.a_x(t + s, x))
    }
    fn dx_a_t(&self, t: f64, x: f64) -> CMat {
        fd(|s| self.a_t(t, x + s))
    }
    fn dx_a_x(&self, t: f64, x: f64) -> CMat {
        fd(|s| self.a_x(t, x + s))
    }
}

fn fd(f: impl Fn(f64) -> CMat) -> CMat {
    (&f(FD_STEP) - &f(-FD_STEP)).scale_re(0.5 / FD_STEP)
}

/// `A = 0`.
#[derive(Clone, Copy, Debug)]
pub struct FlatConnection {
    pub rank: usize,
}

impl Connection for FlatConnection {
    fn rank(&self) -> usize {
        self.rank
    }
    fn a_t(&self, _: f64, _: f64) -> CMat {
        CMat::zeros(self.rank)
    }
    fn a_x(&self, _: f64, _: f64) -> CMat {
        CMat::zeros(self.rank)
    }
    fn is_static(&self) -> bool {
        true
    }
    fn dt_a_t(&self, _: f64, _: f64) -> CMat {
        CMat::zeros(self.rank)
    }
    fn dt_a_x(&self, _: f64, _: f64) -> CMat {
        CMat::zeros(self.rank)
    }
    fn dx_a_t(&self, _: f64, _: f64) -> CMat {
        CMat::zeros(self.rank)
    }
    fn dx_a_x(&self, _: f64, _: f64) -> CMat {
        CMat::zeros(self.rank)
    }
}

/// Rank one, `A_t = i·a·sin(kx)`, `A_x = i·b·cos(kx)` with `k = 2π·mode/L`.
///
/// Static; the curvature is `−i·a·k·cos(kx)` (the `A_x` part is pure gauge).
#[derive(Clone, Copy, Debug)]
pub struct AbelianWave {
    pub a: f64,
    pub b: f64,
    pub k: f64,
}

impl AbelianWave {
    pub fn new(length: f64, mode: u32, a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            k: 2.0 * core::f64::consts::PI * f64::from(mode) / length,
        }
    }

    pub fn curvature_exact(&self, x: f64) -> Complex64 {
        -I * self.a * self.k * math::cos(self.k * x)
    }
}

fn scalar1(z: Complex64) -> CMat {
    CMat::scalar(1, z)
}

impl Connection for AbelianWave {
    fn rank(&self) -> usize {
        1
    }
    fn a_t(&self, _: f64, x: f64) -> CMat {
        scalar1(I * self.a * math::sin(self.k * x))
    }
    fn a_x(&self, _: f64, x: f64) -> CMat {
        scalar1(I * self.b * math::cos(self.k * x))
    }
    fn is_static(&self) -> bool {
        true
    }
    fn dt_a_t(&self, _: f64, _: f64) -> CMat {
        CMat::zeros(1)
    }
    fn dt_a_x(&self, _: f64, _: f64) -> CMat {
        CMat::zeros(1)
    }
    fn dx_a_t(&self, _: f64, x: f64) -> CMat {
        scalar1(I * self.a * self.k * math::cos(self.k * x))
    }
    fn dx_a_x(&self, _: f64, x: f64) -> CMat {
        scalar1(-I * self.b * self.k * math::sin(self.k * x))
    }
}

/// Rank two, time-dependent and non-abelian:
/// `A_t = i·a·cos(ωt)·sin(kx)·σ_z`, `A_x = i·b·sin(kx + ωt)·σ_x`.
#[derive(Clone, Copy, Debug)]
pub struct SwirlConnection {
    pub a: f64,
    pub b: f64,
    pub k: f64,
    pub omega: f64,
}

impl SwirlConnection {
    pub fn new(length: f64, mode: u32, a: f64, b: f64, omega: f64) -> Self {
        Self {
            a,
            b,
            k: 2.0 * core::f64::consts::PI * f64::from(mode) / length,
            omega,
        }
    }

    fn sigma_z(s: Complex64) -> CMat {
        let z = Complex64::new(0.0, 0.0);
        CMat::from_rows(2, &[s, z, z, -s])
    }

    fn sigma_x(s: Complex64) -> CMat {
        let z = Complex64::new(0.0, 0.0);
        CMat::from_rows(2, &[z, s, s, z])
    }
}

impl Connection for SwirlConnection {
    fn rank(&self) -> usize {
        2
    }
    fn a_t(&self, t: f64, x: f64) -> CMat {
        Self::sigma_z(I * self.a * math::cos(self.omega * t) * math::sin(self.k * x))
    }
    fn a_x(&self, t: f64, x: f64) -> CMat {
        Self::sigma_x(I * self.b * math::sin(self.k * x + self.omega * t))
    }
    fn dt_a_t(&self, t: f64, x: f64) -> CMat {
        Self::sigma_z(-I * self.a * self.omega * math::sin(self.omega * t) * math::sin(self.k * x))
    }
    fn dt_a_x(&self, t: f64, x: f64) -> CMat {
        Self::sigma_x(I * self.b * self.omega * math::cos(self.k * x + self.omega * t))
    }
    fn dx_a_t(&self, t: f64, x: f64) -> CMat {
        Self::sigma_z(I * self.a * self.k * math::cos(self.omega * t) * math::cos(self.k * x))
    }
    fn dx_a_x(&self, t: f64, x: f64) -> CMat {
        Self::sigma_x(I * self.b * self.k * math::cos(self.k * x + self.omega * t))
    }
}

/// `R(∂_t, ∂_x) = ∂_tA_x − ∂_xA_t + [A_t, A_x]` at time `t` on every grid point.
pub fn curvature(conn: &dyn Connection, grid: &Grid, t: f64) -> Vec<CMat> {
    (0..grid.cells())
        .map(|i| curvature_at(conn, t, grid.x(i)))
        .collect()
}

pub fn curvature_at(conn: &dyn Connection, t: f64, x: f64) -> CMat {
    let d = &conn.dt_a_x(t, x) - &conn.dx_a_t(t, x);
    &d + &conn.a_t(t, x).commutator(&conn.a_x(t, x))
}

/// Applies the matrix field `m` (one `r×r` matrix per point) to the component
/// index of `psi`.
pub fn apply_matrices(m: &[CMat], psi: &Field<Spinor>) -> Field<Spinor> {
    let r = psi.dim();
    let mut out = psi.clone();
    for (i, mat) in m.iter().enumerate() {
        let p = psi.point(i);
        let o = out.point_mut(i);
        for (a, slot) in o.iter_mut().enumerate() {
            let mut acc = Spinor::ZERO;
            for (b, s) in p.iter().enumerate().take(r) {
                acc += s.scale(mat[(a, b)]);
            }
            *slot = acc;
        }
    }
    out
}

fn sample(grid: &Grid, f: impl Fn(f64) -> CMat) -> Vec<CMat> {
    (0..grid.cells()).map(|i| f(grid.x(i))).collect()
}

fn add(a: &Field<Spinor>, b: &Field<Spinor>) -> Field<Spinor> {
    a.zip_with(b, |p, q| p + q)
}

/// `∇̃_xψ = ∂_xψ + A_xψ` with a centered stencil, at time `t`.
pub fn twisted_dx(conn: &dyn Connection, psi: &Field<Spinor>, t: f64) -> Field<Spinor> {
    let ax = sample(psi.grid(), |x| conn.a_x(t, x));
    add(&psi.central_diff(), &apply_matrices(&ax, psi))
}

/// `∇̃_tψ` at the middle level of `h`, whose middle time is `t`.
pub fn twisted_dt(conn: &dyn Connection, h: &History<Spinor>, t: f64) -> Field<Spinor> {
    let at = sample(h.grid(), |x| conn.a_t(t, x));
    add(&h.time_diff(), &apply_matrices(&at, &h.mid))
}

/// The pointwise generator `G` of the zero-order system on `(u¹..u^r, v¹..v^r)`.
pub fn local_generator(conn: &dyn Connection, lambda: f64, t: f64, x: f64) -> CMat {
    let at = conn.a_t(t, x);
    let ax = conn.a_x(t, x);
    let r = at.dim();
    let mass = CMat::scalar(r, Complex64::new(0.0, -lambda));
    let uu = (&at + &ax).scale_re(-1.0);
    let vv = (&at - &ax).scale_re(-1.0);
    CMat::from_blocks(2, &[&uu, &mass, &mass, &vv])
}

fn apply_local(exps: &[CMat], psi: &Field<Spinor>) -> Field<Spinor> {
    let r = psi.dim();
    let mut out = psi.clone();
    let mut buf = Vec::with_capacity(2 * r);
    let mut scratch = Vec::with_capacity(2 * r);
    for (i, e) in exps.iter().enumerate() {
        buf.clear();
        buf.extend(psi.point(i).iter().map(|s| s.u));
        buf.extend(psi.point(i).iter().map(|s| s.v));
        e.apply_in_place(&mut buf, &mut scratch);
        for (c, slot) in out.point_mut(i).iter_mut().enumerate() {
            *slot = Spinor::new(buf[c], buf[r + c]);
        }
    }
    out
}

fn half_step_exps(conn: &dyn Connection, grid: &Grid, lambda: f64, t: f64, dt: f64) -> Vec<CMat> {
    sample(grid, |x| {
        local_generator(conn, lambda, t, x).scale_re(0.5 * dt).exp()
    })
}

/// Strang step of `iD^Fψ = λψ` from time `t` to `t + dt`.
pub fn twisted_step(
    psi: &Field<Spinor>,
    conn: &dyn Connection,
    lambda: f64,
    t: f64,
    dt: f64,
) -> Result<Field<Spinor>, StepError> {
    TwistedStepper::new(conn, *psi.grid(), lambda, dt)?.step(psi, t)
}

/// Reusable stepper that caches the local exponentials of static connections.
pub struct TwistedStepper<'a> {
    conn: &'a dyn Connection,
    grid: Grid,
    lambda: f64,
    dt: f64,
    cached: Option<Vec<CMat>>,
}

impl<'a> TwistedStepper<'a> {
    pub fn new(
        conn: &'a dyn Connection,
        grid: Grid,
        lambda: f64,
        dt: f64,
    ) -> Result<Self, StepError> {
        check_cfl(&grid, dt)?;
        let cached = conn
            .is_static()
            .then(|| half_step_exps(conn, &grid, lambda, 0.0, dt));
        Ok(Self {
            conn,
            grid,
            lambda,
            dt,
            cached,
        })
    }

    pub fn step(&self, psi: &Field<Spinor>, t: f64) -> Result<Field<Spinor>, StepError> {
        let r = self.conn.rank();
        if psi.dim() != r {
            return Err(StepError::ShapeMismatch {
                expected: r,
                got: psi.dim(),
            });
        }
        let (first, second);
        let (e0, e1) = match &self.cached {
            Some(e) => (e, e),
            None => {
                first = half_step_exps(self.conn, &self.grid, self.lambda, t, self.dt);
                second = half_step_exps(self.conn, &self.grid, self.lambda, t + self.dt, self.dt);
                (&first, &second)
            }
        };
        let a = apply_local(e0, psi);
        let b = transport(&a);
        Ok(apply_local(e1, &b))
    }
}

/// `(D^F)²ψ − [∇̃_t²ψ − ∇̃_x²ψ − γ_tγ_x·R(∂_t,∂_x)ψ]` at the middle level.
///
/// The left side is assembled from compositions of first-order discrete
/// covariant derivatives (half-level differences for the pure terms, centered
/// differences for the mixed ones); the right side uses the expanded second
/// derivatives with the connection's own derivatives and the curvature. The
/// curvature sign follows from `γ_xγ_t = −γ_tγ_x`.
pub fn weitzenboeck_defect(
    h: &History<Spinor>,
    conn: &dyn Connection,
    t_mid: f64,
) -> Field<Spinor> {
    let grid = *h.grid();
    let dt = h.dt;
    let dx = grid.dx();
    let n = grid.cells();
    let r = h.mid.dim();
    let (tm, tp) = (t_mid - dt, t_mid + dt);

    // ∇̃_t∇̃_t through half levels.
    let half_dt = |lo: &Field<Spinor>, hi: &Field<Spinor>, th: f64| {
        let at = sample(&grid, |x| conn.a_t(th, x));
        let diff = hi.zip_with(lo, |a, b| (a - b) * (1.0 / dt));
        let avg = hi.zip_with(lo, |a, b| (a + b) * 0.5);
        add(&diff, &apply_matrices(&at, &avg))
    };
    let lo_t = half_dt(&h.prev, &h.mid, t_mid - 0.5 * dt);
    let hi_t = half_dt(&h.mid, &h.next, t_mid + 0.5 * dt);
    let at_mid = sample(&grid, |x| conn.a_t(t_mid, x));
    let tt = add(
        &hi_t.zip_with(&lo_t, |a, b| (a - b) * (1.0 / dt)),
        &apply_matrices(&at_mid, &hi_t.zip_with(&lo_t, |a, b| (a + b) * 0.5)),
    );

    // ∇̃_x∇̃_x through half points.
    // hx[i] lives at x_{i+1/2}.
    let hx = {
        let mut vals = Vec::with_capacity(n * r);
        let mut avgs = Vec::with_capacity(n * r);
        for i in 0..n {
            let j = (i + 1) % n;
            for c in 0..r {
                let (a, b) = (h.mid.point(i)[c], h.mid.point(j)[c]);
                vals.push((b - a) * (1.0 / dx));
                avgs.push((a + b) * 0.5);
            }
        }
        let ax_half = sample(&grid, |x| conn.a_x(t_mid, x + 0.5 * dx));
        let diff = Field::from_values_unchecked(grid, r, vals);
        let avg = Field::from_values_unchecked(grid, r, avgs);
        add(&diff, &apply_matrices(&ax_half, &avg))
    };
    let hx_lo = hx.shift(1);
    let ax_mid = sample(&grid, |x| conn.a_x(t_mid, x));
    let xx = add(
        &hx.zip_with(&hx_lo, |a, b| (a - b) * (1.0 / dx)),
        &apply_matrices(&ax_mid, &hx.zip_with(&hx_lo, |a, b| (a + b) * 0.5)),
    );

    // Mixed terms.
    let dx_prev = twisted_dx(conn, &h.prev, tm);
    let dx_mid = twisted_dx(conn, &h.mid, t_mid);
    let dx_next = twisted_dx(conn, &h.next, tp);
    let hxl = History::new(dx_prev, dx_mid, dx_next, dt).expect("consistent levels");
    let t_of_x = twisted_dt(conn, &hxl, t_mid);
    let dt_mid = twisted_dt(conn, h, t_mid);
    let x_of_t = twisted_dx(conn, &dt_mid, t_mid);

    let lhs = {
        let a = tt.zip_with(&xx, |p, q| p - q);
        let b = t_of_x.zip_with(&x_of_t, |p, q| clifford::gamma_tx(p - q));
        a.zip_with(&b, |p, q| p - q)
    };

    // Expanded right side.
    let psi = &h.mid;
    let psi_t = h.time_diff();
    let psi_tt = h.time_second_diff();
    let psi_x = psi.central_diff();
    let psi_xx = psi.second_diff();
    let expand = |second: &Field<Spinor>, first: &Field<Spinor>, a: &[CMat], da: &[CMat]| {
        let a2: Vec<CMat> = a.iter().map(|m| m * m).collect();
        let two_a: Vec<CMat> = a.iter().map(|m| m.scale_re(2.0)).collect();
        let s = add(second, &apply_matrices(da, psi));
        let s = add(&s, &apply_matrices(&two_a, first));
        add(&s, &apply_matrices(&a2, psi))
    };
    let dat = sample(&grid, |x| conn.dt_a_t(t_mid, x));
    let dax = sample(&grid, |x| conn.dx_a_x(t_mid, x));
    let rt = expand(&psi_tt, &psi_t, &at_mid, &dat);
    let rx = expand(&psi_xx, &psi_x, &ax_mid, &dax);
    let curv = curvature(conn, &grid, t_mid);
    let rpsi = apply_matrices(&curv, psi).map(clifford::gamma_tx);
    let rhs = rt.zip_with(&rx, |p, q| p - q).zip_with(&rpsi, |p, q| p - q);

    lhs.zip_with(&rhs, |p, q| p - q)
}

/// `Ẽ1 = ½∫|ψ|²_β`.
pub fn tilde_e1(psi: &Field<Spinor>) -> f64 {
    0.5 * beta_density(psi).integrate()
}

/// `Ẽ3 = ½∫(|∇̃_tψ|²_β + |∇̃_xψ|²_β)` at the middle level.
pub fn tilde_e3(conn: &dyn Connection, h: &History<Spinor>, t_mid: f64) -> f64 {
    let pt = twisted_dt(conn, h, t_mid);
    let px = twisted_dx(conn, &h.mid, t_mid);
    0.5 * pt
        .zip_with(&px, |a, b| a.norm_sqr() + b.norm_sqr())
        .map_points(|p| p.iter().sum())
        .integrate()
}

/// `Ẽ4 = ∫(|ψ|⁴_β + ⟨∂_x·ψ,ψ⟩²)`.
pub fn tilde_e4(psi: &Field<Spinor>) -> f64 {
    beta_density(psi)
        .zip_with(&chirality_density(psi), |r, w| r * r + w * w)
        .integrate()
}

/// `∫|R(∂_t,∂_x)|²` with the Frobenius norm.
pub fn curvature_l2_sq(conn: &dyn Connection, grid: &Grid, t: f64) -> f64 {
    grid.dx()
        * curvature(conn, grid, t)
            .iter()
            .map(CMat::frobenius_sq)
            .sum::<f64>()
}

/// One step of the `Ẽ3` growth audit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthRecord {
    pub t: f64,
    pub rate: f64,
    pub bound: f64,
}

impl GrowthRecord {
    pub fn margin(&self) -> f64 {
        self.bound - self.rate
    }

    pub fn holds(&self, rel_slack: f64) -> bool {
        self.rate <= self.bound + rel_slack * self.bound.abs()
    }
}

/// Audits `dẼ3/dt ≤ Ẽ3 + ½‖|ψ|²_β‖_∞ ∫|R|²` along `levels` (spaced by `dt`,
/// first level at `t0`). Needs at least five levels; one record per interior
/// level with a full stencil.
pub fn tilde_e3_audit(
    conn: &dyn Connection,
    levels: &[Field<Spinor>],
    t0: f64,
    dt: f64,
) -> Vec<GrowthRecord> {
    let m = levels.len();
    if m < 5 {
        return Vec::new();
    }
    let t_of = |n: usize| t0 + n as f64 * dt;
    let e3_at = |n: usize| {
        let h = History::new(
            levels[n - 1].clone(),
            levels[n].clone(),
            levels[n + 1].clone(),
            dt,
        )
        .expect("consistent levels");
        tilde_e3(conn, &h, t_of(n))
    };
    let e3: Vec<f64> = (1..m - 1).map(e3_at).collect(); // e3[j] at level j+1
    (2..m - 2)
        .map(|n| {
            let rate = (e3[n] - e3[n - 2]) / (2.0 * dt);
            let sup = beta_density(&levels[n]).max_value();
            let bound = e3[n - 1] + 0.5 * sup * curvature_l2_sq(conn, levels[n].grid(), t_of(n));
            GrowthRecord {
                t: t_of(n),
                rate,
                bound,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::random_spinor_field;
    use crate::linear_dirac::massive_step;
    use core::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(2.0 * PI, n).unwrap()
    }

    #[test]
    fn flat_curvature_vanishes() {
        let g = grid(16);
        let conn = FlatConnection { rank: 2 };
        assert!(curvature(&conn, &g, 0.3).iter().all(|m| m.max_abs() == 0.0));
    }

    #[test]
    fn abelian_curvature_closed_form() {
        let g = grid(32);
        let conn = AbelianWave::new(g.length(), 1, 0.7, 0.4);
        for (i, m) in curvature(&conn, &g, 0.0).iter().enumerate() {
            assert!((m[(0, 0)] - conn.curvature_exact(g.x(i))).norm() < 1e-14);
        }
    }

    /// Same as `SwirlConnection` but with derivatives left to finite differences.
    struct NumericSwirl(SwirlConnection);

    impl Connection for NumericSwirl {
        fn rank(&self) -> usize {
            2
        }
        fn a_t(&self, t: f64, x: f64) -> CMat {
            self.0.a_t(t, x)
        }
        fn a_x(&self, t: f64, x: f64) -> CMat {
            self.0.a_x(t, x)
        }
    }

    #[test]
    fn analytic_and_numeric_derivatives_agree() {
        let g = grid(16);
        let swirl = SwirlConnection::new(g.length(), 1, 0.8, 0.5, 1.3);
        let numeric = NumericSwirl(swirl);
        let a = curvature(&swirl, &g, 0.4);
        let b = curvature(&numeric, &g, 0.4);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).max_abs() < 1e-8);
            assert!(p.skew_hermitian_defect() < 1e-12);
        }
    }

    #[test]
    fn flat_rank_one_step_is_massive_step() {
        let g = grid(64);
        let psi = random_spinor_field(g, 1, 3, 4, 1.0);
        let conn = FlatConnection { rank: 1 };
        let a = twisted_step(&psi, &conn, 0.9, 0.0, g.dx()).unwrap();
        let b = massive_step(&psi, 0.9, g.dx()).unwrap();
        assert!(a.zip_with(&b, |p, q| p - q).max_magnitude() < 1e-14);
    }

    #[test]
    fn step_rejects_rank_mismatch() {
        let g = grid(16);
        let conn = FlatConnection { rank: 2 };
        let psi = Field::zeros(g, 1);
        assert_eq!(
            twisted_step(&psi, &conn, 0.0, 0.0, g.dx()),
            Err(StepError::ShapeMismatch {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn step_preserves_pointwise_norm_sum() {
        let g = grid(64);
        let conn = SwirlConnection::new(g.length(), 2, 0.9, 0.6, 0.7);
        let psi = random_spinor_field(g, 2, 8, 4, 1.0);
        let next = twisted_step(&psi, &conn, 1.1, 0.2, g.dx()).unwrap();
        assert!((tilde_e1(&psi) - tilde_e1(&next)).abs() < 1e-13 * tilde_e1(&psi));
    }

    #[test]
    fn local_generator_is_skew_hermitian() {
        let conn = SwirlConnection::new(3.0, 1, 0.9, 0.6, 0.7);
        assert!(local_generator(&conn, 1.5, 0.3, 0.8).skew_hermitian_defect() < 1e-15);
    }

    /// Builds `U(t,x)=exp(i f(t,x) H)` and the transformed connection `UAU⁻¹ − (∂U)U⁻¹`.
    struct Gauged<C> {
        inner: C,
    }

    impl<C> Gauged<C> {
        fn f(t: f64, x: f64) -> f64 {
            0.7 * (x + 0.3 * t).sin() + 0.2 * t
        }
        fn h() -> CMat {
            let c = |a: f64, b: f64| Complex64::new(a, b);
            CMat::from_rows(2, &[c(1.0, 0.0), c(0.3, -0.4), c(0.3, 0.4), c(-0.5, 0.0)])
        }
        fn u(t: f64, x: f64) -> CMat {
            Self::h().scale(I * Self::f(t, x)).exp()
        }
        fn transform(a: CMat, df: f64, t: f64, x: f64) -> CMat {
            let u = Self::u(t, x);
            let conj = &(&u * &a) * &u.adjoint();
            // (∂U)U⁻¹ = i ∂f H since H commutes with U.
            &conj - &Self::h().scale(I * df)
        }
    }

    impl<C: Connection> Connection for Gauged<C> {
        fn rank(&self) -> usize {
            2
        }
        fn a_t(&self, t: f64, x: f64) -> CMat {
            let df = 0.7 * 0.3 * (x + 0.3 * t).cos() + 0.2;
            Self::transform(self.inner.a_t(t, x), df, t, x)
        }
        fn a_x(&self, t: f64, x: f64) -> CMat {
            let df = 0.7 * (x + 0.3 * t).cos();
            Self::transform(self.inner.a_x(t, x), df, t, x)
        }
    }

    #[test]
    fn curvature_is_gauge_covariant() {
        let g = grid(16);
        let base = SwirlConnection::new(g.length(), 1, 0.8, 0.5, 1.3);
        let gauged = Gauged { inner: base };
        let t = 0.35;
        for i in 0..g.cells() {
            let x = g.x(i);
            let r = curvature_at(&base, t, x);
            let u = Gauged::<SwirlConnection>::u(t, x);
            let want = &(&u * &r) * &u.adjoint();
            let got = curvature_at(&gauged, t, x);
            assert!((&want - &got).max_abs() < 1e-9, "point {i}");
        }
    }

    fn weitzenboeck_error(conn: &dyn Connection, n: usize) -> f64 {
        let g = grid(n);
        let r = conn.rank();
        let dt = g.dx();
        let base = random_spinor_field(g, r, 21, 3, 1.0);
        let drift = random_spinor_field(g, r, 22, 3, 1.0);
        let lv = |t: f64| base.zip_with(&drift, |a, b| a + b * (t + 0.4 * t * t));
        let t0 = 0.2;
        let h = History::new(lv(t0 - dt), lv(t0), lv(t0 + dt), dt).unwrap();
        weitzenboeck_defect(&h, conn, t0).max_magnitude()
    }

    #[test]
    fn weitzenboeck_second_order_abelian() {
        let conn = AbelianWave::new(2.0 * PI, 1, 0.8, 0.3);
        let ratio = weitzenboeck_error(&conn, 64) / weitzenboeck_error(&conn, 128);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn weitzenboeck_second_order_nonabelian() {
        let conn = SwirlConnection::new(2.0 * PI, 1, 0.8, 0.5, 1.3);
        let ratio = weitzenboeck_error(&conn, 64) / weitzenboeck_error(&conn, 128);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn weitzenboeck_zero_field() {
        let g = grid(16);
        let z = Field::zeros(g, 1);
        let h = History::new(z.clone(), z.clone(), z, g.dx()).unwrap();
        let conn = AbelianWave::new(g.length(), 1, 0.8, 0.3);
        assert_eq!(weitzenboeck_defect(&h, &conn, 0.0).max_magnitude(), 0.0);
    }

    #[test]
    fn flat_weitzenboeck_is_roundoff() {
        let conn = FlatConnection { rank: 1 };
        assert!(weitzenboeck_error(&conn, 64) < 1e-9);
    }
}
