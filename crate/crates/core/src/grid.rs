//! Periodic 1-D grid, field containers and the discrete calculus on them.

use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;
#[allow(unused_imports)] // unused only when std is in the build graph
use num_traits::Float;

use crate::clifford::Spinor;

#[derive(Clone, Debug, PartialEq)]
pub enum GridError {
    TooFewCells(usize),
    OddCells(usize),
    BadLength(f64),
    WrongLength { expected: usize, got: usize },
    NonFinite { index: usize },
    LevelMismatch,
    BadTimeStep(f64),
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::TooFewCells(n) => write!(f, "grid needs at least 8 cells, got {n}"),
            GridError::OddCells(n) => write!(f, "grid cell count must be even, got {n}"),
            GridError::BadLength(l) => {
                write!(f, "grid length must be positive and finite, got {l}")
            }
            GridError::WrongLength { expected, got } => {
                write!(f, "field has {got} values, expected {expected}")
            }
            GridError::NonFinite { index } => write!(f, "non-finite field value at index {index}"),
            GridError::LevelMismatch => write!(f, "history levels do not share one grid and shape"),
            GridError::BadTimeStep(dt) => write!(f, "time step must be positive, got {dt}"),
        }
    }
}

/// Failure of a time step's preconditions.
#[derive(Clone, Debug, PartialEq)]
pub enum StepError {
    /// The schemes transport by exact index shifts, which needs `dt = dx`.
    Cfl {
        dt: f64,
        dx: f64,
    },
    ShapeMismatch {
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepError::Cfl { dt, dx } => write!(f, "time step {dt} must equal grid spacing {dx}"),
            StepError::ShapeMismatch { expected, got } => {
                write!(
                    f,
                    "field has {got} components per point, expected {expected}"
                )
            }
        }
    }
}

/// Accepts `dt` within a few ulps of `dx`.
pub fn check_cfl(grid: &Grid, dt: f64) -> Result<(), StepError> {
    if (dt - grid.dx).abs() <= 1e-12 * grid.dx {
        Ok(())
    } else {
        Err(StepError::Cfl { dt, dx: grid.dx })
    }
}

/// Periodic grid on `[0, length)` with `cells` points `x_i = i·dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    length: f64,
    cells: usize,
    dx: f64,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self, GridError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(GridError::BadLength(length));
        }
        if cells < 8 {
            return Err(GridError::TooFewCells(cells));
        }
        if !cells.is_multiple_of(2) {
            return Err(GridError::OddCells(cells));
        }
        Ok(Self {
            length,
            cells,
            dx: length / cells as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// Same length, twice the cells.
    pub fn refined(&self) -> Self {
        Self::new(self.length, 2 * self.cells).expect("refining a valid grid")
    }

    #[inline]
    pub(crate) fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.cells as isize) as usize
    }
}

/// Values that can live at a grid point: a vector space over the reals.
pub trait Fiber:
    Copy + Default + PartialEq + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn is_finite_value(&self) -> bool;
    /// Squared magnitude used for max-norms and L² norms of fields.
    fn magnitude_sq(&self) -> f64;
}

impl Fiber for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
    fn magnitude_sq(&self) -> f64 {
        self * self
    }
}

impl Fiber for Complex64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
    fn magnitude_sq(&self) -> f64 {
        self.norm_sqr()
    }
}

impl Fiber for Spinor {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
    fn magnitude_sq(&self) -> f64 {
        self.norm_sqr()
    }
}

/// A periodic sampling with `dim` fiber values per grid point, stored
/// point-major: component `c` of point `i` is `values[i * dim + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<V> {
    grid: Grid,
    dim: usize,
    values: Vec<V>,
}

impl<V: Fiber> Field<V> {
    pub fn new(grid: Grid, dim: usize, values: Vec<V>) -> Result<Self, GridError> {
        let expected = grid.cells * dim;
        if values.len() != expected {
            return Err(GridError::WrongLength {
                expected,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite_value()) {
            return Err(GridError::NonFinite { index });
        }
        Ok(Self { grid, dim, values })
    }

    /// Builds a field without the finiteness check (used inside steppers,
    /// where blow-up is detected separately).
    pub fn from_values_unchecked(grid: Grid, dim: usize, values: Vec<V>) -> Self {
        assert_eq!(values.len(), grid.cells * dim, "field length");
        Self { grid, dim, values }
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            values: alloc::vec![V::default(); grid.cells * dim],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64) -> V) -> Self {
        let values = (0..grid.cells).map(|i| f(grid.x(i))).collect();
        Self {
            grid,
            dim: 1,
            values,
        }
    }

    pub fn from_fn_multi(grid: Grid, dim: usize, mut f: impl FnMut(f64, usize) -> V) -> Self {
        let mut values = Vec::with_capacity(grid.cells * dim);
        for i in 0..grid.cells {
            let x = grid.x(i);
            for c in 0..dim {
                values.push(f(x, c));
            }
        }
        Self { grid, dim, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.cells
    }

    pub fn is_empty(&self) -> bool {
        self.grid.cells == 0
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [V] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<V> {
        self.values
    }

    pub fn point(&self, i: usize) -> &[V] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [V] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Value at periodic index `i` (scalar-per-point fields).
    pub fn at(&self, i: isize) -> V {
        self.values[self.grid.wrap(i) * self.dim]
    }

    pub fn same_shape(&self, other: &Field<V>) -> bool {
        self.grid == other.grid && self.dim == other.dim
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite_value())
    }

    pub fn map<W: Fiber>(&self, f: impl Fn(V) -> W) -> Field<W> {
        Field {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// One output value per grid point from the point's component slice.
    pub fn map_points<W: Fiber>(&self, f: impl Fn(&[V]) -> W) -> Field<W> {
        let values = (0..self.grid.cells).map(|i| f(self.point(i))).collect();
        Field {
            grid: self.grid,
            dim: 1,
            values,
        }
    }

    pub fn zip_with<W: Fiber, Z: Fiber>(
        &self,
        other: &Field<W>,
        f: impl Fn(V, W) -> Z,
    ) -> Field<Z> {
        assert!(
            self.grid == other.grid && self.dim == other.dim,
            "zip of mismatched fields"
        );
        Field {
            grid: self.grid,
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Field<V> {
        self.map(|v| v * s)
    }

    /// `out[i] = f[(i − cells) mod N]`: a pure permutation of the points.
    pub fn shift(&self, cells: isize) -> Field<V> {
        let n = self.grid.cells;
        let d = self.dim;
        let mut values = Vec::with_capacity(self.values.len());
        let s = self.grid.wrap(-cells);
        values.extend_from_slice(&self.values[s * d..]);
        values.extend_from_slice(&self.values[..s * d]);
        debug_assert_eq!(values.len(), n * d);
        Field {
            grid: self.grid,
            dim: d,
            values,
        }
    }

    /// Centered difference `(f[i+1] − f[i−1]) / (2 dx)` componentwise.
    pub fn central_diff(&self) -> Field<V> {
        let n = self.grid.cells as isize;
        let d = self.dim;
        let inv = 1.0 / (2.0 * self.grid.dx);
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..n {
            let ip = self.grid.wrap(i + 1) * d;
            let im = self.grid.wrap(i - 1) * d;
            for c in 0..d {
                values.push((self.values[ip + c] - self.values[im + c]) * inv);
            }
        }
        Field {
            grid: self.grid,
            dim: d,
            values,
        }
    }

    /// `(f[i+1] − 2f[i] + f[i−1]) / dx²` componentwise.
    pub fn second_diff(&self) -> Field<V> {
        let n = self.grid.cells as isize;
        let d = self.dim;
        let inv = 1.0 / (self.grid.dx * self.grid.dx);
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..n {
            let i0 = i as usize * d;
            let ip = self.grid.wrap(i + 1) * d;
            let im = self.grid.wrap(i - 1) * d;
            for c in 0..d {
                let v = self.values[ip + c] - self.values[i0 + c] * 2.0 + self.values[im + c];
                values.push(v * inv);
            }
        }
        Field {
            grid: self.grid,
            dim: d,
            values,
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.magnitude_sq()))
            .sqrt()
    }

    /// `(dx Σ |f|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx * self.values.iter().map(|v| v.magnitude_sq()).sum::<f64>()).sqrt()
    }
}

impl Field<f64> {
    /// Rectangle rule `dx Σ f[i]` over all components.
    pub fn integrate(&self) -> f64 {
        self.grid.dx * self.values.iter().sum::<f64>()
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Rectangle-rule integral of a real field.
pub fn integrate(f: &Field<f64>) -> f64 {
    f.integrate()
}

/// Three consecutive time levels `t − dt`, `t`, `t + dt`.
#[derive(Clone, Debug)]
pub struct History<V> {
    pub prev: Field<V>,
    pub mid: Field<V>,
    pub next: Field<V>,
    pub dt: f64,
}

impl<V: Fiber> History<V> {
    pub fn new(prev: Field<V>, mid: Field<V>, next: Field<V>, dt: f64) -> Result<Self, GridError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GridError::BadTimeStep(dt));
        }
        if !(prev.same_shape(&mid) && mid.same_shape(&next)) {
            return Err(GridError::LevelMismatch);
        }
        Ok(Self {
            prev,
            mid,
            next,
            dt,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.mid.grid()
    }

    /// Centered time derivative at the middle level.
    pub fn time_diff(&self) -> Field<V> {
        let inv = 1.0 / (2.0 * self.dt);
        self.next.zip_with(&self.prev, |a, b| (a - b) * inv)
    }

    /// Second time difference at the middle level.
    pub fn time_second_diff(&self) -> Field<V> {
        let inv = 1.0 / (self.dt * self.dt);
        let sum = self.next.zip_with(&self.prev, |a, b| a + b);
        sum.zip_with(&self.mid, |s, m| (s - m * 2.0) * inv)
    }

    pub fn map<W: Fiber>(&self, f: impl Fn(&Field<V>) -> Field<W>) -> History<W> {
        History {
            prev: f(&self.prev),
            mid: f(&self.mid),
            next: f(&self.next),
            dt: self.dt,
        }
    }
}

/// Discrete `□f − rhs` at the middle level, with `□ = ∂_t² − ∂_x²`.
pub fn box_residual<V: Fiber>(h: &History<V>, rhs: Option<&Field<V>>) -> Field<V> {
    let tt = h.time_second_diff();
    let xx = h.mid.second_diff();
    let wave = tt.zip_with(&xx, |a, b| a - b);
    match rhs {
        Some(r) => wave.zip_with(r, |a, b| a - b),
        None => wave,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid {
        Grid::new(2.0 * PI, n).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(Grid::new(1.0, 6), Err(GridError::TooFewCells(6)));
        assert_eq!(Grid::new(1.0, 9), Err(GridError::OddCells(9)));
        assert!(matches!(Grid::new(-1.0, 8), Err(GridError::BadLength(_))));
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = grid(8);
        let mut v = alloc::vec![0.0; 8];
        v[3] = f64::NAN;
        assert_eq!(Field::new(g, 1, v), Err(GridError::NonFinite { index: 3 }));
    }

    #[test]
    fn shift_moves_values_right() {
        let g = grid(8);
        let f = Field::from_fn(g, |x| x);
        let s = f.shift(1);
        assert_eq!(s.at(1), f.at(0));
        assert_eq!(s.at(0), f.at(7));
        assert_eq!(f.shift(0), f);
        assert_eq!(f.shift(8), f);
        assert_eq!(f.shift(3).shift(-3), f);
    }

    #[test]
    fn shift_keeps_point_blocks_together() {
        let g = grid(8);
        let f = Field::from_fn_multi(g, 3, |x, c| x + 10.0 * c as f64);
        let s = f.shift(-2);
        assert_eq!(s.point(0), f.point(2));
    }

    #[test]
    fn central_diff_of_constant_is_zero() {
        let f = Field::from_fn(grid(16), |_| 3.5);
        assert!(f.central_diff().max_abs() == 0.0);
    }

    fn central_diff_error(n: usize) -> f64 {
        let g = grid(n);
        let d = Field::from_fn(g, f64::sin).central_diff();
        let exact = Field::from_fn(g, f64::cos);
        d.zip_with(&exact, |a, b| a - b).max_abs()
    }

    #[test]
    fn central_diff_is_second_order() {
        let ratio = central_diff_error(64) / central_diff_error(128);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn central_diff_complex_is_second_order() {
        let err = |n: usize| {
            let g = grid(n);
            let f = Field::from_fn(g, |x| Complex64::new(0.0, x).exp());
            let exact = Field::from_fn(g, |x| {
                Complex64::new(0.0, 1.0) * Complex64::new(0.0, x).exp()
            });
            let d = f.central_diff();
            d.zip_with(&exact, |a, b| a - b).max_magnitude()
        };
        let ratio = err(64) / err(128);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn integrate_examples() {
        let g = grid(64);
        assert!((Field::from_fn(g, |_| 1.0).integrate() - g.length()).abs() < 1e-14);
        assert!(Field::from_fn(g, f64::sin).integrate().abs() <= 1e-12 * g.length());
        let s2 = Field::from_fn(g, |x| x.sin().powi(2)).integrate();
        assert!((s2 - PI).abs() < 1e-10);
    }

    #[test]
    fn box_residual_of_linear_in_time_is_zero() {
        let g = grid(16);
        let lv = |t: f64| Field::from_fn(g, |_| 2.0 + 3.0 * t);
        let h = History::new(lv(0.0), lv(0.5), lv(1.0), 0.5).unwrap();
        assert!(box_residual(&h, None).max_abs() < 1e-13);
    }

    fn travelling_box_error(n: usize) -> f64 {
        // dt = dx/2 so the three levels are not exact shifts of each other.
        let g = grid(n);
        let dt = 0.5 * g.dx();
        let lv = |t: f64| Field::from_fn(g, |x| (x - t).sin() + 0.3 * (2.0 * (x + t)).cos());
        let h = History::new(lv(0.2), lv(0.2 + dt), lv(0.2 + 2.0 * dt), dt).unwrap();
        box_residual(&h, None).max_abs()
    }

    #[test]
    fn box_residual_travelling_wave_second_order() {
        let ratio = travelling_box_error(64) / travelling_box_error(128);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    fn standing_box_error(n: usize) -> f64 {
        let g = grid(n);
        let dt = 0.5 * g.dx();
        let omega = 1.7;
        let lv = |t: f64| Field::from_fn(g, move |x| x.sin() * (omega * t).cos());
        let t0 = 0.3;
        let rhs = Field::from_fn(g, |x| {
            (1.0 - omega * omega) * x.sin() * (omega * (t0 + dt)).cos()
        });
        let h = History::new(lv(t0), lv(t0 + dt), lv(t0 + 2.0 * dt), dt).unwrap();
        box_residual(&h, Some(&rhs)).max_abs()
    }

    #[test]
    fn box_residual_with_analytic_rhs_second_order() {
        let ratio = standing_box_error(64) / standing_box_error(128);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    fn field_strategy(n: usize) -> impl Strategy<Value = Field<f64>> {
        prop::collection::vec(-5.0..5.0f64, n).prop_map(move |v| Field::new(grid(n), 1, v).unwrap())
    }

    proptest! {
        #[test]
        fn summation_by_parts(f in field_strategy(32), g in field_strategy(32)) {
            let a = f.central_diff().zip_with(&g, |a, b| a * b).integrate();
            let b = f.zip_with(&g.central_diff(), |a, b| a * b).integrate();
            let scale = 1.0 + f.l2_norm() * g.l2_norm() / f.grid().dx();
            prop_assert!((a + b).abs() <= 1e-12 * scale);
        }

        #[test]
        fn central_diff_commutes_with_shift(f in field_strategy(16), k in -20isize..20) {
            prop_assert_eq!(f.shift(k).central_diff(), f.central_diff().shift(k));
        }

        #[test]
        fn shift_round_trip_is_bit_exact(f in field_strategy(16), k in -40isize..40) {
            prop_assert_eq!(f.shift(k).shift(-k), f);
        }
    }
}
