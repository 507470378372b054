//! The spinor bundle over R^{1,1} as a concrete 2×2 matrix model.
//!
//! A spinor is a pair `(u, v)` of complex numbers. Tangent vectors act by
//! `a_t·γ_t + a_x·γ_x`; the indefinite pairing is `⟨ξ, ψ⟩ = ψ† A ξ`, linear in
//! the first slot. In the default representation `A γ_t = I`, so the positive
//! norm `|ψ|²_β = ⟨∂_t·ψ, ψ⟩` is the plain Hermitian norm `|u|² + |v|²`.

use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::math;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// One fiber value of the spinor bundle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Spinor {
    pub u: Complex64,
    pub v: Complex64,
}

impl Spinor {
    pub const ZERO: Spinor = Spinor { u: ZERO, v: ZERO };

    pub const fn new(u: Complex64, v: Complex64) -> Self {
        Self { u, v }
    }

    pub fn from_re(u: f64, v: f64) -> Self {
        Self::new(Complex64::new(u, 0.0), Complex64::new(v, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn scale(self, s: Complex64) -> Self {
        Self::new(self.u * s, self.v * s)
    }

    /// Multiplication by `i`.
    pub fn times_i(self) -> Self {
        self.scale(I)
    }

    /// `|u|² + |v|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.u.norm_sqr() + self.v.norm_sqr()
    }

    /// Hermitian (positive) inner product `η† ψ`, antilinear in `eta`.
    pub fn herm_dot(eta: &Spinor, psi: &Spinor) -> Complex64 {
        eta.u.conj() * psi.u + eta.v.conj() * psi.v
    }

    pub fn max_abs_diff(&self, other: &Spinor) -> f64 {
        math::modulus(self.u - other.u).max(math::modulus(self.v - other.v))
    }
}

impl Add for Spinor {
    type Output = Spinor;
    fn add(self, rhs: Spinor) -> Spinor {
        Spinor::new(self.u + rhs.u, self.v + rhs.v)
    }
}

impl AddAssign for Spinor {
    fn add_assign(&mut self, rhs: Spinor) {
        self.u += rhs.u;
        self.v += rhs.v;
    }
}

impl Sub for Spinor {
    type Output = Spinor;
    fn sub(self, rhs: Spinor) -> Spinor {
        Spinor::new(self.u - rhs.u, self.v - rhs.v)
    }
}

impl SubAssign for Spinor {
    fn sub_assign(&mut self, rhs: Spinor) {
        self.u -= rhs.u;
        self.v -= rhs.v;
    }
}

impl Neg for Spinor {
    type Output = Spinor;
    fn neg(self) -> Spinor {
        Spinor::new(-self.u, -self.v)
    }
}

impl Mul<f64> for Spinor {
    type Output = Spinor;
    fn mul(self, s: f64) -> Spinor {
        Spinor::new(self.u * s, self.v * s)
    }
}

impl Mul<Complex64> for Spinor {
    type Output = Spinor;
    fn mul(self, s: Complex64) -> Spinor {
        self.scale(s)
    }
}

impl fmt::Display for Spinor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

/// `a_t ∂_t + a_x ∂_x`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TangentVector {
    pub a_t: f64,
    pub a_x: f64,
}

impl TangentVector {
    pub const DT: TangentVector = TangentVector { a_t: 1.0, a_x: 0.0 };
    pub const DX: TangentVector = TangentVector { a_t: 0.0, a_x: 1.0 };

    pub const fn new(a_t: f64, a_x: f64) -> Self {
        Self { a_t, a_x }
    }

    /// Minkowski metric `g(X, Y) = a_t b_t − a_x b_x`.
    pub fn metric(&self, other: &TangentVector) -> f64 {
        self.a_t * other.a_t - self.a_x * other.a_x
    }
}

/// A 2×2 complex matrix acting on spinors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);

    pub fn from_re(m: [[f64; 2]; 2]) -> Self {
        let c = |x: f64| Complex64::new(x, 0.0);
        Mat2([[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]])
    }

    pub fn apply(&self, s: Spinor) -> Spinor {
        let m = &self.0;
        Spinor::new(m[0][0] * s.u + m[0][1] * s.v, m[1][0] * s.u + m[1][1] * s.v)
    }

    pub fn adjoint(&self) -> Mat2 {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn scale(&self, s: Complex64) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max(math::modulus(self.0[i][j] - other.0[i][j]));
            }
        }
        worst
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        self + rhs.scale(-ONE)
    }
}

/// Clifford generators and the pairing matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CliffordRep {
    pub gamma_t: Mat2,
    pub gamma_x: Mat2,
    pub pairing: Mat2,
}

/// A violated representation invariant, as reported by [`CliffordRep::validate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepViolation {
    GammaTSquare,
    GammaXSquare,
    Anticommutation,
    PairingNotHermitian,
    CompatibilityT,
    CompatibilityX,
    BetaNormalization,
}

impl RepViolation {
    pub fn name(&self) -> &'static str {
        match self {
            RepViolation::GammaTSquare => "gamma_t_square",
            RepViolation::GammaXSquare => "gamma_x_square",
            RepViolation::Anticommutation => "anticommutation",
            RepViolation::PairingNotHermitian => "pairing_hermitian",
            RepViolation::CompatibilityT => "compatibility_t",
            RepViolation::CompatibilityX => "compatibility_x",
            RepViolation::BetaNormalization => "beta_normalization",
        }
    }
}

impl Default for CliffordRep {
    fn default() -> Self {
        Self::chiral()
    }
}

impl CliffordRep {
    /// The chiral representation used throughout the crate.
    pub fn chiral() -> Self {
        Self {
            gamma_t: Mat2::from_re([[0.0, 1.0], [1.0, 0.0]]),
            gamma_x: Mat2::from_re([[0.0, 1.0], [-1.0, 0.0]]),
            pairing: Mat2::from_re([[0.0, 1.0], [1.0, 0.0]]),
        }
    }

    pub fn gamma(&self, x: TangentVector) -> Mat2 {
        let c = |s: f64| Complex64::new(s, 0.0);
        self.gamma_t.scale(c(x.a_t)) + self.gamma_x.scale(c(x.a_x))
    }

    /// `X·ψ`.
    pub fn clifford_mul(&self, x: TangentVector, psi: Spinor) -> Spinor {
        self.gamma(x).apply(psi)
    }

    /// `⟨ξ, ψ⟩ = ψ† A ξ`.
    pub fn indef_product(&self, xi: Spinor, psi: Spinor) -> Complex64 {
        Spinor::herm_dot(&psi, &self.pairing.apply(xi))
    }

    /// `|ψ|²_β = ⟨∂_t·ψ, ψ⟩`, evaluated through the pairing.
    pub fn beta_norm_sq(&self, psi: Spinor) -> f64 {
        self.indef_product(self.clifford_mul(TangentVector::DT, psi), psi)
            .re
    }

    /// Lists every invariant that fails at tolerance `1e-12` entrywise.
    pub fn validate(&self) -> Vec<RepViolation> {
        const TOL: f64 = 1e-12;
        let minus_one = Mat2::IDENTITY.scale(-ONE);
        let mut out = Vec::new();
        let (gt, gx, a) = (self.gamma_t, self.gamma_x, self.pairing);
        if (gt * gt).max_abs_diff(&Mat2::IDENTITY) > TOL {
            out.push(RepViolation::GammaTSquare);
        }
        if (gx * gx).max_abs_diff(&minus_one) > TOL {
            out.push(RepViolation::GammaXSquare);
        }
        if (gt * gx + gx * gt).max_abs_diff(&Mat2::ZERO) > TOL {
            out.push(RepViolation::Anticommutation);
        }
        if a.max_abs_diff(&a.adjoint()) > TOL {
            out.push(RepViolation::PairingNotHermitian);
        }
        if (a * gt).max_abs_diff(&(gt.adjoint() * a)) > TOL {
            out.push(RepViolation::CompatibilityT);
        }
        if (a * gx).max_abs_diff(&(gx.adjoint() * a)) > TOL {
            out.push(RepViolation::CompatibilityX);
        }
        if (a * gt).max_abs_diff(&Mat2::IDENTITY) > TOL {
            out.push(RepViolation::BetaNormalization);
        }
        out
    }
}

// Component formulas in the chiral representation. These are the hot-loop
// versions of the geometric operations above and are cross-checked against
// them in the tests.

/// `γ_t ψ = (v, u)`.
#[inline]
pub fn gamma_t(s: Spinor) -> Spinor {
    Spinor::new(s.v, s.u)
}

/// `γ_x ψ = (v, −u)`.
#[inline]
pub fn gamma_x(s: Spinor) -> Spinor {
    Spinor::new(s.v, -s.u)
}

/// `γ_t γ_x ψ = (−u, v)`.
#[inline]
pub fn gamma_tx(s: Spinor) -> Spinor {
    Spinor::new(-s.u, s.v)
}

/// `⟨ξ, ψ⟩ = conj(ψ_u) ξ_v + conj(ψ_v) ξ_u`.
#[inline]
pub fn pairing(xi: Spinor, psi: Spinor) -> Complex64 {
    psi.u.conj() * xi.v + psi.v.conj() * xi.u
}

/// `|ψ|²_β = |u|² + |v|²`.
#[inline]
pub fn beta_sq(s: Spinor) -> f64 {
    s.norm_sqr()
}

/// `⟨∂_x·ψ, ψ⟩ = |v|² − |u|²`.
#[inline]
pub fn chirality(s: Spinor) -> f64 {
    s.v.norm_sqr() - s.u.norm_sqr()
}

/// `⟨i ∂_x·∂_t·ψ, ψ⟩ = 2 Im(conj(u) v)`.
#[inline]
pub fn mixed_density(s: Spinor) -> f64 {
    2.0 * (s.u.conj() * s.v).im
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spinor() -> impl Strategy<Value = Spinor> {
        prop::array::uniform4(-3.0..3.0f64).prop_map(|a| Spinor::new(c(a[0], a[1]), c(a[2], a[3])))
    }

    fn tangent() -> impl Strategy<Value = TangentVector> {
        (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| TangentVector::new(a, b))
    }

    #[test]
    fn default_rep_squares() {
        let rep = CliffordRep::chiral();
        assert_eq!(rep.gamma_t * rep.gamma_t, Mat2::IDENTITY);
        assert_eq!(rep.gamma_x * rep.gamma_x, Mat2::IDENTITY.scale(-ONE));
        assert_eq!(rep.pairing * rep.gamma_t, Mat2::IDENTITY);
        assert!(rep.validate().is_empty());
    }

    #[test]
    fn clifford_mul_examples() {
        let rep = CliffordRep::chiral();
        let e1 = Spinor::from_re(1.0, 0.0);
        assert_eq!(
            rep.clifford_mul(TangentVector::DT, e1),
            Spinor::from_re(0.0, 1.0)
        );
        let psi = Spinor::new(c(0.3, -1.0), c(2.0, 0.5));
        assert_eq!(
            rep.clifford_mul(TangentVector::default(), psi),
            Spinor::ZERO
        );
    }

    #[test]
    fn indef_product_examples() {
        let rep = CliffordRep::chiral();
        let e1 = Spinor::from_re(1.0, 0.0);
        let e2 = Spinor::from_re(0.0, 1.0);
        assert_eq!(rep.indef_product(e1, e1), c(0.0, 0.0));
        assert_eq!(rep.indef_product(e1, e2), c(1.0, 0.0));
    }

    #[test]
    fn beta_norm_examples() {
        let rep = CliffordRep::chiral();
        assert_eq!(rep.beta_norm_sq(Spinor::ZERO), 0.0);
        assert_eq!(
            rep.beta_norm_sq(Spinor::new(c(3.0, 0.0), c(0.0, 4.0))),
            25.0
        );
    }

    #[test]
    fn validate_flags_broken_reps() {
        let mut rep = CliffordRep::chiral();
        rep.gamma_x = rep.gamma_t;
        let v = rep.validate();
        assert!(v.contains(&RepViolation::Anticommutation));
        assert!(v.contains(&RepViolation::GammaXSquare));

        let mut rep = CliffordRep::chiral();
        rep.pairing = Mat2::IDENTITY;
        assert!(rep.validate().contains(&RepViolation::CompatibilityX));
    }

    #[test]
    fn component_formulas_match_matrices() {
        let rep = CliffordRep::chiral();
        let psi = Spinor::new(c(0.7, -0.2), c(-1.3, 0.9));
        let xi = Spinor::new(c(0.1, 0.4), c(0.5, -2.0));
        assert_eq!(gamma_t(psi), rep.gamma_t.apply(psi));
        assert_eq!(gamma_x(psi), rep.gamma_x.apply(psi));
        assert_eq!(gamma_tx(psi), (rep.gamma_t * rep.gamma_x).apply(psi));
        assert!((pairing(xi, psi) - rep.indef_product(xi, psi)).norm() < 1e-15);
        let dx_pair = rep.indef_product(rep.clifford_mul(TangentVector::DX, psi), psi);
        assert!((dx_pair.re - chirality(psi)).abs() < 1e-14);
        let mixed = rep.indef_product((rep.gamma_x * rep.gamma_t).apply(psi).times_i(), psi);
        assert!((mixed.re - mixed_density(psi)).abs() < 1e-14);
        assert!(mixed.im.abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn clifford_relation(x in tangent(), y in tangent(), psi in spinor()) {
            let rep = CliffordRep::chiral();
            let lhs = rep.clifford_mul(x, rep.clifford_mul(y, psi)) + rep.clifford_mul(y, rep.clifford_mul(x, psi));
            let rhs = psi * (2.0 * x.metric(&y));
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn clifford_symmetry(x in tangent(), xi in spinor(), psi in spinor()) {
            let rep = CliffordRep::chiral();
            let d = rep.indef_product(rep.clifford_mul(x, xi), psi) - rep.indef_product(xi, rep.clifford_mul(x, psi));
            prop_assert!(d.norm() < 1e-12);
        }

        #[test]
        fn pairing_is_hermitian(xi in spinor(), psi in spinor()) {
            let rep = CliffordRep::chiral();
            let d = rep.indef_product(xi, psi) - rep.indef_product(psi, xi).conj();
            prop_assert!(d.norm() < 1e-12);
        }

        #[test]
        fn beta_norm_is_positive_and_plain(psi in spinor()) {
            let rep = CliffordRep::chiral();
            let b = rep.beta_norm_sq(psi);
            prop_assert!(b >= 0.0);
            prop_assert!((b - psi.norm_sqr()).abs() <= 1e-14 * (1.0 + b));
            let via_pair = rep.indef_product(rep.clifford_mul(TangentVector::DT, psi), psi);
            prop_assert!(via_pair.im.abs() <= 1e-14 * (1.0 + b));
        }

        #[test]
        fn dx_pairing_is_real(psi in spinor()) {
            let rep = CliffordRep::chiral();
            let z = rep.indef_product(rep.clifford_mul(TangentVector::DX, psi), psi);
            prop_assert!(z.im.abs() < 1e-12);
        }
    }
}
