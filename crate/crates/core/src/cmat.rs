//! Small dense complex matrices.
//!
//! Sizes here are tiny (connection ranks, 2r×2r local generators), so the
//! storage is a flat row-major `Vec` and every operation is the textbook loop.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use crate::math;
use num_complex::Complex64;
#[allow(unused_imports)] // unused only when std is in the build graph
use num_traits::Float;

#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds an `n×n` matrix from row-major entries.
    ///
    /// Panics if `entries.len() != n * n`.
    pub fn from_rows(n: usize, entries: &[Complex64]) -> Self {
        assert_eq!(entries.len(), n * n, "CMat::from_rows: wrong entry count");
        Self {
            n,
            data: entries.to_vec(),
        }
    }

    pub fn scalar(n: usize, s: Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Applies the matrix in place through a scratch buffer.
    pub fn apply_in_place(&self, x: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        scratch.clear();
        scratch.extend_from_slice(x);
        for i in 0..self.n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.n {
                acc += self[(i, j)] * scratch[j];
            }
            x[i] = acc;
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(math::modulus(*z)))
    }

    /// Largest entry of `A + A†`, zero for skew-Hermitian matrices.
    pub fn skew_hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max(math::modulus(self[(i, j)] + self[(j, i)].conj()));
            }
        }
        worst
    }

    /// Matrix exponential by scaling and squaring with a Taylor kernel.
    ///
    /// The scaled matrix has 1-norm below 1/2, where 20 Taylor terms are far
    /// past double precision.
    pub fn exp(&self) -> Self {
        let norm = self.one_norm();
        let mut squarings = 0u32;
        let mut scaled = self.clone();
        if norm > 0.5 {
            squarings = math::log2(norm / 0.5).ceil() as u32;
            scaled = self.scale_re(1.0 / f64::from(1u32 << squarings.min(31)));
            if squarings > 31 {
                let extra = squarings - 31;
                scaled = scaled.scale_re(1.0 / (1u64 << extra) as f64);
            }
        }
        let mut result = Self::identity(self.n);
        let mut term = Self::identity(self.n);
        for k in 1..=20 {
            term = (&term * &scaled).scale_re(1.0 / k as f64);
            result = &result + &term;
            if term.max_abs() < 1e-18 {
                break;
            }
        }
        for _ in 0..squarings {
            result = &result * &result;
        }
        result
    }

    fn one_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| {
                (0..self.n)
                    .map(|i| math::modulus(self[(i, j)]))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Embeds `blocks` (row-major `k×k` grid of equal-size blocks) into one matrix.
    pub fn from_blocks(k: usize, blocks: &[&CMat]) -> Self {
        assert_eq!(blocks.len(), k * k);
        let b = blocks[0].n;
        let mut m = Self::zeros(k * b);
        for bi in 0..k {
            for bj in 0..k {
                let blk = blocks[bi * k + bj];
                assert_eq!(blk.n, b);
                for i in 0..b {
                    for j in 0..b {
                        m[(bi * b + i, bj * b + j)] = blk[(i, j)];
                    }
                }
            }
        }
        m
    }
}

impl core::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}
