//! Numerics for linear and nonlinear Dirac-type equations on 1+1 dimensional
//! Minkowski space.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure: fields
//! are value containers, steps map fields to fields, and monitors read run
//! histories. File formats and the command-line runner live in `dirac-sim`.
//!
//! Conventions used throughout:
//!
//! * metric `(+,-)`, Clifford relation `X·Y + Y·X = +2 g(X, Y)`;
//! * chiral representation `γ_t = [[0,1],[1,0]]`, `γ_x = [[0,1],[-1,0]]`,
//!   so the free equation transports `u` to the right and `v` to the left;
//! * periodic grid with `dt = dx` so transport is an exact index shift.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clifford;
pub mod cmat;
pub mod dirac_wave_map;
pub mod grid;
pub mod init;
pub mod linear_dirac;
mod math;
pub mod monitors;
pub mod scenario;
pub mod thirring;
pub mod twisted_dirac;

pub use num_complex::Complex64;

pub use clifford::{CliffordRep, Spinor, TangentVector};
pub use grid::{Field, Grid, GridError, History, StepError};
pub use monitors::{Convergence, EnergyReport, MonitorKind, Series};
