//! Numerical toolkit for linear-growth variational problems whose minimizing
//! sequences oscillate and concentrate, possibly at the boundary.
//!
//! The crate is organised by subsystem:
//!
//! - [`integrands`]: integrands with linear growth, recession functions,
//!   envelopes and the nonlinear action `v(Du)` on derivative measures.
//! - [`mesh`], [`measure`], [`bv`]: meshes, discrete Radon measures
//!   (piecewise density plus atoms) and BV-like mesh fields.
//! - [`gym`]: discrete generalized Young measures `(nu, lambda, nu_inf)`.
//! - [`boundary`]: numerical verdicts for quasi-sublinear growth from below
//!   and the boundary Jensen inequality on half-balls.
//! - [`soucek`]: pairs `(u, alpha)` with inner and outer traces.
//! - [`relax`]: problem specifications, direct minimization and the relaxed
//!   functionals, including the one-dimensional toy problem.

pub mod boundary;
pub mod bv;
pub mod error;
pub mod gym;
pub mod integrands;
pub mod linalg;
pub mod measure;
pub mod mesh;
pub mod optim;
pub mod quadrature;
pub mod relax;
pub mod soucek;

pub use error::{Error, Result};
pub use linalg::Matrix;
