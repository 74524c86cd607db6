//! Numerics for the half-line Friedrichs model with a finite-dimensional
//! discrete block and a rational form factor.
//!
//! The crate computes the Livšic matrix and its continuation across the
//! positive half line, locates resonances, evaluates scattering matrices and
//! their residues, builds Gamov vectors and the Toeplitz decay semigroup, and
//! provides brute-force oracles to check all of them against.
//!
//! `no_std` with `alloc`.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod hardy;
pub mod linalg;
pub mod livsic;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod resonances;
pub mod scattering;
pub mod stieltjes;

pub use error::{Error, Result};
pub use linalg::CMat;
pub use model::{presets, validate_model, ModelSpec, RationalMatrixFunction, RationalTerm, ValidationReport};
pub use num_complex::Complex64;
pub use stieltjes::SheetTag;
