//! Multi-bump approximate solutions of −Δu = K u^{(n+2)/(n−2)} on lattices.
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz_norms;
pub mod bubble;
pub mod diagnostics;
pub mod error;
pub mod lattice;
pub mod profile;
pub mod quadrature;
pub mod reduced;
pub use error::{Error, Result};
