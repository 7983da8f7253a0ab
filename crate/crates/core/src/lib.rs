#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]
//! Numerical toolkit for meromorphic functions whose divisor lies in a left
//! half-plane: convergence exponents, truncated Hadamard log-derivatives,
//! Dirichlet-series logarithms, vertical-line growth, and the pairing of the
//! inverse Laplace transform of `f'/f` against test functions.

pub mod analysis;
pub mod dirichlet;
pub mod divisor;
pub mod hadamard;
pub mod newtoncramer;
pub mod error;
pub mod par;
pub mod quad;
pub mod specfun;
pub mod sum;
pub mod testfn;
pub mod vertline;

pub use divisor::{Divisor, DivisorKind, DivisorPoint, TailModel};
pub use error::{LabError, Result};
pub use num_complex::Complex64;
