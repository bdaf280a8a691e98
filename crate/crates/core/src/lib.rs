//! Small-signal stability analysis of AC power grids with classical
//! machines, and synthesis of load-measurement falsifications that
//! destabilize them.
//!
//! The pipeline runs a rectangular-coordinate Newton–Raphson power flow,
//! initializes each machine's internal EMF, linearizes the machine and
//! network equations, eliminates the algebraic variables into a reduced
//! state matrix and inspects its eigenvalues. The [`attack`] module drives
//! that pipeline with falsified load data.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod attack;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod netmodel;
pub mod powerflow;
pub mod smallsignal;

pub use error::{Error, Result};
pub use netmodel::NetworkCase;
pub use num_complex::Complex64;
pub use smallsignal::{analyze_case, Analysis, AnalysisOptions, EigenSolution};
