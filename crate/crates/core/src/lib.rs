//! Convergence-rate certificates for mirror descent.
//!
//! Mirror descent on a strongly convex, smooth objective is written as a
//! linear system in feedback with two slope-restricted gradients. Integral
//! quadratic constraints on those gradients turn rate certification into small
//! linear matrix inequalities, which are solved here with a bundled
//! interior-point method and checked by back-substitution.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod iqc;
pub mod lmi;
pub mod lure;
pub mod problem;
pub mod sdp;
pub mod sim;

pub use error::{Error, Result};
pub use lure::TimeDomain;
pub use problem::{FunctionClassParams, ProblemData, TestFunction};
