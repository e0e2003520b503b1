//! Training and degeneracy measurement for small feed-forward classifiers.
//!
//! The crate trains fully connected networks with plain SGD or with a
//! Fisher-preconditioned natural gradient step, and measures how degenerate
//! the resulting solutions are:
//!
//! * [`slt`] estimates the local learning coefficient and the WBIC by
//!   sampling a localized tempered posterior with SGLD.
//! * [`hessian`] estimates the Hessian trace with Hutchinson probes built on
//!   exact Hessian-vector products.
//! * [`harness`] runs the NGD-vs-SGD experiments and writes CSV/JSON output.

pub mod data;
pub mod error;
pub mod harness;
pub mod hessian;
pub mod nn;
pub mod optim;
pub mod params;
pub mod rng;
pub mod slt;

pub use error::{Error, Result};
pub use params::ParamVector;
