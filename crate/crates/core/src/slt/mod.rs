//! Singular-learning-theory estimators.
//!
//! * [`sgld_sample`] draws from the localized tempered posterior
//!   `p(w) ~ exp(-beta n L_n(w) - (gamma/2) |w - w*|^2)` with SGLD.
//! * [`estimate_llc`] turns those draws into the local learning coefficient
//!   `lambda = beta (E[n L_n(w)] - n L_n(w*))` and the WBIC `E[n L_n(w)]`.
//! * [`volume_scaling_oracle`] measures `lambda` directly from how the
//!   sublevel volume `V(eps)` of a low-dimensional potential scales.
//!
//! # Temperature convention
//!
//! `beta` is the inverse temperature multiplying `n L_n` in the posterior
//! exponent and in the SGLD drift; it defaults to `1 / ln n`. The same
//! `beta` multiplies the loss gap in the estimator, so the identity
//! `lambda = beta (wbic - n L_n(w*))` holds for any choice.

mod bic;
mod llc;
mod potential;
mod sgld;
mod volume;

pub use bic::compute_bic;
pub use llc::{estimate_llc, estimate_llc_with, estimate_wbic, estimate_wbic_with, LlcEstimate};
pub use potential::{AnalyticPotential, PotentialLoss};
pub use sgld::{sgld_sample, DatasetLoss, LossRecording, SgldChain, SgldConfig, SgldRun, StochasticLoss};
pub use volume::{volume_scaling_oracle, volume_scaling_oracle_windowed, VolumeFit, VolumePoint};
