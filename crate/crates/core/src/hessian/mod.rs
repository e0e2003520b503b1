//! Hutchinson estimation of the Hessian trace.

mod hutchinson;

pub use hutchinson::{hutchinson_trace, hutchinson_trace_with, HutchinsonConfig, ProbeDistribution, TraceEstimate};
