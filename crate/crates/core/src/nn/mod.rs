//! Fully connected classifiers with exact first- and second-order
//! derivatives.
//!
//! Everything here runs in `f64`. The estimators downstream subtract large,
//! nearly equal quantities, so single precision is not an option.

mod arch;
mod batch;
mod fisher;
mod model;

pub use arch::{Activation, LayerShape, MlpArchitecture};
pub use batch::Batch;
pub use fisher::FisherOperator;
pub use model::{LogProbs, MlpModel};
