//! Training runs with per-epoch metrics, the comparison experiments, and
//! their CSV/JSON artifacts.

mod config;
mod experiments;
mod export;
pub mod stats;
mod training;

pub use config::{
    ArchitectureSpec, CompareSection, DataSource, DataSpec, ExperimentFile, ForkSection, MetricsConfig, PreparedData, RunConfig,
    SweepSection, DATA_DIR_ENV,
};
pub use experiments::{
    experiment_compare, experiment_fork, experiment_overfit, experiment_smoothing_sweep, CompareReport, CompareRow,
    CompareSpec, ForkPoint, ForkReport, ForkSpec, LabeledRun, OverfitReport, SweepPoint, SweepReport, SweepSpec,
    metric_slope,
};
pub use export::{
    parse_records_csv, records_to_csv, write_checkpoint, write_records_csv, version_string, write_run_dir, OutputFormat,
    RunManifest, CSV_HEADER,
};
pub use training::{run_training, Checkpoint, MetricsRecord, RunOutput, Trainer};
