//! Datasets: IDX ingestion, desk-scale reduction, synthetic blobs and
//! seeded batch streams.

mod dataset;
mod idx;
mod synthetic;
mod transform;

pub use dataset::Dataset;
pub use idx::{load_idx, IdxImages, parse_idx_images, parse_idx_labels, write_idx, IMAGES_MAGIC, LABELS_MAGIC};
pub use synthetic::{synthetic_classification, synthetic_classification_with_spread};
pub use transform::{batches, center_crop, downsample, fit_downsample, split, subsample, SplitSpec};
