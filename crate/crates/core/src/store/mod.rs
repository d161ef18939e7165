//! Text persistence: checkpoints, metrics logs and dataset files.

mod checkpoint;
mod dataset;
pub(crate) mod kv;
mod metrics;

pub use checkpoint::{
    config_line, decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for,
    save_checkpoint, Checkpoint, Progress, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use dataset::{
    decode_dataset, encode_dataset, read_dataset, write_dataset, Dataset, Samples, DATASET_VERSION,
};
pub use metrics::{append_metrics, config_hash, read_metrics, MetricsRecord};
