//! Dataset loading, synthetic data and non-IID shard partitioning.

mod idx;
mod partition;
mod synthetic;

pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IMAGES_MAGIC, LABELS_MAGIC};
pub use partition::{shard_partition, train_test_split, Partition, ShardRange, Split};
pub use synthetic::synthetic_dataset;
