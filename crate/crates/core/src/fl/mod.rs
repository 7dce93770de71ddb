//! Federated learning core: a two-layer MLP trained locally with mini-batch
//! SGD and merged with FedAvg.

mod aggregate;
mod checkpoint;
mod dataset;
mod model;
mod train;

pub use aggregate::fedavg_aggregate;
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use dataset::Dataset;
pub use model::{init_model, GlobalModel, ModelDims};
pub use train::{evaluate, local_train, loss_and_gradient, Evaluation, LocalUpdate, TrainConfig};
