//! Data-aware device scheduling for federated edge learning.
//!
//! The crate bundles the pieces needed to simulate synchronous federated
//! training over a wireless cell: dataset diversity measures, an OFDMA uplink
//! model, the data-aware scheduler with its baselines and exhaustive oracle,
//! a small MLP trained with FedAvg, dataset loading and partitioning, and the
//! round-based simulator that ties them together.

pub mod dataio;
pub mod diversity;
pub mod error;
pub mod fl;
pub mod radio;
pub mod scheduler;
pub mod simulator;

pub use error::{Error, Result};
