//! Round-based FEEL simulation: placement, per-round fading, scheduling,
//! local training, aggregation and telemetry.

mod config;
mod engine;
mod sweep;

pub use config::{DataConfig, DataSource, DiversityConfig, SchedulerKind, SimConfig, SimParams};
pub use engine::{
    distance_to_center, place_devices, prepare_data, run_experiment, ExperimentResult, PreparedData, RoundMetrics,
    SelectedDevice, Simulation,
};
pub use sweep::{run_sweep, CurvePoint, RunOutcome, SweepResult};
