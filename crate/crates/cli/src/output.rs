//! CSV and JSON artifacts. Floats are written in shortest round-trip form,
//! so reading a file back gives the exact values.

use std::path::Path;

use feel_core::simulator::{CurvePoint, ExperimentResult, SchedulerKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One row of `rounds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub experiment_id: String,
    pub scheduler: SchedulerKind,
    pub round: usize,
    pub accuracy: f64,
    pub round_duration_s: f64,
    #[serde(rename = "round_energy_J")]
    pub round_energy_j: f64,
    pub num_selected: usize,
    #[serde(rename = "cumulative_energy_J")]
    pub cumulative_energy_j: f64,
    pub cumulative_time_s: f64,
}

pub fn experiment_id(result: &ExperimentResult) -> String {
    format!("{}-seed{}", result.scheduler, result.seed)
}

pub fn records(result: &ExperimentResult) -> Vec<OutputRecord> {
    let id = experiment_id(result);
    result
        .rounds
        .iter()
        .map(|m| OutputRecord {
            experiment_id: id.clone(),
            scheduler: result.scheduler,
            round: m.round,
            accuracy: m.accuracy,
            round_duration_s: m.duration,
            round_energy_j: m.energy,
            num_selected: m.num_selected(),
            cumulative_energy_j: m.cumulative_energy,
            cumulative_time_s: m.cumulative_time,
        })
        .collect()
}

/// One row of `mean_curves.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub round: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_energy: f64,
    pub mean_duration: f64,
}

impl From<&CurvePoint> for CurveRecord {
    fn from(p: &CurvePoint) -> Self {
        Self {
            round: p.round,
            mean_accuracy: p.mean_accuracy,
            std_accuracy: p.std_accuracy,
            mean_energy: p.mean_energy,
            mean_duration: p.mean_duration,
        }
    }
}

/// Aggregates of one experiment, without the per-round series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment_id: String,
    pub scheduler: SchedulerKind,
    pub seed: u64,
    pub num_devices: usize,
    pub rounds_played: usize,
    pub rounds_to_target: Option<usize>,
    pub final_accuracy: f64,
    pub total_energy_j: f64,
    pub completion_time_s: f64,
    pub mean_selected_fraction: f64,
    pub max_selected_fraction: f64,
    pub selection_counts: Vec<usize>,
}

impl From<&ExperimentResult> for RunSummary {
    fn from(r: &ExperimentResult) -> Self {
        Self {
            experiment_id: experiment_id(r),
            scheduler: r.scheduler,
            seed: r.seed,
            num_devices: r.num_devices,
            rounds_played: r.rounds.len(),
            rounds_to_target: r.rounds_to_target,
            final_accuracy: r.final_accuracy,
            total_energy_j: r.total_energy,
            completion_time_s: r.completion_time,
            mean_selected_fraction: r.mean_selected_fraction,
            max_selected_fraction: r.max_selected_fraction,
            selection_counts: r.selection_counts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub runs: usize,
    pub failures: usize,
    pub failed: Vec<FailedRun>,
    pub completed: Vec<RunSummary>,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| CliError::csv(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summaries serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
