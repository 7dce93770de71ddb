use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::engine::{run_experiment, ExperimentResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub result: Option<ExperimentResult>,
    pub error: Option<String>,
}

/// Per-round statistics over the runs that lasted that long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub runs: usize,
    pub mean_accuracy: f64,
    /// Population standard deviation.
    pub std_accuracy: f64,
    pub mean_energy: f64,
    pub mean_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub runs: Vec<RunOutcome>,
    pub curves: Vec<CurvePoint>,
    pub failures: usize,
}

/// Runs seeds `base_seed .. base_seed + num_runs` of `config`, on at most
/// `jobs` threads (the global pool when `None`). Failed runs are kept with
/// their error and left out of the curves.
pub fn run_sweep(config: &SimConfig, num_runs: usize, base_seed: u64, jobs: Option<usize>) -> Result<SweepResult> {
    if num_runs == 0 {
        return Err(Error::InvalidInput("a sweep needs at least one run".into()));
    }
    config.validate()?;
    let run = |i: usize| {
        let seed = base_seed + i as u64;
        let mut cfg = config.clone();
        cfg.sim.seed = seed;
        match run_experiment(&cfg) {
            Ok(result) => RunOutcome { seed, result: Some(result), error: None },
            Err(e) => RunOutcome { seed, result: None, error: Some(e.to_string()) },
        }
    };
    let runs: Vec<RunOutcome> = match jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(|| (0..num_runs).into_par_iter().map(run).collect()),
        None => (0..num_runs).into_par_iter().map(run).collect(),
    };
    let results: Vec<&ExperimentResult> = runs.iter().filter_map(|r| r.result.as_ref()).collect();
    let failures = runs.len() - results.len();
    Ok(SweepResult { curves: mean_curves(&results), runs, failures })
}

fn mean_curves(results: &[&ExperimentResult]) -> Vec<CurvePoint> {
    let longest = results.iter().map(|r| r.rounds.len()).max().unwrap_or(0);
    (0..longest)
        .map(|i| {
            let rows: Vec<_> = results.iter().filter_map(|r| r.rounds.get(i)).collect();
            let n = rows.len() as f64;
            let mean = |f: &dyn Fn(&&crate::simulator::RoundMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
            let mean_accuracy = mean(&|r| r.accuracy);
            let var = mean(&|r| (r.accuracy - mean_accuracy).powi(2));
            CurvePoint {
                round: i + 1,
                runs: rows.len(),
                mean_accuracy,
                std_accuracy: var.sqrt(),
                mean_energy: mean(&|r| r.energy),
                mean_duration: mean(&|r| r.duration),
            }
        })
        .collect()
}
