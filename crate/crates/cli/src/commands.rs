use std::io::Write;
use std::path::Path;

use feel_core::diversity::{gini_simpson, label_distribution};
use feel_core::scheduler::{brute_force_oracle, schedule_das, Instance, ScheduleDecision};
use feel_core::simulator::{prepare_data, run_experiment, run_sweep};
use serde::Serialize;

use crate::config::{load_config, resolved_toml};
use crate::output::{records, write_csv, write_json, CurveRecord, FailedRun, RunSummary, SweepSummary};
use crate::CliError;

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

pub fn cmd_run(config_path: &Path, out_dir: &Path, seed: Option<u64>, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(config_path, seed)?;
    let result = run_experiment(&config)?;
    create_dir(out_dir)?;
    write_csv(&out_dir.join("rounds.csv"), &records(&result))?;
    write_json(&out_dir.join("summary.json"), &RunSummary::from(&result))?;
    write_text(&out_dir.join("config.toml"), &resolved_toml(&config))?;
    say(
        out,
        format_args!(
            "{} seed {}: {} rounds, final accuracy {:.4}, energy {:.3} J, time {:.3} s",
            result.scheduler,
            result.seed,
            result.rounds.len(),
            result.final_accuracy,
            result.total_energy,
            result.completion_time
        ),
    )
}

pub fn cmd_sweep(
    config_path: &Path,
    runs: usize,
    out_dir: &Path,
    jobs: Option<usize>,
    seed: Option<u64>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let config = load_config(config_path, seed)?;
    let sweep = run_sweep(&config, runs, config.sim.seed, jobs)?;
    let run_dir = out_dir.join("runs");
    create_dir(&run_dir)?;
    let mut failed = Vec::new();
    let mut completed = Vec::new();
    for run in &sweep.runs {
        match (&run.result, &run.error) {
            (Some(result), _) => {
                write_csv(&run_dir.join(format!("seed{}.csv", run.seed)), &records(result))?;
                completed.push(RunSummary::from(result));
            }
            (None, error) => failed.push(FailedRun { seed: run.seed, error: error.clone().unwrap_or_default() }),
        }
    }
    let curves: Vec<CurveRecord> = sweep.curves.iter().map(CurveRecord::from).collect();
    write_csv(&out_dir.join("mean_curves.csv"), &curves)?;
    write_json(&out_dir.join("summary.json"), &SweepSummary { runs, failures: sweep.failures, failed, completed })?;
    write_text(&out_dir.join("config.toml"), &resolved_toml(&config))?;
    say(out, format_args!("{} seeds from {}: {} failed", runs, config.sim.seed, sweep.failures))?;
    if sweep.failures == runs {
        return Err(CliError::AllRunsFailed(runs));
    }
    if let Some(last) = curves.last() {
        say(out, format_args!("round {}: mean accuracy {:.4} (std {:.4})", last.round, last.mean_accuracy, last.std_accuracy))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct DecisionView {
    selected: Vec<usize>,
    alpha: Vec<f64>,
    objective: f64,
    round_time: f64,
    energy: f64,
}

impl DecisionView {
    fn new(d: &ScheduleDecision, instance: &Instance) -> Self {
        let positions = d.selected_positions();
        Self {
            selected: positions.iter().map(|&k| instance.devices[k].id).collect(),
            alpha: positions.iter().map(|&k| d.alpha[k]).collect(),
            objective: d.objective,
            round_time: d.round_time,
            energy: d.total_energy(),
        }
    }
}

/// Relative shortfall of `value` against the optimum `best`.
pub fn relative_gap(value: f64, best: f64) -> f64 {
    if value >= best {
        0.0
    } else {
        (best - value) / best.abs()
    }
}

pub fn cmd_oracle(instance_path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(instance_path).map_err(|e| CliError::io(instance_path, e))?;
    let instance = Instance::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let (candidates, params, config) = (instance.candidates(), instance.radio_params(), instance.scheduler_config());
    let oracle = brute_force_oracle(&candidates, &params, &config)?;
    let das = schedule_das(&candidates, &params, &config)?;
    let gap = relative_gap(das.objective, oracle.objective);
    let report = serde_json::json!({
        "das": DecisionView::new(&das, &instance),
        "oracle": DecisionView::new(&oracle, &instance),
        "gap": gap,
        "gap_threshold": instance.config.gap_threshold,
    });
    say(out, format_args!("{}", serde_json::to_string_pretty(&report).expect("report serializes")))?;
    if gap > instance.config.gap_threshold {
        return Err(CliError::CheckFailed(format!(
            "DAS is {gap:.6} below the oracle, threshold {}",
            instance.config.gap_threshold
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PartitionRow {
    device: usize,
    size: usize,
    gini: f64,
    shards: usize,
}

pub fn cmd_partition(config_path: &Path, seed: Option<u64>, csv: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(config_path, seed)?;
    let prepared = prepare_data(&config)?;
    let partition = &prepared.partition;
    let classes = prepared.data.num_classes();
    let mut shards = vec![0usize; partition.num_devices()];
    for owner in partition.shard_owner.iter().flatten() {
        shards[*owner] += 1;
    }
    let rows = partition
        .device_indices
        .iter()
        .enumerate()
        .map(|(device, indices)| {
            let labels: Vec<usize> = indices.iter().map(|&i| prepared.data.labels()[i]).collect();
            let gini = gini_simpson(&label_distribution(&labels, classes)?)?;
            Ok(PartitionRow { device, size: indices.len(), gini, shards: shards[device] })
        })
        .collect::<feel_core::Result<Vec<_>>>()?;

    let used = shards.iter().sum::<usize>();
    if csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &rows {
            w.serialize(row).map_err(|e| CliError::csv(Path::new("<stdout>"), e))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        out.write_all(&bytes).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        return Ok(());
    }
    say(out, format_args!("{:>6} {:>8} {:>8} {:>6}", "device", "size", "gini", "shards"))?;
    for r in &rows {
        say(out, format_args!("{:>6} {:>8} {:>8.4} {:>6}", r.device, r.size, r.gini, r.shards))?;
    }
    say(out, format_args!("shards formed: {}, assigned: {used}", partition.shards.len()))
}
