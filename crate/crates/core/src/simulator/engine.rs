use rand::{Rng, RngCore};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, SchedulerKind, SimConfig};
use crate::dataio::{load_idx, shard_partition, synthetic_dataset, train_test_split, Partition, ShardRange, Split};
use crate::diversity::{diversity_index, label_distribution, DeviceMetrics};
use crate::error::{Error, Result};
use crate::fl::{evaluate, fedavg_aggregate, init_model, local_train, Dataset, GlobalModel, LocalUpdate, ModelDims};
use crate::radio::{channel_gain, round_duration, sample_rayleigh_power, training_time, DeviceRadioState};
use crate::scheduler::{
    decide, schedule_abs, schedule_all, schedule_das, schedule_random, Candidate, ObjectiveScale, ScheduleDecision,
};

/// `k` points uniform in `[0, side]^2`, re-drawn when closer than 1 m to the
/// base station at the center.
pub fn place_devices(k: usize, side: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    if k == 0 || !(side > 2.0) {
        return Err(Error::InvalidInput(format!("cannot place {k} devices in a cell of side {side}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..k)
        .map(|_| loop {
            let p = (rng.random_range(0.0..=side), rng.random_range(0.0..=side));
            if distance_to_center(p, side) >= 1.0 {
                break p;
            }
        })
        .collect())
}

pub fn distance_to_center(position: (f64, f64), side: f64) -> f64 {
    (position.0 - side / 2.0).hypot(position.1 - side / 2.0)
}

/// What was scheduled for one device in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedDevice {
    pub id: usize,
    pub alpha: f64,
    pub gain_sq: f64,
    pub transmit_power: f64,
    pub train_time: f64,
    pub upload_time: f64,
    /// Upload energy in joules.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// 1-based round index.
    pub round: usize,
    pub selected: Vec<SelectedDevice>,
    /// Round duration `T` in seconds.
    pub duration: f64,
    pub energy: f64,
    pub accuracy: f64,
    pub test_loss: f64,
    pub cumulative_energy: f64,
    pub cumulative_time: f64,
}

impl RoundMetrics {
    pub fn num_selected(&self) -> usize {
        self.selected.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scheduler: SchedulerKind,
    pub seed: u64,
    pub num_devices: usize,
    pub rounds: Vec<RoundMetrics>,
    /// First round whose accuracy reached the target.
    pub rounds_to_target: Option<usize>,
    pub total_energy: f64,
    pub completion_time: f64,
    pub final_accuracy: f64,
    /// Rounds each device took part in.
    pub selection_counts: Vec<usize>,
    pub mean_selected_fraction: f64,
    pub max_selected_fraction: f64,
}

struct Device {
    position: (f64, f64),
    distance: f64,
    power: f64,
    cpu_hz: f64,
    cycles_per_bit: f64,
    data: Dataset,
    diversity: f64,
}

/// One experiment as a state machine over rounds.
pub struct Simulation {
    config: SimConfig,
    devices: Vec<Device>,
    test: Dataset,
    model: GlobalModel,
    ages: Vec<u64>,
    round: usize,
    fading_rng: ChaCha8Rng,
    train_rng: ChaCha8Rng,
    baseline_rng: ChaCha8Rng,
    cumulative_energy: f64,
    cumulative_time: f64,
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seeds for the one-off setup steps, drawn in this order from stream 0.
struct SetupSeeds {
    data: u64,
    placement: u64,
    partition: u64,
    split: u64,
    init: u64,
}

impl SetupSeeds {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self { data: rng.next_u64(), placement: rng.next_u64(), partition: rng.next_u64(), split: rng.next_u64(), init: rng.next_u64() }
    }
}

/// The dataset and its per-device split, exactly as a simulation with the
/// same config and seed would build them.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub data: Dataset,
    pub partition: Partition,
    pub split: Split,
}

pub fn prepare_data(config: &SimConfig) -> Result<PreparedData> {
    config.validate()?;
    let seeds = SetupSeeds::draw(&mut stream(config.sim.seed, 0));
    build_data(config, &seeds)
}

fn build_data(config: &SimConfig, seeds: &SetupSeeds) -> Result<PreparedData> {
    let d = &config.data;
    let data = match d.source {
        DataSource::Synthetic => synthetic_dataset(d.num_classes, d.samples_per_class, d.feature_dim, d.cluster_spread, seeds.data)?,
        DataSource::Idx => {
            let images = d.images_path.as_deref().expect("validated");
            let labels = d.labels_path.as_deref().expect("validated");
            load_idx(images, labels)?
        }
    };
    let range = ShardRange::new(d.min_shards, d.max_shards)?;
    let partition = shard_partition(&data, d.shard_size, range, config.sim.num_devices, seeds.partition)?;
    let split = train_test_split(&partition, d.test_fraction, seeds.split)?;
    Ok(PreparedData { data, partition, split })
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let k = config.sim.num_devices;
        let mut setup = stream(config.sim.seed, 0);
        let seeds = SetupSeeds::draw(&mut setup);
        let PreparedData { data, split, .. } = build_data(&config, &seeds)?;
        let test = data.subset(&split.test)?;
        if test.is_empty() {
            return Err(Error::NoData("the global test set is empty".into()));
        }

        let positions = place_devices(k, config.radio.cell_side, seeds.placement)?;
        let mut devices = Vec::with_capacity(k);
        for (position, indices) in positions.into_iter().zip(&split.train) {
            let (power, cpu_hz, cycles_per_bit) = config.devices.sample(&mut setup);
            let local = data.subset(indices)?;
            let dist = label_distribution(local.labels(), data.num_classes())?;
            devices.push(Device {
                position,
                distance: distance_to_center(position, config.radio.cell_side),
                power,
                cpu_hz,
                cycles_per_bit,
                diversity: config.diversity.measure.score(&dist)?,
                data: local,
            });
        }
        let dims = ModelDims::new(data.feature_dim(), config.fl.hidden_dim, data.num_classes())?;
        let model = init_model(dims, seeds.init);
        Ok(Self {
            devices,
            test,
            model,
            ages: vec![0; k],
            round: 0,
            fading_rng: stream(config.sim.seed, 1),
            train_rng: stream(config.sim.seed, 2),
            baseline_rng: stream(config.sim.seed, 3),
            cumulative_energy: 0.0,
            cumulative_time: 0.0,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Rounds since each device was last selected, as of the end of the
    /// latest round.
    pub fn ages(&self) -> &[u64] {
        &self.ages
    }

    pub fn model(&self) -> &GlobalModel {
        &self.model
    }

    pub fn rounds_played(&self) -> usize {
        self.round
    }

    pub fn dataset_sizes(&self) -> Vec<usize> {
        self.devices.iter().map(|d| d.data.len()).collect()
    }

    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.devices.iter().map(|d| d.position).collect()
    }

    /// Plays the next round. Errors carry the round index.
    pub fn run_round(&mut self) -> Result<RoundMetrics> {
        let round = self.round + 1;
        let metrics = self.play(round).map_err(|e| Error::Round { round, source: Box::new(e) })?;
        self.round = round;
        Ok(metrics)
    }

    fn play(&mut self, round: usize) -> Result<RoundMetrics> {
        let cfg = &self.config;
        let radio = &cfg.radio;

        // channel realization and the reports devices send to the server
        let mut candidates = Vec::with_capacity(self.devices.len());
        let mut reports = Vec::with_capacity(self.devices.len());
        for (id, dev) in self.devices.iter().enumerate() {
            let fading = sample_rayleigh_power(&mut self.fading_rng);
            let state = DeviceRadioState {
                position: dev.position,
                distance: dev.distance,
                channel_gain_sq: channel_gain(dev.distance, radio.pathloss_exponent, fading)?,
                transmit_power: dev.power,
                cpu_hz: dev.cpu_hz,
                cycles_per_bit: dev.cycles_per_bit,
                bits_per_sample: cfg.devices.bits_per_sample,
            };
            let train_time = training_time(cfg.fl.epochs, dev.data.len(), &state);
            candidates.push(Candidate { id, state, train_time, index: 0.0 });
            reports.push(DeviceMetrics { dataset_diversity: dev.diversity, dataset_size: dev.data.len(), age: self.ages[id] });
        }
        for (c, r) in candidates.iter_mut().zip(diversity_index(&reports, &cfg.diversity.weights())?) {
            c.index = r.index;
        }

        let decision = self.schedule(&candidates)?;
        let positions = decision.selected_positions();

        let seeds: Vec<u64> = positions.iter().map(|_| self.train_rng.next_u64()).collect();
        let updates = positions
            .par_iter()
            .zip(&seeds)
            .map(|(&k, &seed)| local_train(k, &self.model, &self.devices[k].data, &self.config.fl, seed))
            .collect::<Result<Vec<LocalUpdate>>>()?;
        self.model = fedavg_aggregate(&self.model, &updates)?;
        let eval = evaluate(&self.model, &self.test)?;

        for (age, &x) in self.ages.iter_mut().zip(&decision.selected) {
            *age = if x { 0 } else { *age + 1 };
        }

        let duration = round_duration(&decision.completion, &decision.selected)?;
        let energy: f64 = positions.iter().map(|&k| decision.energy[k]).sum();
        self.cumulative_energy += energy;
        self.cumulative_time += duration;
        let selected = positions
            .iter()
            .map(|&k| {
                let c = &candidates[k];
                SelectedDevice {
                    id: k,
                    alpha: decision.alpha[k],
                    gain_sq: c.state.channel_gain_sq,
                    transmit_power: c.state.transmit_power,
                    train_time: c.train_time,
                    upload_time: decision.completion[k] - c.train_time,
                    energy: decision.energy[k],
                }
            })
            .collect();
        Ok(RoundMetrics {
            round,
            selected,
            duration,
            energy,
            accuracy: eval.accuracy,
            test_loss: eval.loss,
            cumulative_energy: self.cumulative_energy,
            cumulative_time: self.cumulative_time,
        })
    }

    fn schedule(&mut self, candidates: &[Candidate]) -> Result<ScheduleDecision> {
        let cfg = &self.config;
        let m = cfg.select_count();
        let positions = match cfg.sim.scheduler {
            SchedulerKind::Das => return schedule_das(candidates, &cfg.radio, &cfg.scheduler),
            SchedulerKind::All => return Ok(schedule_all(candidates, &cfg.radio, &cfg.scheduler)?.decision),
            SchedulerKind::Abs => schedule_abs(&self.ages, m, &mut self.baseline_rng)?,
            SchedulerKind::Random => schedule_random(candidates.len(), m, &mut self.baseline_rng)?,
        };
        let scale = ObjectiveScale::for_candidates(candidates, &cfg.radio, &cfg.scheduler)?;
        decide(candidates, &positions, &cfg.radio, &cfg.scheduler, &scale)
    }
}

/// Plays rounds until `max_rounds` or until the accuracy reaches the target.
pub fn run_experiment(config: &SimConfig) -> Result<ExperimentResult> {
    let mut sim = Simulation::new(config.clone())?;
    let k = config.sim.num_devices;
    let mut rounds = Vec::new();
    let mut counts = vec![0usize; k];
    let mut rounds_to_target = None;
    loop {
        let metrics = sim.run_round()?;
        for s in &metrics.selected {
            counts[s.id] += 1;
        }
        let reached = metrics.accuracy >= config.sim.target_accuracy;
        if reached && rounds_to_target.is_none() {
            rounds_to_target = Some(metrics.round);
        }
        let done = reached || metrics.round >= config.sim.max_rounds;
        rounds.push(metrics);
        if done {
            break;
        }
    }
    let last = rounds.last().expect("at least one round");
    let fractions: Vec<f64> = rounds.iter().map(|r| r.num_selected() as f64 / k as f64).collect();
    Ok(ExperimentResult {
        scheduler: config.sim.scheduler,
        seed: config.sim.seed,
        num_devices: k,
        rounds_to_target,
        total_energy: last.cumulative_energy,
        completion_time: last.cumulative_time,
        final_accuracy: last.accuracy,
        selection_counts: counts,
        mean_selected_fraction: fractions.iter().sum::<f64>() / fractions.len() as f64,
        max_selected_fraction: fractions.iter().copied().fold(0.0, f64::max),
        rounds,
    })
}
