//! Device selection (Sub1) and the full DAS pipeline.

use serde::{Deserialize, Serialize};

use super::bandwidth::{solve_sub2, BandwidthAllocation};
use super::{transmitting, Candidate, ScheduleDecision, SchedulerConfig};
use crate::error::{Error, Result};
use crate::radio::{rate_from_snr, RadioParams};

/// Upload cost of a candidate under an equal split of the band among all
/// transmitting candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub energy: f64,
    pub completion: f64,
}

/// Equal-share cost estimates for `positions`, in that order.
pub fn estimate_costs(candidates: &[Candidate], positions: &[usize], params: &RadioParams) -> Vec<CostEstimate> {
    let share = 1.0 / positions.len().max(1) as f64;
    positions
        .iter()
        .map(|&k| {
            let c = &candidates[k];
            let rate = rate_from_snr(share, params.bandwidth_hz, c.state.full_band_snr(params));
            let upload = params.model_size_bits / rate;
            CostEstimate { energy: c.state.transmit_power * upload, completion: c.train_time + upload }
        })
        .collect()
}

/// Reference values that put index, energy and time on a common scale: the
/// mean index, and the median upload energy and median completion time of the
/// transmitting candidates on a `1/sqrt(n)` slice of the band, with `n`
/// candidates. Each term of the objective then counts in units of a typical
/// device sharing the band with a few others. Medians, because under Rayleigh
/// fading a single deep fade can put one device's cost orders of magnitude
/// above the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveScale {
    pub index: f64,
    pub energy: f64,
    pub time: f64,
}

impl ObjectiveScale {
    pub fn for_candidates(candidates: &[Candidate], params: &RadioParams, config: &SchedulerConfig) -> Result<Self> {
        let feasible = transmitting(candidates);
        if feasible.is_empty() {
            return Err(Error::Shortfall { feasible: 0, required: config.min_devices.max(1) });
        }
        let share = 1.0 / (feasible.len() as f64).sqrt();
        let mut index = Vec::with_capacity(feasible.len());
        let mut energy = Vec::with_capacity(feasible.len());
        let mut time = Vec::with_capacity(feasible.len());
        for &k in &feasible {
            let c = &candidates[k];
            let upload = params.model_size_bits / rate_from_snr(share, params.bandwidth_hz, c.state.full_band_snr(params));
            index.push(c.index);
            energy.push(c.state.transmit_power * upload);
            time.push(c.train_time + upload);
        }
        Ok(Self::from_parts(index.iter().sum::<f64>() / index.len() as f64, median(&mut energy), median(&mut time)))
    }

    fn from_parts(index: f64, energy: f64, time: f64) -> Self {
        Self { index: positive_or_one(index), energy: positive_or_one(energy), time: positive_or_one(time) }
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

fn positive_or_one(v: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        v
    } else {
        1.0
    }
}

/// Joint scalarized objective of a selection with its bandwidth split:
/// `lambda_I * sum I / I_ref - lambda_E * E / E_ref - lambda_T * T / T_ref`.
/// Larger is better.
pub fn scalarized_objective(
    candidates: &[Candidate],
    positions: &[usize],
    alloc: &BandwidthAllocation,
    scale: &ObjectiveScale,
    config: &SchedulerConfig,
) -> f64 {
    let index: f64 = positions.iter().map(|&k| candidates[k].index).sum();
    config.lambda_i * index / scale.index
        - config.lambda_e * alloc.total_energy / scale.energy
        - config.lambda_t * alloc.round_time / scale.time
}

/// Devices outside the selection considered by each improvement move.
const NEIGHBOURHOOD: usize = 8;
/// Subset evaluations the improvement phase may spend.
const SEARCH_BUDGET: usize = 256;

/// Greedy selection with local improvement. Devices are ranked by their
/// stand-alone score under an equal split of the band, added down the ranking
/// while the joint objective improves, then pruned. Improvement moves insert
/// a nearby outsider (or swap it for a member), re-add and re-prune, and are
/// kept when the objective rises. Returns candidate positions.
pub fn solve_sub1(candidates: &[Candidate], params: &RadioParams, config: &SchedulerConfig) -> Result<Vec<usize>> {
    config.validate()?;
    let feasible = transmitting(candidates);
    if feasible.len() < config.min_devices {
        return Err(Error::Shortfall { feasible: feasible.len(), required: config.min_devices });
    }
    let scale = ObjectiveScale::for_candidates(candidates, params, config)?;
    let ranked = rank(candidates, &feasible, params, config);
    let max = config.max_devices.unwrap_or(ranked.len()).min(ranked.len());

    let evaluations = std::cell::Cell::new(0usize);
    let eval = |set: &[usize]| {
        evaluations.set(evaluations.get() + 1);
        evaluate_subset(candidates, set, params, config, &scale).ok()
    };
    // Walk down `order` adding improving devices, giving up after a run of
    // rejections, then drop members while that helps.
    let polish = |set: &mut Vec<usize>, mut value: f64, order: &[usize]| -> f64 {
        let mut misses = 0;
        for &k in order {
            if set.len() >= max || misses >= NEIGHBOURHOOD {
                break;
            }
            if set.contains(&k) {
                continue;
            }
            set.push(k);
            match eval(set) {
                Some(v) if v > value => {
                    value = v;
                    misses = 0;
                }
                _ => {
                    set.pop();
                    misses += 1;
                }
            }
        }
        let mut i = 0;
        while i < set.len() && set.len() > config.min_devices {
            let mut trial = set.clone();
            trial.remove(i);
            match eval(&trial) {
                Some(v) if v > value => {
                    value = v;
                    *set = trial;
                    i = 0;
                }
                _ => i += 1,
            }
        }
        value
    };

    let mut chosen: Vec<usize> = ranked[..config.min_devices].to_vec();
    let start = eval(&chosen).ok_or_else(|| Error::Infeasible("top-ranked devices admit no bandwidth split".into()))?;
    let mut best = polish(&mut chosen, start, &ranked);
    let spent = evaluations.get();
    while evaluations.get() - spent < SEARCH_BUDGET {
        let outsiders: Vec<usize> = ranked.iter().copied().filter(|k| !chosen.contains(k)).take(NEIGHBOURHOOD).collect();
        let mut next: Option<(Vec<usize>, f64)> = None;
        'moves: for &k in &outsiders {
            let slots: Vec<Option<usize>> =
                if chosen.len() < max { vec![None] } else { (0..chosen.len()).map(Some).collect() };
            for slot in slots {
                if evaluations.get() - spent >= SEARCH_BUDGET {
                    break 'moves;
                }
                let mut trial = chosen.clone();
                match slot {
                    None => trial.push(k),
                    Some(i) => trial[i] = k,
                }
                if let Some(v) = eval(&trial) {
                    let v = polish(&mut trial, v, &outsiders);
                    if v > best {
                        next = Some((trial, v));
                        break 'moves;
                    }
                }
            }
        }
        match next {
            Some((set, v)) => {
                chosen = set;
                best = polish(&mut chosen, v, &ranked);
            }
            None => break,
        }
    }
    Ok(chosen)
}

/// Transmitting positions ordered by stand-alone score, best first; ties go
/// to the lower id.
fn rank(candidates: &[Candidate], feasible: &[usize], params: &RadioParams, config: &SchedulerConfig) -> Vec<usize> {
    let costs = estimate_costs(candidates, feasible, params);
    let n = feasible.len() as f64;
    let est = ObjectiveScale::from_parts(
        feasible.iter().map(|&k| candidates[k].index).sum::<f64>() / n,
        costs.iter().map(|c| c.energy).sum::<f64>() / n,
        costs.iter().map(|c| c.completion).sum::<f64>() / n,
    );
    let mut scored: Vec<(f64, usize)> = feasible
        .iter()
        .zip(&costs)
        .map(|(&k, cost)| {
            let score = config.lambda_i * candidates[k].index / est.index
                - config.lambda_e * cost.energy / est.energy
                - config.lambda_t * cost.completion / est.time;
            (score, k)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(candidates[a.1].id.cmp(&candidates[b.1].id)));
    scored.into_iter().map(|(_, k)| k).collect()
}

fn evaluate_subset(
    candidates: &[Candidate],
    positions: &[usize],
    params: &RadioParams,
    config: &SchedulerConfig,
    scale: &ObjectiveScale,
) -> Result<f64> {
    let chosen: Vec<Candidate> = positions.iter().map(|&k| candidates[k]).collect();
    let alloc = solve_sub2(&chosen, params, config.rho, config.tolerance)?;
    Ok(scalarized_objective(candidates, positions, &alloc, scale, config))
}

/// Allocates bandwidth to `positions` and assembles the full decision.
pub fn decide(
    candidates: &[Candidate],
    positions: &[usize],
    params: &RadioParams,
    config: &SchedulerConfig,
    scale: &ObjectiveScale,
) -> Result<ScheduleDecision> {
    let chosen: Vec<Candidate> = positions.iter().map(|&k| candidates[k]).collect();
    let alloc = solve_sub2(&chosen, params, config.rho, config.tolerance)?;
    let objective = scalarized_objective(candidates, positions, &alloc, scale, config);
    let k = candidates.len();
    let mut decision = ScheduleDecision {
        selected: vec![false; k],
        alpha: vec![0.0; k],
        round_time: alloc.round_time,
        energy: vec![0.0; k],
        completion: vec![0.0; k],
        objective,
    };
    for (i, &pos) in positions.iter().enumerate() {
        decision.selected[pos] = true;
        decision.alpha[pos] = alloc.alpha[i];
        decision.energy[pos] = alloc.energy[i];
        decision.completion[pos] = alloc.completion[i];
    }
    Ok(decision)
}

/// Data-aware scheduling: greedy selection followed by the bandwidth split.
pub fn schedule_das(candidates: &[Candidate], params: &RadioParams, config: &SchedulerConfig) -> Result<ScheduleDecision> {
    let mut positions = solve_sub1(candidates, params, config)?;
    positions.sort_unstable();
    let scale = ObjectiveScale::for_candidates(candidates, params, config)?;
    decide(candidates, &positions, params, config, &scale)
}
