//! Exhaustive subset enumeration used to certify the greedy selection.

use super::selection::{decide, ObjectiveScale};
use super::{transmitting, Candidate, ScheduleDecision, SchedulerConfig};
use crate::error::{Error, Result};
use crate::radio::RadioParams;

/// Largest population the oracle will enumerate.
pub const ORACLE_MAX_DEVICES: usize = 12;

/// Best decision over every subset of at least `min_devices` (and at most
/// `max_devices`) transmitting devices, scored with the same scalarization
/// as DAS. Ties go to the lexicographically smallest subset.
pub fn brute_force_oracle(candidates: &[Candidate], params: &RadioParams, config: &SchedulerConfig) -> Result<ScheduleDecision> {
    config.validate()?;
    if candidates.len() > ORACLE_MAX_DEVICES {
        return Err(Error::InvalidInput(format!(
            "oracle enumerates at most {ORACLE_MAX_DEVICES} devices, got {}",
            candidates.len()
        )));
    }
    let feasible = transmitting(candidates);
    if feasible.len() < config.min_devices {
        return Err(Error::Shortfall { feasible: feasible.len(), required: config.min_devices });
    }
    let scale = ObjectiveScale::for_candidates(candidates, params, config)?;
    let max = config.max_devices.unwrap_or(feasible.len());

    let mut best: Option<(Vec<usize>, ScheduleDecision)> = None;
    for mask in 1u32..(1u32 << feasible.len()) {
        let size = mask.count_ones() as usize;
        if size < config.min_devices || size > max {
            continue;
        }
        let subset: Vec<usize> = feasible
            .iter()
            .enumerate()
            .filter(|(bit, _)| mask & (1 << bit) != 0)
            .map(|(_, &k)| k)
            .collect();
        let decision = decide(candidates, &subset, params, config, &scale)?;
        let better = match &best {
            None => true,
            Some((incumbent, d)) => {
                decision.objective > d.objective || (decision.objective == d.objective && subset < *incumbent)
            }
        };
        if better {
            best = Some((subset, decision));
        }
    }
    best.map(|(_, d)| d)
        .ok_or_else(|| Error::Infeasible("no subset satisfies the selection bounds".into()))
}
