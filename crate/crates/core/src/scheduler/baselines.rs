//! Baseline schedulers: age-based priority, uniform random and all devices.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::selection::{decide, ObjectiveScale};
use super::{transmitting, Candidate, ScheduleDecision, SchedulerConfig};
use crate::error::{Error, Result};
use crate::radio::RadioParams;

/// Age-based scheduling: the `m` devices with the highest `log(1 + age)`.
/// Ties are broken uniformly at random from `rng`. Returns sorted positions.
pub fn schedule_abs<R: Rng + ?Sized>(ages: &[u64], m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::InvalidInput("age-based scheduling needs m >= 1".into()));
    }
    if m > ages.len() {
        return Err(Error::InvalidInput(format!("cannot select {m} of {} devices", ages.len())));
    }
    let mut order: Vec<usize> = (0..ages.len()).collect();
    order.shuffle(rng);
    // stable sort keeps the shuffled order among equal priorities
    order.sort_by(|&a, &b| priority(ages[b]).total_cmp(&priority(ages[a])));
    let mut chosen = order[..m].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

fn priority(age: u64) -> f64 {
    (age as f64).ln_1p()
}

/// Uniform `m`-subset of `0..k`, sorted.
pub fn schedule_random<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 || m > k {
        return Err(Error::InvalidInput(format!("cannot select {m} of {k} devices")));
    }
    let mut chosen = index::sample(rng, k, m).into_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleAll {
    pub decision: ScheduleDecision,
    /// Devices left out because they cannot transmit.
    pub skipped: usize,
}

/// Every device that can transmit, with the bandwidth split optimized.
pub fn schedule_all(candidates: &[Candidate], params: &RadioParams, config: &SchedulerConfig) -> Result<ScheduleAll> {
    let feasible = transmitting(candidates);
    if feasible.is_empty() {
        return Err(Error::Shortfall { feasible: 0, required: 1 });
    }
    let scale = ObjectiveScale::for_candidates(candidates, params, config)?;
    let decision = decide(candidates, &feasible, params, config, &scale)?;
    Ok(ScheduleAll { decision, skipped: candidates.len() - feasible.len() })
}
