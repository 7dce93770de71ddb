//! Joint device selection and bandwidth allocation.
//!
//! The data-aware scheduler (DAS) splits the problem in two: a knapsack-style
//! selection that trades diversity index against estimated upload cost
//! ([`solve_sub1`]), then a convex bandwidth split over the chosen devices
//! ([`solve_sub2`]). Baselines and an exhaustive oracle share the same types.

mod bandwidth;
mod baselines;
mod instance;
mod oracle;
mod selection;

pub use bandwidth::{
    evaluate_allocation, min_bandwidth_for_deadline, solve_sub2, solve_sub2_with_budget, BandwidthAllocation,
};
pub use baselines::{schedule_abs, schedule_all, schedule_random, ScheduleAll};
pub use instance::{Instance, InstanceConfig, InstanceDevice, InstanceParams};
pub use oracle::{brute_force_oracle, ORACLE_MAX_DEVICES};
pub use selection::{decide, schedule_das, scalarized_objective, solve_sub1, estimate_costs, CostEstimate, ObjectiveScale};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::DeviceRadioState;

/// What the scheduler knows about one device in the current round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    pub state: DeviceRadioState,
    /// Local training time for this round, in seconds.
    pub train_time: f64,
    /// Diversity index `I_k`.
    pub index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    /// Weight of the upload energy in the selection score.
    pub lambda_e: f64,
    /// Weight of the completion time in the selection score.
    pub lambda_t: f64,
    /// Weight of the diversity index in the selection score.
    pub lambda_i: f64,
    /// Time versus energy weight of the bandwidth split.
    pub rho: f64,
    /// Minimum number of devices per round (`N`).
    pub min_devices: usize,
    pub max_devices: Option<usize>,
    pub tolerance: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            lambda_e: 0.25,
            lambda_t: 0.25,
            lambda_i: 0.5,
            rho: 0.5,
            min_devices: 1,
            max_devices: None,
            tolerance: 1e-6,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_e, self.lambda_t, self.lambda_i];
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidInput("scheduler lambdas must be non-negative".into()));
        }
        if lambdas.iter().all(|l| *l == 0.0) {
            return Err(Error::InvalidInput("scheduler lambdas must not all be zero".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidInput(format!("scheduler.rho must lie in [0, 1], got {}", self.rho)));
        }
        if self.min_devices == 0 {
            return Err(Error::InvalidInput("scheduler.min_devices must be at least 1".into()));
        }
        if let Some(max) = self.max_devices {
            if max < self.min_devices {
                return Err(Error::InvalidInput(format!(
                    "scheduler.max_devices ({max}) is below min_devices ({})",
                    self.min_devices
                )));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("scheduler.tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Selection and bandwidth split for one round, indexed by position in the
/// candidate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub selected: Vec<bool>,
    pub alpha: Vec<f64>,
    /// Predicted round duration in seconds.
    pub round_time: f64,
    /// Predicted upload energy per device (zero when not selected).
    pub energy: Vec<f64>,
    /// Training plus upload time per device (zero when not selected).
    pub completion: Vec<f64>,
    /// Scalarized joint objective; larger is better.
    pub objective: f64,
}

impl ScheduleDecision {
    pub fn selected_positions(&self) -> Vec<usize> {
        self.selected.iter().enumerate().filter(|(_, &x)| x).map(|(k, _)| k).collect()
    }

    pub fn num_selected(&self) -> usize {
        self.selected.iter().filter(|&&x| x).count()
    }

    pub fn total_energy(&self) -> f64 {
        self.energy.iter().sum()
    }

    /// Checks the structural constraints every decision must satisfy.
    pub fn check_feasible(&self, min_devices: usize, tolerance: f64) -> Result<()> {
        let k = self.selected.len();
        if self.alpha.len() != k || self.energy.len() != k || self.completion.len() != k {
            return Err(Error::InvalidInput("decision vectors differ in length".into()));
        }
        let sum: f64 = self.alpha.iter().sum();
        if sum > 1.0 + tolerance {
            return Err(Error::Infeasible(format!("bandwidth shares sum to {sum}")));
        }
        if self.num_selected() < min_devices {
            return Err(Error::Infeasible(format!(
                "{} devices selected, at least {min_devices} required",
                self.num_selected()
            )));
        }
        for (i, (&x, &a)) in self.selected.iter().zip(&self.alpha).enumerate() {
            if !(0.0..=1.0).contains(&a) || (x != (a > 0.0)) {
                return Err(Error::Infeasible(format!("device position {i}: selected={x} alpha={a}")));
            }
            if x && self.completion[i] > self.round_time * (1.0 + tolerance) {
                return Err(Error::Infeasible(format!(
                    "device position {i} finishes at {} after round end {}",
                    self.completion[i], self.round_time
                )));
            }
        }
        Ok(())
    }
}

/// Positions of candidates that can transmit at all.
pub(crate) fn transmitting(candidates: &[Candidate]) -> Vec<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.state.can_transmit() && c.train_time.is_finite())
        .map(|(k, _)| k)
        .collect()
}
