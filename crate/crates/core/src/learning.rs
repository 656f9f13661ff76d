//! Two-timescale stochastic approximation of compact potentials (fast) and
//! per-BS Lagrange multipliers (slow).

use serde::{Deserialize, Serialize};

use crate::control::{project_lm, LagrangeMultipliers, PotentialStore};
use crate::{Error, Result};

pub use crate::harness::engine::{run_learning_episode, LearningRun};

/// Power-law step sizes `scale / (n + 1)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepSizeSchedule {
    pub exponent_v: f64,
    pub scale_v: f64,
    pub exponent_gamma: f64,
    pub scale_gamma: f64,
}

impl Default for StepSizeSchedule {
    fn default() -> Self {
        StepSizeSchedule {
            exponent_v: 0.6,
            scale_v: 1.0,
            exponent_gamma: 0.9,
            scale_gamma: 0.05,
        }
    }
}

impl StepSizeSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.5 < self.exponent_v
            && self.exponent_v < self.exponent_gamma
            && self.exponent_gamma <= 1.0
            && self.scale_v > 0.0
            && self.scale_gamma > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                "step sizes need 0.5 < exponent_v < exponent_gamma <= 1 and positive scales",
            ))
        }
    }

    /// Potential step after `visit_count` earlier updates of the same entry.
    pub fn potential_step(&self, visit_count: u64) -> f64 {
        self.scale_v / ((visit_count + 1) as f64).powf(self.exponent_v)
    }

    /// Multiplier step at slot `slot`.
    pub fn multiplier_step(&self, slot: u64) -> f64 {
        self.scale_gamma / ((slot + 1) as f64).powf(self.exponent_gamma)
    }

    pub fn step_sizes(&self, visit_count: u64, slot: u64) -> (f64, f64) {
        (self.potential_step(visit_count), self.multiplier_step(slot))
    }
}

/// What one active (cluster, user) pair saw in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningObservation {
    pub cluster: usize,
    pub user: usize,
    /// Queue length at the start of the slot.
    pub queue: u64,
    /// Per-stage cost `beta f(Q) + p sum_b gamma_b ||w_b||^2`.
    pub cost: f64,
    /// Departure probability granted this slot.
    pub mu_tau: f64,
    /// Whether the queue grew by one during the slot.
    pub arrived: bool,
}

/// Applies one stochastic-approximation step to the table of `obs`.
///
/// Only anchor states `Q = q d` update. At the reference state the running
/// means of the cost and of the arrival indicator are refreshed for later
/// differencing, and the value stays 0.
/// Returns whether an update fired.
pub fn update_potential(
    store: &mut PotentialStore,
    obs: &LearningObservation,
    schedule: &StepSizeSchedule,
) -> Result<bool> {
    let d = store.resolution;
    let lq = store.lq();
    let local = store.local_index(obs.cluster, obs.user).ok_or_else(|| {
        Error::contract(format!("no table for cluster {}, user {}", obs.cluster, obs.user))
    })?;
    if obs.queue > store.capacity {
        return Err(Error::contract(format!("queue value {} out of range", obs.queue)));
    }
    if obs.queue % d != 0 {
        return Ok(false);
    }
    let q = (obs.queue / d) as usize;
    let t = &mut store.tables[obs.cluster][local];
    let df = d as f64;
    if q == 0 {
        let n = (t.visits[0] + 1) as f64;
        t.ref_cost += (obs.cost - t.ref_cost) / n;
        t.ref_arrival += (f64::from(u8::from(obs.arrived)) - t.ref_arrival) / n;
    } else {
        let v = &t.values;
        let down = obs.mu_tau * (v[q - 1] - v[q]) / df;
        let up = if obs.arrived {
            (v[(q + 1).min(lq)] - v[q]) / df
        } else {
            0.0
        };
        let reference = t.ref_cost + t.ref_arrival * (v[1] - v[0]) / df;
        let y = obs.cost + down + up - reference;
        let eps = schedule.potential_step(t.visits[q]);
        t.values[q] += eps * y;
    }
    t.visits[q] += 1;
    t.values[0] = 0.0;
    Ok(true)
}

/// `gamma_b <- clamp(gamma_b + eps (P_b - budget_b), 0, B)`.
pub fn update_lm(lm: &mut LagrangeMultipliers, power: &[f64], budgets: &[f64], eps: f64) {
    for ((g, p), pb) in lm.gamma.iter_mut().zip(power).zip(budgets) {
        *g = project_lm(*g + eps * (p - pb), lm.bound);
    }
}
