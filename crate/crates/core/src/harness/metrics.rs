//! Per-episode statistics.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::queueing::QueueEvent;

/// Per-user steady-state statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStats {
    pub user: usize,
    pub mean_queue: f64,
    /// Little's-law delay `E[Q] / lambda_eff`, in slots.
    pub delay_slots: f64,
    /// Mean measured sojourn of packets that left during the window, in slots.
    pub sojourn_slots: f64,
    pub admitted: u64,
    pub dropped: u64,
    pub departed: u64,
    pub mean_rate: f64,
}

/// Per-BS power statistics in units of the power budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsStats {
    pub bs: usize,
    /// Mean over the whole horizon.
    pub mean_power: f64,
    /// Mean over the post-warm-up window.
    pub steady_power: f64,
    pub final_gamma: Option<f64>,
    pub min_gamma: Option<f64>,
    pub max_gamma: Option<f64>,
}

/// Aggregates of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scheme: String,
    pub seed: u64,
    pub config_hash: String,
    pub slots: u64,
    pub warmup_slots: u64,
    pub skipped_slots: u64,
    pub resampled_slots: u64,
    /// Mean over users of the Little's-law delay, in slots.
    pub mean_delay_slots: f64,
    pub mean_delay_seconds: f64,
    /// Network-wide `sum E[Q] / sum lambda_eff`, in slots.
    pub little_delay_slots: f64,
    /// Mean measured sojourn over all departed packets, in slots.
    pub sojourn_delay_slots: f64,
    pub mean_queue: f64,
    pub drop_rate: f64,
    pub mean_power: f64,
    pub steady_power: f64,
    pub mean_qsiwfa_iterations: Option<f64>,
    pub qsiwfa_failures: u64,
    pub contraction_fraction: Option<f64>,
    pub mean_alpha: Option<f64>,
    pub reference_violations: u64,
    pub pattern_histogram: BTreeMap<String, u64>,
    pub users: Vec<UserStats>,
    pub bss: Vec<BsStats>,
}

/// Running sums fed once per slot.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    warmup: u64,
    slots: u64,
    steady_slots: u64,
    skipped: u64,
    resampled: u64,
    queue_sum: Vec<f64>,
    rate_sum: Vec<f64>,
    admitted: Vec<u64>,
    dropped: Vec<u64>,
    offered: Vec<u64>,
    departed: Vec<u64>,
    sojourn_sum: Vec<f64>,
    sojourn_count: Vec<u64>,
    arrivals_fifo: Vec<VecDeque<u64>>,
    power_sum: Vec<f64>,
    steady_power_sum: Vec<f64>,
    gamma_range: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    qsiwfa_iterations: u64,
    qsiwfa_runs: u64,
    qsiwfa_failures: u64,
    contraction_hits: u64,
    contraction_runs: u64,
    alpha_sum: f64,
    reference_violations: u64,
    patterns: BTreeMap<String, u64>,
}

/// Game diagnostics of one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub alpha: f64,
    pub satisfied: bool,
}

impl MetricsAccumulator {
    pub fn new(num_users: usize, num_cells: usize, warmup: u64) -> Self {
        MetricsAccumulator {
            warmup,
            slots: 0,
            steady_slots: 0,
            skipped: 0,
            resampled: 0,
            queue_sum: vec![0.0; num_users],
            rate_sum: vec![0.0; num_users],
            admitted: vec![0; num_users],
            dropped: vec![0; num_users],
            offered: vec![0; num_users],
            departed: vec![0; num_users],
            sojourn_sum: vec![0.0; num_users],
            sojourn_count: vec![0; num_users],
            arrivals_fifo: vec![VecDeque::new(); num_users],
            power_sum: vec![0.0; num_cells],
            steady_power_sum: vec![0.0; num_cells],
            gamma_range: None,
            qsiwfa_iterations: 0,
            qsiwfa_runs: 0,
            qsiwfa_failures: 0,
            contraction_hits: 0,
            contraction_runs: 0,
            alpha_sum: 0.0,
            reference_violations: 0,
            patterns: BTreeMap::new(),
        }
    }

    fn steady(&self, slot: u64) -> bool {
        slot >= self.warmup
    }

    pub fn skip(&mut self) {
        self.slots += 1;
        self.skipped += 1;
    }

    pub fn resampled(&mut self) {
        self.resampled += 1;
    }

    pub fn reference_violation(&mut self) {
        self.reference_violations += 1;
    }

    /// Records a slot. `queues` are the lengths at the start of the slot.
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        slot: u64,
        queues: &[u64],
        events: &[QueueEvent],
        rates: &[f64],
        bs_power: &[f64],
        pattern_label: String,
        game: Option<GameDiagnostics>,
        gamma: Option<&[f64]>,
    ) {
        self.slots += 1;
        let steady = self.steady(slot);
        for (b, &p) in bs_power.iter().enumerate() {
            self.power_sum[b] += p;
            if steady {
                self.steady_power_sum[b] += p;
            }
        }
        for (u, ev) in events.iter().enumerate() {
            for _ in 0..ev.departed {
                if let Some(arrived) = self.arrivals_fifo[u].pop_front() {
                    if steady {
                        self.sojourn_sum[u] += (slot - arrived) as f64;
                        self.sojourn_count[u] += 1;
                    }
                }
            }
            for _ in 0..ev.arrived {
                self.arrivals_fifo[u].push_back(slot);
            }
        }
        if let Some(g) = gamma {
            match &mut self.gamma_range {
                None => self.gamma_range = Some((g.to_vec(), g.to_vec(), g.to_vec())),
                Some((lo, hi, last)) => {
                    for b in 0..g.len() {
                        lo[b] = lo[b].min(g[b]);
                        hi[b] = hi[b].max(g[b]);
                    }
                    last.copy_from_slice(g);
                }
            }
        }
        if let Some(d) = game {
            self.qsiwfa_runs += 1;
            self.qsiwfa_iterations += d.iterations as u64;
            self.qsiwfa_failures += u64::from(!d.converged);
            if steady {
                self.contraction_runs += 1;
                self.contraction_hits += u64::from(d.satisfied);
                self.alpha_sum += d.alpha;
            }
        }
        if !steady {
            return;
        }
        self.steady_slots += 1;
        *self.patterns.entry(pattern_label).or_default() += 1;
        for (u, ev) in events.iter().enumerate() {
            self.queue_sum[u] += queues[u] as f64;
            self.rate_sum[u] += rates[u];
            self.admitted[u] += ev.arrived;
            self.dropped[u] += ev.dropped;
            self.offered[u] += ev.arrived + ev.dropped;
            self.departed[u] += ev.departed;
        }
    }

    pub fn finish(
        self,
        scheme: &str,
        seed: u64,
        config_hash: String,
        slot_seconds: f64,
    ) -> Summary {
        let n = self.steady_slots.max(1) as f64;
        let users: Vec<UserStats> = (0..self.queue_sum.len())
            .map(|u| {
                let mean_queue = self.queue_sum[u] / n;
                let lambda_eff = self.admitted[u] as f64 / n;
                UserStats {
                    user: u,
                    mean_queue,
                    delay_slots: if lambda_eff > 0.0 { mean_queue / lambda_eff } else { 0.0 },
                    sojourn_slots: if self.sojourn_count[u] > 0 {
                        self.sojourn_sum[u] / self.sojourn_count[u] as f64
                    } else {
                        0.0
                    },
                    admitted: self.admitted[u],
                    dropped: self.dropped[u],
                    departed: self.departed[u],
                    mean_rate: self.rate_sum[u] / n,
                }
            })
            .collect();
        let total_slots = self.slots.max(1) as f64;
        let bss: Vec<BsStats> = (0..self.power_sum.len())
            .map(|b| BsStats {
                bs: b,
                mean_power: self.power_sum[b] / total_slots,
                steady_power: self.steady_power_sum[b] / n,
                final_gamma: self.gamma_range.as_ref().map(|g| g.2[b]),
                min_gamma: self.gamma_range.as_ref().map(|g| g.0[b]),
                max_gamma: self.gamma_range.as_ref().map(|g| g.1[b]),
            })
            .collect();
        let nu = users.len().max(1) as f64;
        let mean_delay_slots = users.iter().map(|s| s.delay_slots).sum::<f64>() / nu;
        let total_queue: f64 = users.iter().map(|s| s.mean_queue).sum();
        let total_lambda: f64 = users.iter().map(|s| s.admitted as f64 / n).sum();
        let sojourn_total: f64 = self.sojourn_sum.iter().sum();
        let sojourn_count: u64 = self.sojourn_count.iter().sum();
        let offered: u64 = self.offered.iter().sum();
        let dropped: u64 = self.dropped.iter().sum();
        let nb = bss.len().max(1) as f64;
        Summary {
            schema_version: super::config::SCHEMA_VERSION,
            scheme: scheme.to_string(),
            seed,
            config_hash,
            slots: self.slots,
            warmup_slots: self.warmup.min(self.slots),
            skipped_slots: self.skipped,
            resampled_slots: self.resampled,
            mean_delay_slots,
            mean_delay_seconds: mean_delay_slots * slot_seconds,
            little_delay_slots: if total_lambda > 0.0 { total_queue / total_lambda } else { 0.0 },
            sojourn_delay_slots: if sojourn_count > 0 {
                sojourn_total / sojourn_count as f64
            } else {
                0.0
            },
            mean_queue: total_queue / nu,
            drop_rate: if offered > 0 { dropped as f64 / offered as f64 } else { 0.0 },
            mean_power: bss.iter().map(|b| b.mean_power).sum::<f64>() / nb,
            steady_power: bss.iter().map(|b| b.steady_power).sum::<f64>() / nb,
            mean_qsiwfa_iterations: (self.qsiwfa_runs > 0)
                .then(|| self.qsiwfa_iterations as f64 / self.qsiwfa_runs as f64),
            qsiwfa_failures: self.qsiwfa_failures,
            contraction_fraction: (self.contraction_runs > 0)
                .then(|| self.contraction_hits as f64 / self.contraction_runs as f64),
            mean_alpha: (self.contraction_runs > 0)
                .then(|| self.alpha_sum / self.contraction_runs as f64),
            reference_violations: self.reference_violations,
            pattern_histogram: self.patterns,
            users,
            bss,
        }
    }
}
