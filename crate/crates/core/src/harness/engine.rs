//! Slot-level episode loop shared by every scheme.

use crate::baselines::{fca_allocate, greedy_dynamic_cluster, static_cluster_allocate, SlotAllocation};
use crate::channel::{ChannelModel, ChannelState};
use crate::control::{select_pattern, LagrangeMultipliers, PotentialStore};
use crate::game::{contraction_report, qsiwfa, GameInstance};
use crate::learning::{update_lm, update_potential, LearningObservation, StepSizeSchedule};
use crate::oracle::water_level;
use crate::phy::{build_coupling_matrix, compute_zf_precoders, per_bs_power, rate};
use crate::queueing::{
    departure_uniforms, sample_arrivals, step_queue_bits, step_queue_packets, QueueMode, QueueState,
    TrafficConfig,
};
use crate::topology::{ClusteringPattern, NetworkTopology, PatternCatalog};
use crate::{Error, Result};

use super::config::{Scheme, SimConfig};
use super::metrics::{GameDiagnostics, MetricsAccumulator, Summary};

/// Redraws allowed for a rank-deficient continuous channel.
const MAX_RESAMPLES: u64 = 16;

/// Everything derived from a configuration before the first slot.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SimConfig,
    pub topology: NetworkTopology,
    pub catalog: PatternCatalog,
    pub traffic: TrafficConfig,
    pub model: ChannelModel,
    /// Departure probability per bit/s/Hz.
    pub kappa: f64,
    /// Per-BS budgets in budget units.
    pub budgets: Vec<f64>,
    pub static_pattern: ClusteringPattern,
}

impl Scenario {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let topology = config.build_topology()?;
        let catalog = config.build_catalog(&topology)?;
        let static_pattern = config.static_pattern(&topology, &catalog)?;
        Ok(Scenario {
            traffic: config.traffic(),
            model: config.channel_model()?,
            kappa: config.kappa(),
            budgets: vec![1.0; topology.num_cells],
            config: config.clone(),
            topology,
            catalog,
            static_pattern,
        })
    }

    fn lambda_tau(&self) -> Vec<f64> {
        (0..self.topology.num_users())
            .map(|u| self.traffic.arrival_prob(u))
            .collect()
    }

    /// Spectral efficiency at which a user's departure probability saturates.
    pub fn rate_caps(&self) -> Vec<f64> {
        self.lambda_tau()
            .iter()
            .map(|lt| (1.0 - lt) / self.kappa)
            .collect()
    }
}

/// State of the queue-aware learning controller.
#[derive(Debug, Clone)]
pub struct ProposedState {
    pub store: PotentialStore,
    pub lm: LagrangeMultipliers,
    pub schedule: StepSizeSchedule,
}

struct Decision {
    alloc: SlotAllocation,
    pattern_id: Option<usize>,
    prices: Vec<f64>,
    game: Option<GameDiagnostics>,
}

enum Policy {
    Proposed(Box<ProposedState>),
    Fca,
    Static,
    Greedy,
}

impl Policy {
    fn decide(&mut self, sc: &Scenario, channel: &ChannelState, queues: &[u64]) -> Result<Decision> {
        match self {
            Policy::Proposed(state) => decide_proposed(state, sc, channel, queues),
            Policy::Fca => Ok(plain(fca_allocate(channel, &sc.topology, &sc.budgets)?, Some(0))),
            Policy::Static => {
                let alloc = static_cluster_allocate(channel, &sc.static_pattern, &sc.budgets)?;
                Ok(plain(alloc, sc.static_pattern.pattern_id))
            }
            Policy::Greedy => {
                let alloc = greedy_dynamic_cluster(channel, &sc.topology, &sc.catalog, &sc.budgets)?;
                let id = alloc.pattern.pattern_id;
                Ok(plain(alloc, id))
            }
        }
    }
}

fn plain(alloc: SlotAllocation, pattern_id: Option<usize>) -> Decision {
    let n = alloc.p.len();
    Decision {
        alloc,
        pattern_id,
        prices: vec![0.0; n],
        game: None,
    }
}

fn decide_proposed(
    state: &ProposedState,
    sc: &Scenario,
    channel: &ChannelState,
    queues: &[u64],
) -> Result<Decision> {
    let cfg = &sc.config;
    let pid = select_pattern(&state.store, &sc.catalog, queues)?;
    let pattern = sc.catalog.patterns[pid].clone();
    let precoders = compute_zf_precoders(channel, &pattern)?;
    let num_users = sc.topology.num_users();
    let registry = &sc.catalog.pattern_clusters[pid];
    let mut numerators = vec![0.0; num_users];
    for (local, &n) in registry.iter().enumerate() {
        for &b in &pattern.clusters[local] {
            for u in sc.topology.users_of(b) {
                let dv = state.store.delta(n, u, queues[u])?;
                numerators[u] = water_level(sc.kappa, dv);
            }
        }
    }
    let prices: Vec<f64> = (0..num_users)
        .map(|u| precoders.power_price(u, &state.lm.gamma))
        .collect();
    let mut game = GameInstance::new(numerators, prices.clone(), build_coupling_matrix(channel, &precoders));
    game.p_max = cfg.game.p_max;
    game.rate_caps = Some(sc.rate_caps());
    let report = contraction_report(&game);
    let mut out = qsiwfa(&game, &vec![0.0; num_users], cfg.game.tol, cfg.game.max_iter);
    if let Some(ratio) = cfg.game.peak_ratio {
        let power = per_bs_power(&precoders, &out.p);
        for c in &precoders.clusters {
            let scale = c
                .bss
                .iter()
                .map(|&b| (ratio * sc.budgets[b] / power[b]).min(1.0))
                .fold(1.0, f64::min);
            for &u in &c.users {
                out.p[u] *= scale;
            }
        }
    }
    let interference = game.interference(&out.p);
    let rates = out
        .p
        .iter()
        .zip(&interference)
        .map(|(&p, &i)| rate(p, i))
        .collect();
    let bs_power = per_bs_power(&precoders, &out.p);
    Ok(Decision {
        alloc: SlotAllocation {
            pattern,
            precoders,
            p: out.p,
            interference,
            rates,
            bs_power,
        },
        pattern_id: Some(pid),
        prices,
        game: Some(GameDiagnostics {
            iterations: out.iterations,
            converged: out.converged,
            alpha: report.alpha,
            satisfied: report.satisfied,
        }),
    })
}

/// One row of the per-slot trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub skipped: bool,
    pub pattern_id: Option<usize>,
    pub num_clusters: usize,
    pub game: Option<GameDiagnostics>,
    pub queues: Vec<u64>,
    pub bs_power: Vec<f64>,
    pub gamma: Vec<f64>,
    pub drops: u64,
}

/// Snapshot row of a potential table entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSample {
    pub slot: u64,
    pub cluster: usize,
    pub user: usize,
    pub q: usize,
    pub value: f64,
}

/// Result of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub summary: Summary,
    pub slots: Vec<SlotRecord>,
    pub potentials: Vec<PotentialSample>,
    pub proposed: Option<ProposedState>,
    pub scenario: Scenario,
}

/// Tracing switches of [`run_episode_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    pub slots: bool,
    /// Potential snapshot period; 0 disables snapshots.
    pub snapshot_every: u64,
}

impl TraceOptions {
    pub const NONE: TraceOptions = TraceOptions {
        slots: false,
        snapshot_every: 0,
    };
}

/// Runs the configured scheme with traces as requested by the output
/// section (traces are kept only when an output directory is set).
pub fn run_episode(config: &SimConfig) -> Result<EpisodeResult> {
    let opts = if config.output.dir.is_some() {
        TraceOptions {
            slots: config.output.write_slots,
            snapshot_every: config.output.snapshot_every,
        }
    } else {
        TraceOptions::NONE
    };
    run_episode_with(config, opts)
}

pub fn run_episode_with(config: &SimConfig, opts: TraceOptions) -> Result<EpisodeResult> {
    let sc = Scenario::new(config)?;
    let cfg = &sc.config;
    let topo = &sc.topology;
    let num_users = topo.num_users();
    let seed = cfg.run.seed;
    let mut policy = match cfg.scheme.kind {
        Scheme::Proposed => Policy::Proposed(Box::new(ProposedState {
            store: PotentialStore::new(
                &sc.catalog,
                topo.users_per_cell,
                cfg.traffic.queue_capacity,
                cfg.learning.resolution,
            )?,
            lm: LagrangeMultipliers::new(topo.num_cells, cfg.learning.gamma_init, cfg.learning.gamma_bound)?,
            schedule: cfg.learning.schedule(),
        })),
        Scheme::Fca => Policy::Fca,
        Scheme::Static => Policy::Static,
        Scheme::Greedy => Policy::Greedy,
    };
    let lambda_tau = sc.lambda_tau();
    let mu_cap: Vec<f64> = lambda_tau.iter().map(|lt| 1.0 - lt).collect();
    let warmup = (cfg.run.slots as f64 * cfg.run.warmup_fraction).floor() as u64;
    let mut metrics = MetricsAccumulator::new(num_users, topo.num_cells, warmup);
    let mut queues = QueueState::empty(num_users, cfg.traffic.queue_capacity);
    let mut slots = Vec::new();
    let mut potentials = Vec::new();
    let bits_per_rate = cfg.radio.bandwidth_hz * cfg.traffic.slot_seconds;

    for t in 0..cfg.run.slots {
        let q0 = queues.q.clone();
        let mut attempt = 0;
        let decided = loop {
            let channel = sc.model.sample(topo, seed, t, attempt);
            match policy.decide(&sc, &channel, &q0) {
                Ok(d) => break Some(d),
                Err(Error::SingularChannel { .. }) if !sc.model.resamples_singular() => break None,
                Err(Error::SingularChannel { .. }) if attempt < MAX_RESAMPLES => {
                    attempt += 1;
                    metrics.resampled();
                }
                Err(e) => return Err(e.at_slot(t)),
            }
        };
        let Some(decision) = decided else {
            log::debug!("slot {t}: singular quantised channel, slot skipped");
            metrics.skip();
            if opts.slots {
                slots.push(SlotRecord {
                    slot: t,
                    skipped: true,
                    pattern_id: None,
                    num_clusters: 0,
                    game: None,
                    queues: q0,
                    bs_power: vec![0.0; topo.num_cells],
                    gamma: gamma_of(&policy),
                    drops: 0,
                });
            }
            continue;
        };
        let alloc = &decision.alloc;
        let arrivals = sample_arrivals(&sc.traffic, seed, t);
        let events = match cfg.traffic.mode {
            QueueMode::Packets => {
                let mu_tau: Vec<f64> = alloc
                    .rates
                    .iter()
                    .zip(&mu_cap)
                    .map(|(r, cap)| (sc.kappa * r).min(*cap))
                    .collect();
                let uniforms = departure_uniforms(num_users, seed, t);
                let events = step_queue_packets(&mut queues, &mu_tau, &lambda_tau, &arrivals, &uniforms)
                    .map_err(|e| e.at_slot(t))?;
                if let Policy::Proposed(state) = &mut policy {
                    learn(state, &sc, &decision, &q0, &queues.q, &mu_tau, t).map_err(|e| e.at_slot(t))?;
                    if state.store.tables.iter().flatten().any(|tb| tb.values[0] != 0.0) {
                        metrics.reference_violation();
                    }
                }
                events
            }
            QueueMode::Bits => {
                let served: Vec<f64> = alloc.rates.iter().map(|r| r * bits_per_rate).collect();
                step_queue_bits(&mut queues, &served, &arrivals)
            }
        };
        let label = match decision.pattern_id {
            Some(id) => id.to_string(),
            None => format!("{:?}", alloc.pattern.clusters),
        };
        let gamma = gamma_of(&policy);
        metrics.record(
            t,
            &q0,
            &events,
            &alloc.rates,
            &alloc.bs_power,
            label,
            decision.game,
            matches!(policy, Policy::Proposed(_)).then_some(gamma.as_slice()),
        );
        if opts.slots {
            slots.push(SlotRecord {
                slot: t,
                skipped: false,
                pattern_id: decision.pattern_id,
                num_clusters: alloc.pattern.clusters.len(),
                game: decision.game,
                queues: q0,
                bs_power: alloc.bs_power.clone(),
                gamma,
                drops: events.iter().map(|e| e.dropped).sum(),
            });
        }
        if let Policy::Proposed(state) = &policy {
            if opts.snapshot_every > 0 && (t + 1) % opts.snapshot_every == 0 {
                snapshot(&state.store, t + 1, &mut potentials);
            }
        }
    }

    let summary = metrics.finish(
        cfg.scheme.kind.name(),
        seed,
        cfg.hash(),
        cfg.traffic.slot_seconds,
    );
    let proposed = match policy {
        Policy::Proposed(state) => Some(*state),
        _ => None,
    };
    Ok(EpisodeResult {
        summary,
        slots,
        potentials,
        proposed,
        scenario: sc,
    })
}

fn gamma_of(policy: &Policy) -> Vec<f64> {
    match policy {
        Policy::Proposed(state) => state.lm.gamma.clone(),
        _ => Vec::new(),
    }
}

fn snapshot(store: &PotentialStore, slot: u64, out: &mut Vec<PotentialSample>) {
    for (cluster, tables) in store.tables.iter().enumerate() {
        for t in tables {
            for (q, &value) in t.values.iter().enumerate() {
                out.push(PotentialSample {
                    slot,
                    cluster,
                    user: t.user,
                    q,
                    value,
                });
            }
        }
    }
}

/// Potential updates of every active (cluster, user) pair, then the
/// multiplier step.
fn learn(
    state: &mut ProposedState,
    sc: &Scenario,
    decision: &Decision,
    before: &[u64],
    after: &[u64],
    mu_tau: &[f64],
    slot: u64,
) -> Result<()> {
    let cfg = &sc.config;
    let pid = decision.pattern_id.expect("proposed decisions carry a pattern id");
    for (local, &n) in sc.catalog.pattern_clusters[pid].iter().enumerate() {
        for &b in &decision.alloc.pattern.clusters[local] {
            for u in sc.topology.users_of(b) {
                let f = cfg.cost.utility.eval(before[u], sc.traffic.arrival_prob(u));
                let obs = LearningObservation {
                    cluster: n,
                    user: u,
                    queue: before[u],
                    cost: cfg.cost.beta * f + decision.alloc.p[u] * decision.prices[u],
                    mu_tau: mu_tau[u],
                    arrived: after[u] == before[u] + 1,
                };
                update_potential(&mut state.store, &obs, &state.schedule)?;
            }
        }
    }
    let eps = state.schedule.multiplier_step(slot);
    update_lm(&mut state.lm, &decision.alloc.bs_power, &sc.budgets, eps);
    Ok(())
}

/// Learned tables and multipliers of a proposed-scheme episode.
#[derive(Debug, Clone)]
pub struct LearningRun {
    pub store: PotentialStore,
    pub lm: LagrangeMultipliers,
    pub summary: Summary,
    pub slots: Vec<SlotRecord>,
    pub potentials: Vec<PotentialSample>,
}

/// Runs the proposed scheme and returns its learned state and traces.
pub fn run_learning_episode(config: &SimConfig, opts: TraceOptions) -> Result<LearningRun> {
    if config.scheme.kind != Scheme::Proposed {
        return Err(Error::config("learning episodes need scheme.kind = \"proposed\""));
    }
    let r = run_episode_with(config, opts)?;
    let state = r.proposed.expect("proposed scheme keeps its state");
    Ok(LearningRun {
        store: state.store,
        lm: state.lm,
        summary: r.summary,
        slots: r.slots,
        potentials: r.potentials,
    })
}
