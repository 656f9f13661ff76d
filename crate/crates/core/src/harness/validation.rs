//! Acceptance checks. Each check returns a [`CriterionReport`]; the
//! `validate` command and the acceptance test target run them all.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channel, CsiCodebook};
use crate::game::{contraction_report, qsiwfa, waterfill_best_response, weighted_sup, GameInstance};
use crate::oracle::{closed_form_in_grid_bracket, decomposition_gap, joint_rvi, per_user_rvi, TinyInstance, Utility};
use crate::phy::zf_cluster;
use crate::queueing::{birth_death_kernel, departure_uniforms, sample_arrivals, step_queue_packets, QueueMode, QueueState, TrafficConfig};
use crate::rng::{substream, Stream};
use crate::topology::NetworkTopology;
use crate::{Error, Result};

use super::config::{Scheme, SimConfig};
use super::engine::{run_episode, run_episode_with, run_learning_episode, TraceOptions};
use super::output::write_episode;
use super::sweep::{run_sweep, SweepResult};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} [{}] ({:.1}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn report(id: u32, name: &str, start: Instant, passed: bool, detail: String) -> CriterionReport {
    CriterionReport {
        id,
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn rng(seed: u64, id: u64) -> ChaCha8Rng {
    substream(seed, Stream::Validation, id)
}

fn all_neighbors(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|a| (0..n).filter(|&b| b != a).collect()).collect()
}

/// Zero-forcing on random clusters of up to three BSs with
/// `K <= N_t <= 4`: unit desired gains and vanishing intra-cluster leakage.
pub fn zf_correctness(draws: usize, seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut r = rng(seed, 1);
    let mut worst_desired = 0.0f64;
    let mut worst_cross = 0.0f64;
    let mut singular = 0;
    let mut done = 0;
    let mut draw = 0u64;
    while done < draws {
        draw += 1;
        let cells = r.random_range(1..=3usize);
        let nt = r.random_range(1..=4usize);
        let k = r.random_range(1..=nt);
        let gains: Vec<Vec<f64>> = (0..cells * k)
            .map(|_| (0..cells).map(|_| 10f64.powf(r.random_range(-1.0..1.0))).collect())
            .collect();
        let topo = NetworkTopology::from_path_gains(k, nt, &gains, all_neighbors(cells))
            .expect("valid random topology");
        let ch = sample_channel(&topo, seed, draw);
        let bss: Vec<usize> = (0..cells).collect();
        let pre = match zf_cluster(&ch, &bss, k) {
            Ok(p) => p,
            Err(_) => {
                singular += 1;
                continue;
            }
        };
        for (i, &rx) in pre.users.iter().enumerate() {
            for j in 0..pre.users.len() {
                let g = pre.gain(&ch, rx, j);
                if i == j {
                    worst_desired = worst_desired.max((g - 1.0).norm());
                } else {
                    worst_cross = worst_cross.max(g.norm());
                }
            }
        }
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst_desired <= 1e-9 && worst_cross <= 1e-9 && secs < 10.0;
    report(
        1,
        "zero-forcing correctness",
        start,
        passed,
        format!(
            "{draws} draws, max |desired - 1| = {worst_desired:.2e}, max cross gain = {worst_cross:.2e}, {singular} singular redraws"
        ),
    )
}

/// Monte-Carlo transition frequencies of the packet queue against the
/// birth-death kernel, from every start state including both boundaries.
pub fn kernel_fidelity(slots: u64, seed: u64) -> CriterionReport {
    let start = Instant::now();
    const CAPACITY: u64 = 3;
    let pairs = [(0.1, 0.3), (0.3, 0.3), (0.5, 0.4), (0.05, 0.9), (0.7, 0.2)];
    let mut worst_z = 0.0f64;
    let mut details = Vec::new();
    for (i, &(lt, mt)) in pairs.iter().enumerate() {
        let run_seed = seed.wrapping_add(i as u64);
        let traffic = TrafficConfig::uniform(1, lt, 1.0, 1.0, QueueMode::Packets);
        let mut counts = [[0u64; 3]; CAPACITY as usize + 1];
        let mut draw = rng(run_seed, 2);
        for t in 0..slots {
            let q = draw.random_range(0..=CAPACITY);
            let mut state = QueueState {
                q: vec![q],
                capacity: CAPACITY,
            };
            let arrivals = sample_arrivals(&traffic, run_seed, t);
            let uniforms = departure_uniforms(1, run_seed, t);
            step_queue_packets(&mut state, &[mt], &[lt], &arrivals, &uniforms).expect("valid probabilities");
            let next = state.q[0];
            let k = if next + 1 == q { 0 } else if next == q { 1 } else { 2 };
            counts[q as usize][k] += 1;
        }
        let mut pair_z = 0.0f64;
        for (q, row) in counts.iter().enumerate() {
            let n: u64 = row.iter().sum();
            let kernel = birth_death_kernel(q as u64, CAPACITY, lt, mt).expect("valid kernel");
            for k in 0..3 {
                let freq = row[k] as f64 / n as f64;
                let sigma = (kernel[k] * (1.0 - kernel[k]) / n as f64).sqrt();
                let z = if sigma > 0.0 {
                    (freq - kernel[k]).abs() / sigma
                } else if freq == kernel[k] {
                    0.0
                } else {
                    f64::INFINITY
                };
                pair_z = pair_z.max(z);
            }
        }
        worst_z = worst_z.max(pair_z);
        details.push(format!("({lt}, {mt}): {pair_z:.2} sigma"));
    }
    report(
        2,
        "queue kernel fidelity",
        start,
        worst_z <= 3.0,
        format!("{slots} slots per pair, worst {worst_z:.2} sigma; {}", details.join(", ")),
    )
}

fn random_game(r: &mut ChaCha8Rng) -> GameInstance {
    let n = r.random_range(2..=6usize);
    let target = r.random_range(0.0..1.0);
    let mut s = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { r.random_range(0.0..1.0) });
    let row_max = (0..n).map(|i| s.row(i).sum()).fold(0.0, f64::max);
    s *= target / row_max;
    let numerators = (0..n).map(|_| r.random_range(0.5..20.0)).collect();
    let prices = (0..n).map(|_| r.random_range(0.1..2.0)).collect();
    GameInstance::new(numerators, prices, s)
}

/// Simultaneous water-filling on random contracting games: per-round decay
/// bounded by the reported modulus, convergence within 200 rounds and a
/// unique fixed point.
pub fn qsiwfa_contraction(instances: usize, seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut r = rng(seed, 3);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_residual = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut max_rounds = 0;
    let mut failures = 0;
    let mut done = 0;
    while done < instances {
        let game = random_game(&mut r);
        let rep = contraction_report(&game);
        if !rep.satisfied {
            continue;
        }
        done += 1;
        let n = game.num_users();
        let a = qsiwfa(&game, &vec![0.0; n], 1e-10, 200);
        let high: Vec<f64> = (0..n).map(|u| game.numerators[u] / game.prices[u]).collect();
        let b = qsiwfa(&game, &high, 1e-10, 200);
        for out in [&a, &b] {
            for w in out.step_norms.windows(2) {
                if w[0] > 1e-9 {
                    worst_excess = worst_excess.max(w[1] / w[0] - rep.alpha);
                }
            }
            let br = waterfill_best_response(&game, &out.p);
            let diff: Vec<f64> = br.iter().zip(&out.p).map(|(x, y)| x - y).collect();
            let res = weighted_sup(&diff, &game.weights);
            worst_residual = worst_residual.max(res);
            max_rounds = max_rounds.max(out.iterations);
            if !(res < 1e-8) {
                failures += 1;
            }
        }
        let gap = a.p.iter().zip(&b.p).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst_gap = worst_gap.max(gap);
    }
    let passed = worst_excess <= 0.05 && failures == 0 && worst_gap <= 2e-8;
    report(
        3,
        "QSIWFA contraction",
        start,
        passed,
        format!(
            "{instances} instances, max(ratio - alpha) = {worst_excess:.3}, max residual = {worst_residual:.2e}, max rounds = {max_rounds}, max init gap = {worst_gap:.2e}"
        ),
    )
}

fn random_tiny(r: &mut ChaCha8Rng) -> TinyInstance {
    let two_cells = r.random_bool(0.5);
    let (k, nt, cells) = if two_cells { (1, 1, 2) } else { (2, 2, 1) };
    let gains: Vec<Vec<f64>> = (0..cells * k)
        .map(|_| (0..cells).map(|_| r.random_range(0.2..3.0)).collect())
        .collect();
    let topology = NetworkTopology::from_path_gains(k, nt, &gains, all_neighbors(cells)).expect("valid tiny topology");
    let users = topology.num_users();
    let utility = if r.random_bool(0.5) {
        Utility::Delay
    } else {
        Utility::Outage {
            threshold: r.random_range(1..=2),
        }
    };
    TinyInstance {
        capacity: r.random_range(1..=3),
        lambda_tau: (0..users).map(|_| r.random_range(0.05..0.2)).collect(),
        kappa: (0..users).map(|_| r.random_range(0.1..1.0)).collect(),
        service_cap: Some((0..users).map(|_| r.random_range(0.1..0.3)).collect()),
        beta: (0..users).map(|_| r.random_range(0.5..2.0)).collect(),
        utility,
        gamma: (0..cells).map(|_| r.random_range(0.1..2.0)).collect(),
        budgets: vec![1.0; cells],
        p_max: 1e6,
        topology,
        codebook: CsiCodebook::binary(),
    }
}

/// Joint relative value iteration against the sum of per-user solutions.
pub fn decomposition(instances: usize, seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut r = rng(seed, 4);
    let mut worst_value = 0.0f64;
    let mut worst_theta = 0.0f64;
    let mut errors = Vec::new();
    for _ in 0..instances {
        let inst = random_tiny(&mut r);
        let solved = (|| -> Result<(f64, f64)> {
            let users = (0..inst.num_users())
                .map(|u| per_user_rvi(&inst, u))
                .collect::<Result<Vec<_>>>()?;
            let joint = joint_rvi(&inst)?;
            let theta: f64 = users.iter().map(|s| s.theta).sum();
            Ok((decomposition_gap(&inst, &users, &joint), (joint.theta - theta).abs()))
        })();
        match solved {
            Ok((v, t)) => {
                worst_value = worst_value.max(v);
                worst_theta = worst_theta.max(t);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let passed = errors.is_empty() && worst_value <= 1e-8 && worst_theta <= 1e-8;
    let mut detail = format!(
        "{instances} instances, max value gap = {worst_value:.2e}, max theta gap = {worst_theta:.2e}"
    );
    if !errors.is_empty() {
        detail += &format!(", errors: {}", errors.join("; "));
    }
    report(4, "value decomposition", start, passed, detail)
}

/// Closed-form inner power minimiser against a 64-point grid search.
pub fn closed_form(tuples: usize, seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut r = rng(seed, 5);
    let mut misses = 0;
    for _ in 0..tuples {
        let dv = 10f64.powf(r.random_range(-2.0..2.0));
        let gamma = 10f64.powf(r.random_range(-2.0..1.0));
        let w = 10f64.powf(r.random_range(-2.0..1.0));
        let interference = r.random_range(0.0..10.0);
        let kappa = r.random_range(0.05..1.0);
        let cap = r.random_range(0.1..1.0);
        if !closed_form_in_grid_bracket(kappa, dv, gamma * w, interference, cap, 1e6) {
            misses += 1;
        }
    }
    report(
        5,
        "closed-form power",
        start,
        misses == 0,
        format!("{tuples} tuples, {misses} outside one grid step"),
    )
}

/// Learns on the tiny configuration and compares the learned potentials with
/// the oracle at the final multipliers (criterion 6), then checks the power
/// constraint and multiplier range of the same run (criterion 7).
pub fn learning_checks(cfg: &SimConfig) -> Vec<CriterionReport> {
    let start = Instant::now();
    let run = match run_learning_episode(cfg, TraceOptions::NONE) {
        Ok(r) => r,
        Err(e) => {
            return vec![
                report(6, "learning versus oracle", start, false, e.to_string()),
                report(7, "multiplier feasibility", start, false, e.to_string()),
            ]
        }
    };
    let learn_secs = start.elapsed().as_secs_f64();
    let oracle = (|| -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let inst = cfg.tiny_instance(&run.lm.gamma)?;
        let cluster = run
            .store
            .clusters
            .iter()
            .position(|c| c.len() == inst.topology.num_cells)
            .ok_or_else(|| Error::config("no cluster spans the tiny instance"))?;
        let mut learned = Vec::new();
        let mut exact = Vec::new();
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for u in 0..inst.num_users() {
            let sol = per_user_rvi(&inst, u)?;
            let v: Vec<f64> = (0..=inst.capacity)
                .map(|q| run.store.lookup(cluster, u, q))
                .collect::<Result<_>>()?;
            for (a, b) in v.iter().zip(&sol.values) {
                diff = diff.max((a - b).abs());
                scale = scale.max(b.abs());
            }
            learned.push(v);
            exact.push(sol.values);
        }
        Ok((diff / scale, learned, exact))
    })();
    let c6 = match oracle {
        Ok((rel, learned, exact)) => {
            let pinned = run.summary.reference_violations == 0;
            let passed = rel <= 0.10 && pinned && learn_secs < 120.0;
            report(
                6,
                "learning versus oracle",
                start,
                passed,
                format!(
                    "{} slots, relative sup-norm error {:.4}, reference violations {}, learned {:?}, oracle {:?}",
                    cfg.run.slots,
                    rel,
                    run.summary.reference_violations,
                    round(&learned),
                    round(&exact)
                ),
            )
        }
        Err(e) => report(6, "learning versus oracle", start, false, e.to_string()),
    };
    let start7 = Instant::now();
    let bound = cfg.learning.gamma_bound;
    let mut worst_power = 0.0f64;
    let mut in_range = true;
    let mut parts = Vec::new();
    for b in &run.summary.bss {
        worst_power = worst_power.max((b.steady_power - 1.0).abs());
        let (lo, hi) = (b.min_gamma.unwrap_or(f64::NAN), b.max_gamma.unwrap_or(f64::NAN));
        in_range &= lo >= 0.0 && hi <= bound;
        parts.push(format!(
            "BS {}: power {:.4}, gamma in [{:.4}, {:.4}], final {:.4}",
            b.bs,
            b.steady_power,
            lo,
            hi,
            b.final_gamma.unwrap_or(f64::NAN)
        ));
    }
    let c7 = report(
        7,
        "multiplier feasibility",
        start7,
        worst_power <= 0.05 && in_range,
        format!("max |power - budget| = {worst_power:.4}; {}", parts.join("; ")),
    );
    vec![c6, c7]
}

fn round(v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    v.iter()
        .map(|r| r.iter().map(|x| (x * 1e4).round() / 1e4).collect())
        .collect()
}

/// Delay-versus-budget sweep of every scheme: nonincreasing delay per
/// scheme and the scheme ordering at every budget, both up to overlapping
/// 95% intervals.
pub fn trend_reproduction(base: &SimConfig, budgets_dbm: &[f64], seeds: &[u64]) -> (CriterionReport, Option<SweepResult>) {
    let start = Instant::now();
    let sweep = match run_sweep(base, "radio.budget_dbm", budgets_dbm, seeds, &Scheme::ALL) {
        Ok(s) => s,
        Err(e) => return (report(8, "delay trends", start, false, e.to_string()), None),
    };
    let (violations, table) = trend_violations(&sweep);
    let secs = start.elapsed().as_secs_f64();
    let passed = violations.is_empty() && secs < 1800.0;
    let mut detail = format!("{} seeds; {table}", seeds.len());
    if !violations.is_empty() {
        detail += &format!("; violations: {}", violations.join(", "));
    }
    (report(8, "delay trends", start, passed, detail), Some(sweep))
}

/// Trend violations that are not covered by overlapping intervals, and a
/// compact table of the aggregates.
pub fn trend_violations(sweep: &SweepResult) -> (Vec<String>, String) {
    let mut violations = Vec::new();
    for &s in &sweep.schemes {
        for w in sweep.values.windows(2) {
            let a = sweep.aggregate(s, w[0]).expect("aggregate");
            let b = sweep.aggregate(s, w[1]).expect("aggregate");
            if b.mean > a.mean && !a.overlaps(b) {
                violations.push(format!("{} rises from {} to {}", s.name(), w[0], w[1]));
            }
        }
    }
    for &v in &sweep.values {
        for pair in Scheme::ALL.windows(2) {
            let (Some(a), Some(b)) = (sweep.aggregate(pair[0], v), sweep.aggregate(pair[1], v)) else {
                continue;
            };
            if a.mean > b.mean && !a.overlaps(b) {
                violations.push(format!("{} above {} at {v}", pair[0].name(), pair[1].name()));
            }
        }
    }
    let table = sweep
        .values
        .iter()
        .map(|&v| {
            let cols: Vec<String> = sweep
                .schemes
                .iter()
                .map(|&s| {
                    let a = sweep.aggregate(s, v).expect("aggregate");
                    format!("{} {:.2}±{:.2}", s.name(), a.mean, a.ci_half_width)
                })
                .collect();
            format!("{v} dBm: {}", cols.join(" "))
        })
        .collect::<Vec<_>>()
        .join(" | ");
    (violations, table)
}

/// Fraction of post-warm-up slots whose game satisfies the contraction
/// condition.
pub fn contraction_fraction(cfg: &SimConfig, threshold: f64) -> CriterionReport {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    cfg.scheme.kind = Scheme::Proposed;
    match run_episode_with(&cfg, TraceOptions::NONE) {
        Ok(r) => {
            let frac = r.summary.contraction_fraction.unwrap_or(0.0);
            report(
                9,
                "contraction fraction",
                start,
                frac >= threshold,
                format!(
                    "placement fraction {}, satisfied in {:.4} of slots (threshold {threshold}), mean alpha {:.4}",
                    cfg.topology.placement_fraction,
                    frac,
                    r.summary.mean_alpha.unwrap_or(f64::NAN)
                ),
            )
        }
        Err(e) => report(9, "contraction fraction", start, false, e.to_string()),
    }
}

fn files_identical(a: &Path, b: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = std::fs::read_dir(a)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut differing = Vec::new();
    for n in &names {
        if std::fs::read(a.join(n))? != std::fs::read(b.join(n)).unwrap_or_default() {
            differing.push(n.clone());
        }
    }
    Ok(differing)
}

/// Two runs of the same configuration write identical files, and the
/// measured sojourn time matches `E[Q] / lambda_eff` within 5%.
pub fn determinism_and_little(cfg: &SimConfig, scratch: &Path) -> CriterionReport {
    let start = Instant::now();
    let outcome = (|| -> Result<(Vec<String>, f64, f64)> {
        let mut results = Vec::new();
        for run in ["a", "b"] {
            let mut c = cfg.clone();
            let dir = scratch.join(run);
            c.output.dir = Some(dir.clone());
            let r = run_episode(&c)?;
            write_episode(&dir, &r)?;
            results.push(r.summary);
        }
        let differing = files_identical(&scratch.join("a"), &scratch.join("b"))?;
        let s = &results[0];
        Ok((differing, s.little_delay_slots, s.sojourn_delay_slots))
    })();
    match outcome {
        Ok((differing, little, sojourn)) => {
            let rel = (sojourn - little).abs() / little;
            report(
                10,
                "determinism and Little's law",
                start,
                differing.is_empty() && rel <= 0.05,
                format!(
                    "differing files {differing:?}; E[Q]/lambda = {little:.4} slots, measured sojourn = {sojourn:.4} slots, relative gap {rel:.4}"
                ),
            )
        }
        Err(e) => report(10, "determinism and Little's law", start, false, e.to_string()),
    }
}

/// Settings of the full acceptance run.
#[derive(Debug, Clone)]
pub struct AcceptancePlan {
    pub seed: u64,
    pub tiny: SimConfig,
    pub desk: SimConfig,
    pub budgets_dbm: Vec<f64>,
    pub trend_seeds: Vec<u64>,
    pub interior_fraction: f64,
    pub contraction_threshold: f64,
}

impl Default for AcceptancePlan {
    fn default() -> Self {
        AcceptancePlan {
            seed: 2024,
            tiny: SimConfig::tiny(),
            desk: SimConfig::desk(),
            budgets_dbm: vec![20.0, 25.0, 30.0, 35.0, 40.0],
            trend_seeds: (1..=10).collect(),
            interior_fraction: 0.5,
            contraction_threshold: 0.9,
        }
    }
}

/// Identifiers of every criterion.
pub const ALL_CRITERIA: [u32; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Runs the criteria `ids` in order, calling `on_report` as each finishes.
/// Criteria 6 and 7 share one learning run.
pub fn run_criteria(
    plan: &AcceptancePlan,
    ids: &[u32],
    scratch: &Path,
    mut on_report: impl FnMut(&CriterionReport),
) -> Vec<CriterionReport> {
    let mut out = Vec::new();
    let mut push = |r: CriterionReport, out: &mut Vec<CriterionReport>| {
        on_report(&r);
        out.push(r);
    };
    let mut learning: Option<Vec<CriterionReport>> = None;
    for &id in ids {
        match id {
            1 => push(zf_correctness(1000, plan.seed), &mut out),
            2 => push(kernel_fidelity(100_000, plan.seed), &mut out),
            3 => push(qsiwfa_contraction(100, plan.seed), &mut out),
            4 => push(decomposition(10, plan.seed), &mut out),
            5 => push(closed_form(1000, plan.seed), &mut out),
            6 | 7 => {
                let reports = learning.get_or_insert_with(|| learning_checks(&plan.tiny));
                let r = reports.iter().find(|r| r.id == id).expect("learning reports").clone();
                push(r, &mut out);
            }
            8 => push(trend_reproduction(&plan.desk, &plan.budgets_dbm, &plan.trend_seeds).0, &mut out),
            9 => {
                let mut interior = plan.desk.clone();
                interior.topology.placement_fraction = plan.interior_fraction;
                push(contraction_fraction(&interior, plan.contraction_threshold), &mut out);
            }
            10 => push(determinism_and_little(&plan.desk, scratch), &mut out),
            other => log::warn!("there is no criterion {other}"),
        }
    }
    out
}
