//! Exact reference solutions on tiny instances by relative value iteration.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::{CsiCodebook, QuantizedCsi};
use crate::control::PotentialStore;
use crate::phy::zf_cluster;
use crate::topology::NetworkTopology;
use crate::{Error, Result};

/// Largest number of (CSI, queue) joint states an instance may have.
pub const STATE_GUARD: u128 = 10_000;
/// Sup-norm tolerance of relative value iteration.
pub const RVI_TOL: f64 = 1e-12;
pub const RVI_MAX_ITER: usize = 100_000;
/// Log-spaced levels of the grid-search cross-check (plus zero).
pub const GRID_LEVELS: usize = 64;

/// Per-user utility `f(Q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Utility {
    /// Little's-law delay in slots, `Q / (lambda tau)`.
    Delay,
    /// Queue outage indicator `1[Q >= threshold]`.
    Outage { threshold: u64 },
}

impl Utility {
    pub fn eval(&self, q: u64, lambda_tau: f64) -> f64 {
        match *self {
            Utility::Delay if lambda_tau > 0.0 => q as f64 / lambda_tau,
            Utility::Delay => q as f64,
            Utility::Outage { threshold } => f64::from(u8::from(q >= threshold)),
        }
    }
}

/// Water-level numerator `kappa dV / ln 2` for service scale `kappa`
/// (packets per slot per bit/s/Hz).
#[inline]
pub fn water_level(kappa: f64, delta_v: f64) -> f64 {
    kappa * delta_v / LN_2
}

/// Minimiser over `p >= 0` of
/// `price p - dV min(kappa log2(1 + p/(1+I)), cap)`, capped at `p_max`.
pub fn closed_form_power(
    kappa: f64,
    delta_v: f64,
    price: f64,
    interference: f64,
    cap: f64,
    p_max: f64,
) -> f64 {
    let level = water_level(kappa, delta_v);
    let wf = if price > 0.0 {
        (level / price - (1.0 + interference)).max(0.0)
    } else if level > 0.0 {
        p_max
    } else {
        0.0
    };
    let saturating = (1.0 + interference) * ((cap / kappa).exp2() - 1.0);
    wf.min(saturating).min(p_max)
}

/// Objective minimised by [`closed_form_power`].
pub fn inner_objective(
    p: f64,
    kappa: f64,
    delta_v: f64,
    price: f64,
    interference: f64,
    cap: f64,
) -> f64 {
    let service = (kappa * (p / (1.0 + interference)).ln_1p() / LN_2).min(cap);
    price * p - delta_v * service
}

/// Zero plus [`GRID_LEVELS`] log-spaced powers ending at `upper`.
pub fn power_grid(upper: f64) -> Vec<f64> {
    let lo = upper * 1e-6;
    let ratio = (upper / lo).powf(1.0 / (GRID_LEVELS - 1) as f64);
    std::iter::once(0.0)
        .chain((0..GRID_LEVELS).map(|i| lo * ratio.powi(i as i32)))
        .collect()
}

/// Index of the grid point minimising `objective`, lowest index on ties.
pub fn grid_argmin(grid: &[f64], objective: impl Fn(f64) -> f64) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, &p) in grid.iter().enumerate() {
        let v = objective(p);
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// One cluster with at most two BSs and two users, quantised CSI and no
/// inter-cluster interference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyInstance {
    pub topology: NetworkTopology,
    pub codebook: CsiCodebook,
    pub capacity: u64,
    pub lambda_tau: Vec<f64>,
    /// Departure probability per unit spectral efficiency.
    pub kappa: Vec<f64>,
    /// Ceiling on the departure probability; `1 - lambda tau` when absent.
    pub service_cap: Option<Vec<f64>>,
    pub beta: Vec<f64>,
    pub utility: Utility,
    pub gamma: Vec<f64>,
    pub budgets: Vec<f64>,
    pub p_max: f64,
}

/// Enumerated CSI states: probability and per-user power price.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiTable {
    pub probabilities: Vec<f64>,
    /// `prices[s][u]`.
    pub prices: Vec<Vec<f64>>,
    /// Probability mass of rank-deficient states, excluded and renormalised.
    pub singular_mass: f64,
}

impl TinyInstance {
    pub fn num_users(&self) -> usize {
        self.topology.num_users()
    }

    pub fn validate(&self) -> Result<()> {
        let u = self.num_users();
        let b = self.topology.num_cells;
        if b > 2 || u > 2 || u == 0 {
            return Err(Error::config("tiny instances have at most two BSs and two users"));
        }
        if self.capacity == 0 || self.capacity > 4 {
            return Err(Error::config("tiny instances need 1 <= N_Q <= 4"));
        }
        for (name, len, want) in [
            ("lambda_tau", self.lambda_tau.len(), u),
            ("kappa", self.kappa.len(), u),
            ("beta", self.beta.len(), u),
            ("gamma", self.gamma.len(), b),
            ("budgets", self.budgets.len(), b),
        ] {
            if len != want {
                return Err(Error::config(format!("{name} has {len} entries, expected {want}")));
            }
        }
        for i in 0..u {
            let cap = self.cap(i);
            if !(self.kappa[i] > 0.0) || self.lambda_tau[i] < 0.0 || cap < 0.0 {
                return Err(Error::config("kappa must be positive and probabilities nonnegative"));
            }
            if self.lambda_tau[i] + cap > 1.0 + 1e-12 {
                return Err(Error::config("arrival plus service probability exceeds one"));
            }
        }
        let states = self.csi_cardinality() * (self.capacity as u128 + 1);
        if states > STATE_GUARD {
            return Err(Error::Guard(format!("{states} per-user states exceed {STATE_GUARD}")));
        }
        Ok(())
    }

    pub fn cap(&self, user: usize) -> f64 {
        match &self.service_cap {
            Some(c) => c[user],
            None => 1.0 - self.lambda_tau[user],
        }
    }

    fn scalars(&self) -> usize {
        self.num_users() * self.topology.num_cells * self.topology.antennas
    }

    pub fn csi_cardinality(&self) -> u128 {
        (self.codebook.len() as u128).pow(2 * self.scalars() as u32)
    }

    /// `-sum_b gamma_b budget_b`, shared equally by the cluster's users.
    pub fn constant_share(&self) -> f64 {
        let total: f64 = self.gamma.iter().zip(&self.budgets).map(|(g, p)| g * p).sum();
        -total / self.num_users() as f64
    }

    /// Enumerates every quantised channel with its probability.
    pub fn csi_table(&self) -> Result<CsiTable> {
        self.validate()?;
        let levels = self.codebook.len();
        let n = 2 * self.scalars();
        let count = levels.pow(n as u32);
        let bss: Vec<usize> = (0..self.topology.num_cells).collect();
        let mut probabilities = Vec::new();
        let mut prices = Vec::new();
        let mut singular_mass = 0.0;
        let mut digits = vec![0usize; n];
        for idx in 0..count {
            let mut rest = idx;
            for d in digits.iter_mut().rev() {
                *d = rest % levels;
                rest /= levels;
            }
            let prob: f64 = digits.iter().map(|&d| self.codebook.probabilities()[d]).product();
            let q = QuantizedCsi {
                indices: digits.chunks(2).map(|c| (c[0], c[1])).collect(),
                levels_per_component: levels,
            };
            let ch = q.reconstruct(&self.topology, &self.codebook, 0);
            match zf_cluster(&ch, &bss, self.topology.users_per_cell) {
                Ok(pre) => {
                    probabilities.push(prob);
                    prices.push(
                        (0..pre.users.len())
                            .map(|j| {
                                (0..bss.len()).map(|i| self.gamma[i] * pre.norm_sqr(j, i)).sum()
                            })
                            .collect(),
                    );
                }
                Err(Error::SingularChannel { .. }) => singular_mass += prob,
                Err(e) => return Err(e),
            }
        }
        let total: f64 = probabilities.iter().sum();
        if !(total > 0.0) {
            return Err(Error::config("every CSI state is singular"));
        }
        for p in probabilities.iter_mut() {
            *p /= total;
        }
        Ok(CsiTable {
            probabilities,
            prices,
            singular_mass,
        })
    }

    /// `(E[price p], E[mu tau])` under the optimal power for increment `dv`.
    fn expected_action(&self, csi: &CsiTable, user: usize, dv: f64) -> (f64, f64) {
        let (kappa, cap) = (self.kappa[user], self.cap(user));
        let mut cost = 0.0;
        let mut service = 0.0;
        for (prob, prices) in csi.probabilities.iter().zip(&csi.prices) {
            let price = prices[user];
            let p = closed_form_power(kappa, dv, price, 0.0, cap, self.p_max);
            cost += prob * price * p;
            service += prob * (kappa * p.ln_1p() / LN_2).min(cap);
        }
        (cost, service)
    }

    fn stage_cost(&self, user: usize, q: u64) -> f64 {
        self.beta[user] * self.utility.eval(q, self.lambda_tau[user]) + self.constant_share()
    }

    /// `H(V)(Q) = (T V)(Q) - V(Q)` of the per-user equation, with the
    /// expected departure probability at each `Q`.
    fn per_user_increment(&self, csi: &CsiTable, user: usize, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.capacity as usize;
        let lt = self.lambda_tau[user];
        let mut h = vec![0.0; n + 1];
        let mut mu = vec![0.0; n + 1];
        for q in 0..=n {
            let dv = if q > 0 { v[q] - v[q - 1] } else { 0.0 };
            let (pc, m) = if q > 0 { self.expected_action(csi, user, dv) } else { (0.0, 0.0) };
            let up = if q < n { lt * (v[q + 1] - v[q]) } else { 0.0 };
            h[q] = self.stage_cost(user, q as u64) + pc - m * dv + up;
            mu[q] = m;
        }
        (h, mu)
    }
}

/// Relative-value-iteration solution of the per-user equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerUserSolution {
    pub user: usize,
    pub values: Vec<f64>,
    pub theta: f64,
    /// Expected departure probability `E[mu tau | Q]` of the optimal policy.
    pub mean_service: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Damped relative value iteration `V <- V + a (H(V) - H(V)(0))`, which
/// keeps `V(0) = 0` and is aperiodic for any birth-death chain.
fn rvi<F>(size: usize, mut increment: F) -> Result<(Vec<f64>, f64, usize)>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    const DAMPING: f64 = 0.5;
    let mut v = vec![0.0; size];
    for it in 1..=RVI_MAX_ITER {
        let h = increment(&v);
        let mut change = 0.0f64;
        for (x, hx) in v.iter_mut().zip(&h) {
            let step = DAMPING * (hx - h[0]);
            *x += step;
            change = change.max(step.abs());
        }
        if change < RVI_TOL {
            let h = increment(&v);
            return Ok((v, h[0], it));
        }
    }
    Err(Error::NoConvergence(format!(
        "relative value iteration exceeded {RVI_MAX_ITER} sweeps"
    )))
}

pub fn per_user_rvi(inst: &TinyInstance, user: usize) -> Result<PerUserSolution> {
    let csi = inst.csi_table()?;
    per_user_rvi_with(inst, &csi, user)
}

fn per_user_rvi_with(inst: &TinyInstance, csi: &CsiTable, user: usize) -> Result<PerUserSolution> {
    if user >= inst.num_users() {
        return Err(Error::config(format!("user {user} is not in the instance")));
    }
    let n = inst.capacity as usize + 1;
    let (values, theta, iterations) = rvi(n, |v| inst.per_user_increment(csi, user, v).0)?;
    let (h, mean_service) = inst.per_user_increment(csi, user, &values);
    let residual = h.iter().map(|x| (x - theta).abs()).fold(0.0, f64::max);
    Ok(PerUserSolution {
        user,
        values,
        theta,
        mean_service,
        residual,
        iterations,
    })
}

/// Solution over joint queue states, indexed mixed-radix with user 0 most
/// significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSolution {
    pub values: Vec<f64>,
    pub theta: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Queue vector of joint index `idx`.
pub fn joint_state(idx: usize, users: usize, capacity: u64) -> Vec<u64> {
    let base = capacity as usize + 1;
    let mut q = vec![0u64; users];
    let mut rest = idx;
    for x in q.iter_mut().rev() {
        *x = (rest % base) as u64;
        rest /= base;
    }
    q
}

fn joint_increment(inst: &TinyInstance, csi: &CsiTable, v: &[f64]) -> Vec<f64> {
    let users = inst.num_users();
    let n = inst.capacity;
    let base = n as usize + 1;
    let strides: Vec<usize> = (0..users).map(|u| base.pow((users - 1 - u) as u32)).collect();
    (0..v.len())
        .map(|idx| {
            let q = joint_state(idx, users, n);
            let mut h = 0.0;
            for u in 0..users {
                h += inst.stage_cost(u, q[u]);
                if q[u] > 0 {
                    let dv = v[idx] - v[idx - strides[u]];
                    let (pc, m) = inst.expected_action(csi, u, dv);
                    h += pc - m * dv;
                }
                if q[u] < n {
                    h += inst.lambda_tau[u] * (v[idx + strides[u]] - v[idx]);
                }
            }
            h
        })
        .collect()
}

/// Relative value iteration over joint queue states. The joint chain moves
/// at most one queue per slot.
pub fn joint_rvi(inst: &TinyInstance) -> Result<JointSolution> {
    let csi = inst.csi_table()?;
    let users = inst.num_users();
    let total: f64 = (0..users).map(|u| inst.lambda_tau[u] + inst.cap(u)).sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::config(
            "joint arrival and service probabilities exceed one; set service_cap",
        ));
    }
    let size = (inst.capacity as usize + 1).pow(users as u32);
    let joint_states = inst.csi_cardinality() * size as u128;
    if joint_states > STATE_GUARD {
        return Err(Error::Guard(format!(
            "{joint_states} joint states exceed {STATE_GUARD}"
        )));
    }
    let (values, theta, iterations) = rvi(size, |v| joint_increment(inst, &csi, v))?;
    let h = joint_increment(inst, &csi, &values);
    let residual = h.iter().map(|x| (x - theta).abs()).fold(0.0, f64::max);
    Ok(JointSolution {
        values,
        theta,
        residual,
        iterations,
    })
}

/// Residual `(T V)(Q) - V(Q) - theta` of the per-user equation for every
/// user of the instance, using the store's tables of the instance's cluster
/// and `theta = (T V)(0)`. Returned as `residuals[user][Q]`.
pub fn bellman_residual(store: &PotentialStore, inst: &TinyInstance) -> Result<Vec<Vec<f64>>> {
    let csi = inst.csi_table()?;
    let cluster_bss: Vec<usize> = (0..inst.topology.num_cells).collect();
    let cluster = store
        .clusters
        .iter()
        .position(|c| *c == cluster_bss)
        .ok_or_else(|| Error::config("store has no table for the instance cluster"))?;
    (0..inst.num_users())
        .map(|u| {
            let v: Vec<f64> = (0..=inst.capacity)
                .map(|q| store.lookup(cluster, u, q))
                .collect::<Result<_>>()?;
            let (h, _) = inst.per_user_increment(&csi, u, &v);
            Ok(h.iter().map(|x| x - h[0]).collect())
        })
        .collect()
}

/// Worst gap between the closed-form power and the grid-search bracket on
/// every (user, Q, CSI) triple of the optimal per-user policies. Zero means
/// every closed-form power lies between the neighbours of the grid argmin.
pub fn grid_check(inst: &TinyInstance, solutions: &[PerUserSolution]) -> Result<usize> {
    let csi = inst.csi_table()?;
    let mut violations = 0;
    for sol in solutions {
        let u = sol.user;
        for q in 1..sol.values.len() {
            let dv = sol.values[q] - sol.values[q - 1];
            for prices in &csi.prices {
                if !closed_form_in_grid_bracket(inst.kappa[u], dv, prices[u], 0.0, inst.cap(u), inst.p_max) {
                    violations += 1;
                }
            }
        }
    }
    Ok(violations)
}

/// True when the closed-form minimiser lies within one grid step of the
/// grid-search minimiser.
pub fn closed_form_in_grid_bracket(
    kappa: f64,
    dv: f64,
    price: f64,
    interference: f64,
    cap: f64,
    p_max: f64,
) -> bool {
    let p = closed_form_power(kappa, dv, price, interference, cap, p_max);
    let upper = if price > 0.0 {
        (water_level(kappa, dv) / price).clamp(1e-9, p_max)
    } else {
        p_max
    };
    let grid = power_grid(upper.max(p));
    let i = grid_argmin(&grid, |x| inner_objective(x, kappa, dv, price, interference, cap));
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let slack = 1e-12 * hi.max(1.0);
    p >= lo - slack && p <= hi + slack
}

/// Everything the `oracle` command reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub users: Vec<PerUserSolution>,
    pub joint: Option<JointSolution>,
    pub theta_sum: f64,
    pub max_residual: f64,
    pub max_decomposition_gap: Option<f64>,
    pub grid_violations: usize,
    pub singular_mass: f64,
}

/// Solves every per-user equation and, when the joint kernel is valid, the
/// joint equation as well.
pub fn solve(inst: &TinyInstance) -> Result<OracleReport> {
    let csi = inst.csi_table()?;
    let users = (0..inst.num_users())
        .map(|u| per_user_rvi_with(inst, &csi, u))
        .collect::<Result<Vec<_>>>()?;
    let joint = match joint_rvi(inst) {
        Ok(j) => Some(j),
        Err(Error::Config(_)) | Err(Error::Guard(_)) => None,
        Err(e) => return Err(e),
    };
    let max_decomposition_gap = joint.as_ref().map(|j| decomposition_gap(inst, &users, j));
    let max_residual = users
        .iter()
        .map(|s| s.residual)
        .chain(joint.iter().map(|j| j.residual))
        .fold(0.0, f64::max);
    Ok(OracleReport {
        theta_sum: users.iter().map(|s| s.theta).sum(),
        grid_violations: grid_check(inst, &users)?,
        users,
        joint,
        max_residual,
        max_decomposition_gap,
        singular_mass: csi.singular_mass,
    })
}

/// `max_Q |V_joint(Q) - sum_u V_u(Q_u)|`.
pub fn decomposition_gap(inst: &TinyInstance, users: &[PerUserSolution], joint: &JointSolution) -> f64 {
    (0..joint.values.len())
        .map(|idx| {
            let q = joint_state(idx, inst.num_users(), inst.capacity);
            let sum: f64 = users.iter().map(|s| s.values[q[s.user] as usize]).sum();
            (joint.values[idx] - sum).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utility_values() {
        assert_eq!(Utility::Delay.eval(3, 0.5), 6.0);
        assert_eq!(Utility::Outage { threshold: 2 }.eval(1, 0.1), 0.0);
        assert_eq!(Utility::Outage { threshold: 2 }.eval(2, 0.1), 1.0);
    }

    #[test]
    fn closed_form_examples() {
        let level = water_level(LN_2, 3.0);
        assert!((level - 3.0).abs() < 1e-12);
        assert!((closed_form_power(LN_2, 3.0, 1.0, 1.0, 10.0, 1e6) - 1.0).abs() < 1e-12);
        assert_eq!(closed_form_power(1.0, 0.0, 1.0, 0.0, 1.0, 1e6), 0.0);
        assert!((closed_form_power(1.0, 1e3, 1.0, 0.0, 1.0, 1e6) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_has_zero_and_levels() {
        let g = power_grid(10.0);
        assert_eq!(g.len(), GRID_LEVELS + 1);
        assert_eq!(g[0], 0.0);
        assert!((g[GRID_LEVELS] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn joint_state_digits() {
        assert_eq!(joint_state(7, 2, 4), vec![1, 2]);
    }
}
