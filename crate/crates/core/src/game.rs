//! Queue-aware interference game between clusters: water-filling best
//! responses, simultaneous iteration and contraction diagnostics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::phy::CouplingMatrix;
use crate::{Error, Result};

/// Default numerical ceiling on any received power.
pub const DEFAULT_P_MAX: f64 = 1e6;

/// Data of one per-slot game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    /// Water-level numerators, one per user.
    pub numerators: Vec<f64>,
    /// Power prices `sum_b gamma_b ||w_{u,b}||^2`.
    pub prices: Vec<f64>,
    pub coupling: CouplingMatrix,
    /// Positive weights of the max norm.
    pub weights: Vec<f64>,
    pub p_max: f64,
    /// Optional per-user ceiling on spectral efficiency. A user never
    /// receives more power than needed to reach it at the current
    /// interference.
    pub rate_caps: Option<Vec<f64>>,
}

impl GameInstance {
    pub fn new(numerators: Vec<f64>, prices: Vec<f64>, coupling: CouplingMatrix) -> Self {
        let n = numerators.len();
        GameInstance {
            numerators,
            prices,
            coupling,
            weights: vec![1.0; n],
            p_max: DEFAULT_P_MAX,
            rate_caps: None,
        }
    }

    pub fn num_users(&self) -> usize {
        self.numerators.len()
    }

    /// Interference `S p` at every user.
    pub fn interference(&self, p: &[f64]) -> Vec<f64> {
        let n = self.num_users();
        (0..n)
            .map(|r| (0..n).map(|c| self.coupling[(r, c)] * p[c]).sum())
            .collect()
    }

    fn response(&self, u: usize, interference: f64) -> std::result::Result<f64, ()> {
        let (num, price) = (self.numerators[u], self.prices[u]);
        let ceiling = self
            .rate_caps
            .as_ref()
            .map(|caps| (1.0 + interference) * (caps[u].exp2() - 1.0));
        let p = if price > 0.0 {
            (num / price - (1.0 + interference)).max(0.0)
        } else if num > 0.0 {
            ceiling.ok_or(())?
        } else {
            0.0
        };
        Ok(ceiling.map_or(p, |c| p.min(c)).min(self.p_max))
    }
}

/// Closed-form best response `(num / price - (1 + I))^+`, capped.
///
/// A user whose clusters all price power at zero while its water level is
/// positive receives its rate-cap power, or `p_max` with a logged warning
/// when the instance has no rate caps.
pub fn waterfill_best_response(instance: &GameInstance, p_others: &[f64]) -> Vec<f64> {
    let interference = instance.interference(p_others);
    (0..instance.num_users())
        .map(|u| {
            instance.response(u, interference[u]).unwrap_or_else(|_| {
                log::warn!("user {u}: zero power price, allocating the power ceiling");
                instance.p_max
            })
        })
        .collect()
}

/// Like [`waterfill_best_response`] but refuses degenerate prices.
pub fn waterfill_strict(instance: &GameInstance, p_others: &[f64]) -> Result<Vec<f64>> {
    let interference = instance.interference(p_others);
    (0..instance.num_users())
        .map(|u| {
            instance
                .response(u, interference[u])
                .map_err(|_| Error::DegenerateMultiplier { user: u })
        })
        .collect()
}

/// Weighted max norm `max_i |x_i| / u_i`.
pub fn weighted_sup(x: &[f64], weights: &[f64]) -> f64 {
    x.iter()
        .zip(weights)
        .map(|(v, w)| v.abs() / w)
        .fold(0.0, f64::max)
}

/// Induced matrix norm `max_r (1/u_r) sum_c S[r,c] u_c`.
pub fn weighted_max_norm(s: &DMatrix<f64>, weights: &[f64]) -> f64 {
    (0..s.nrows())
        .map(|r| {
            let row: f64 = (0..s.ncols()).map(|c| s[(r, c)].abs() * weights[c]).sum();
            row / weights[r]
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub alpha: f64,
    pub satisfied: bool,
}

/// Sufficient condition for the simultaneous iteration to contract.
pub fn contraction_report(instance: &GameInstance) -> ContractionReport {
    let alpha = weighted_max_norm(&instance.coupling, &instance.weights);
    ContractionReport {
        alpha,
        satisfied: alpha < 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsiwfaOutcome {
    /// Last iterate `p^nu` whose update moved less than the tolerance
    /// (or the final iterate on failure).
    pub p: Vec<f64>,
    /// Index `nu` of the returned iterate.
    pub iterations: usize,
    pub converged: bool,
    /// Weighted sup norm of every update `p^{nu+1} - p^nu`.
    pub step_norms: Vec<f64>,
}

/// Simultaneous iterative water-filling `p^{nu+1} = WF(p^nu)`.
pub fn qsiwfa(instance: &GameInstance, p_init: &[f64], tol: f64, max_iter: usize) -> QsiwfaOutcome {
    let mut p = p_init.to_vec();
    let mut step_norms = Vec::new();
    for nu in 0..max_iter {
        let next = waterfill_best_response(instance, &p);
        let diff: Vec<f64> = next.iter().zip(&p).map(|(a, b)| a - b).collect();
        let step = weighted_sup(&diff, &instance.weights);
        step_norms.push(step);
        if step < tol {
            return QsiwfaOutcome {
                p,
                iterations: nu,
                converged: true,
                step_norms,
            };
        }
        p = next;
    }
    QsiwfaOutcome {
        p,
        iterations: max_iter,
        converged: false,
        step_norms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(num: Vec<f64>, price: Vec<f64>, s: DMatrix<f64>) -> GameInstance {
        GameInstance::new(num, price, s)
    }

    #[test]
    fn best_response_examples() {
        let g = instance(vec![0.0, 3.0, 3.0], vec![1.0; 3], DMatrix::zeros(3, 3));
        let p = waterfill_best_response(&g, &[0.0; 3]);
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 2.0).abs() < 1e-15);
        let mut s = DMatrix::zeros(2, 2);
        s[(0, 1)] = 1.0;
        s[(1, 0)] = 1e9;
        let g = instance(vec![3.0, 3.0], vec![1.0, 1.0], s);
        let p = waterfill_best_response(&g, &[1.0, 1.0]);
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn degenerate_price() {
        let g = instance(vec![1.0], vec![0.0], DMatrix::zeros(1, 1));
        assert_eq!(waterfill_best_response(&g, &[0.0]), vec![DEFAULT_P_MAX]);
        assert!(matches!(
            waterfill_strict(&g, &[0.0]),
            Err(Error::DegenerateMultiplier { user: 0 })
        ));
    }

    #[test]
    fn rate_cap_limits_power() {
        let mut g = instance(vec![100.0], vec![1.0], DMatrix::zeros(1, 1));
        g.rate_caps = Some(vec![2.0]);
        assert!((waterfill_best_response(&g, &[0.0])[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn uncoupled_game_converges_in_one_round() {
        let g = instance(vec![4.0, 0.5, 9.0], vec![1.0, 1.0, 2.0], DMatrix::zeros(3, 3));
        let out = qsiwfa(&g, &[0.0; 3], 1e-8, 200);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.p, vec![3.0, 0.0, 3.5]);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(weighted_max_norm(&DMatrix::zeros(3, 3), &[1.0; 3]), 0.0);
        let mut s = DMatrix::zeros(2, 2);
        s[(0, 1)] = 0.5;
        assert_eq!(weighted_max_norm(&s, &[1.0, 1.0]), 0.5);
        let w = [0.3, 2.0];
        let scaled = [3.0, 20.0];
        assert!((weighted_max_norm(&s, &w) - weighted_max_norm(&s, &scaled)).abs() < 1e-15);
    }
}
