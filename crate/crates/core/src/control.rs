//! Compact potential tables, clustering-pattern selection and Lagrange
//! multipliers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::topology::PatternCatalog;
use crate::{Error, Result};

/// Learned values of one (cluster, user) pair on the compact grid, plus the
/// bookkeeping its online update needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTable {
    pub user: usize,
    pub values: Vec<f64>,
    pub visits: Vec<u64>,
    /// Mean cost observed at reference-state visits.
    pub ref_cost: f64,
    /// Fraction of reference-state visits followed by an arrival.
    pub ref_arrival: f64,
}

/// Per-cluster per-user compact potentials `V~_{n,u}(q)`, `q = 0..=l_q`.
///
/// The full-resolution potential is recovered by linear interpolation
/// between anchors `q d`. Queue values beyond `l_q d` (when `d` does not
/// divide `N_Q`) extend the last segment linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialStore {
    pub capacity: u64,
    pub resolution: u64,
    /// BS set of every registry cluster.
    pub clusters: Vec<Vec<usize>>,
    /// `tables[n]` holds one table per user of cluster `n`, in BS order.
    pub tables: Vec<Vec<PotentialTable>>,
}

impl PotentialStore {
    /// Zero-initialised tables for every cluster of the catalog.
    pub fn new(
        catalog: &PatternCatalog,
        users_per_cell: usize,
        capacity: u64,
        resolution: u64,
    ) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("queue capacity must be at least 1"));
        }
        if resolution == 0 || resolution > capacity {
            return Err(Error::config(format!(
                "resolution {resolution} must lie in 1..={capacity}"
            )));
        }
        let lq = (capacity / resolution) as usize;
        let tables = catalog
            .clusters
            .iter()
            .map(|c| {
                c.iter()
                    .flat_map(|&b| b * users_per_cell..(b + 1) * users_per_cell)
                    .map(|user| PotentialTable {
                        user,
                        values: vec![0.0; lq + 1],
                        visits: vec![0; lq + 1],
                        ref_cost: 0.0,
                        ref_arrival: 0.0,
                    })
                    .collect()
            })
            .collect();
        Ok(PotentialStore {
            capacity,
            resolution,
            clusters: catalog.clusters.clone(),
            tables,
        })
    }

    /// Number of compact anchors minus one.
    pub fn lq(&self) -> usize {
        (self.capacity / self.resolution) as usize
    }

    pub fn local_index(&self, cluster: usize, user: usize) -> Option<usize> {
        self.tables[cluster].iter().position(|t| t.user == user)
    }

    pub fn table(&self, cluster: usize, user: usize) -> Result<&PotentialTable> {
        self.tables
            .get(cluster)
            .and_then(|ts| ts.iter().find(|t| t.user == user))
            .ok_or_else(|| Error::config(format!("no table for cluster {cluster}, user {user}")))
    }

    /// Interpolated potential `V_{n,u}(Q)`.
    pub fn lookup(&self, cluster: usize, user: usize, q: u64) -> Result<f64> {
        if q > self.capacity {
            return Err(Error::contract(format!("queue value {q} exceeds {}", self.capacity)));
        }
        Ok(interpolate(&self.table(cluster, user)?.values, self.resolution, q))
    }

    /// `V(Q) - V((Q-1)^+)`.
    pub fn delta(&self, cluster: usize, user: usize, q: u64) -> Result<f64> {
        if q == 0 {
            return Ok(0.0);
        }
        Ok(self.lookup(cluster, user, q)? - self.lookup(cluster, user, q - 1)?)
    }

    /// Sum of potentials of all users in `cluster` at queue state `queues`.
    pub fn cluster_value(&self, cluster: usize, queues: &[u64]) -> Result<f64> {
        let ts = self
            .tables
            .get(cluster)
            .ok_or_else(|| Error::config(format!("no tables for cluster {cluster}")))?;
        Ok(ts
            .iter()
            .map(|t| interpolate(&t.values, self.resolution, queues[t.user]))
            .sum())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Piecewise-linear read-out of a compact table at full-resolution state `q`.
pub fn interpolate(values: &[f64], d: u64, q: u64) -> f64 {
    let lq = values.len() - 1;
    let (a, l) = ((q / d) as usize, (q % d) as f64 / d as f64);
    if l == 0.0 {
        values[a.min(lq)]
    } else if a < lq {
        values[a] + l * (values[a + 1] - values[a])
    } else {
        values[lq] + l * (values[lq] - values[lq - 1])
    }
}

/// The `(N_Q + 1) x (l_q + 1)` matrix with `V = M V~`.
pub fn interpolation_matrix(capacity: u64, d: u64) -> DMatrix<f64> {
    let lq = (capacity / d) as usize;
    let mut m = DMatrix::zeros(capacity as usize + 1, lq + 1);
    for q in 0..=capacity {
        let mut e = vec![0.0; lq + 1];
        for (j, ej) in e.iter_mut().enumerate() {
            let mut unit = vec![0.0; lq + 1];
            unit[j] = 1.0;
            *ej = interpolate(&unit, d, q);
        }
        for (j, v) in e.into_iter().enumerate() {
            m[(q as usize, j)] = v;
        }
    }
    m
}

/// The `(l_q + 1) x (N_Q + 1)` anchor-selection matrix with `V~ = M' V`.
pub fn anchor_matrix(capacity: u64, d: u64) -> DMatrix<f64> {
    let lq = (capacity / d) as usize;
    let mut m = DMatrix::zeros(lq + 1, capacity as usize + 1);
    for q in 0..=lq {
        m[(q, q * d as usize)] = 1.0;
    }
    m
}

/// Pattern minimising the sum of per-cluster potentials; ties go to the
/// lowest pattern id.
pub fn select_pattern(store: &PotentialStore, catalog: &PatternCatalog, queues: &[u64]) -> Result<usize> {
    if store.clusters != catalog.clusters {
        return Err(Error::config("potential store does not match the pattern catalog"));
    }
    let cluster_values = (0..catalog.clusters.len())
        .map(|n| store.cluster_value(n, queues))
        .collect::<Result<Vec<_>>>()?;
    let mut best = (0, f64::INFINITY);
    for (id, members) in catalog.pattern_clusters.iter().enumerate() {
        let v: f64 = members.iter().map(|&n| cluster_values[n]).sum();
        if v < best.1 {
            best = (id, v);
        }
    }
    Ok(best.0)
}

/// Projection onto `[0, bound]`.
#[inline]
pub fn project_lm(gamma: f64, bound: f64) -> f64 {
    gamma.clamp(0.0, bound)
}

/// Per-BS prices on transmit power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeMultipliers {
    pub gamma: Vec<f64>,
    pub bound: f64,
}

impl LagrangeMultipliers {
    pub fn new(num_cells: usize, initial: f64, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::config("multiplier bound must be positive"));
        }
        Ok(LagrangeMultipliers {
            gamma: vec![project_lm(initial, bound); num_cells],
            bound,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_examples() {
        let v = [0.0, 3.0, 6.0, 9.0];
        assert!((interpolate(&v, 3, 4) - 4.0).abs() < 1e-12);
        assert_eq!(interpolate(&v, 3, 6), 6.0);
        let delta = interpolate(&v, 3, 4) - interpolate(&v, 3, 3);
        assert!((delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extrapolates_past_last_anchor() {
        let v = [0.0, 2.0, 5.0];
        assert!((interpolate(&v, 3, 7) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn unit_resolution_matrices_are_identity() {
        let m = interpolation_matrix(5, 1);
        let a = anchor_matrix(5, 1);
        assert_eq!(m, DMatrix::identity(6, 6));
        assert_eq!(a, DMatrix::identity(6, 6));
    }

    #[test]
    fn matrices_compose_on_anchors() {
        for (cap, d) in [(9, 3), (10, 3), (7, 2), (4, 4)] {
            let m = interpolation_matrix(cap, d);
            let a = anchor_matrix(cap, d);
            let prod = &a * &m;
            assert_eq!(prod, DMatrix::identity(prod.nrows(), prod.ncols()));
            for r in 0..m.nrows() {
                assert!((m.row(r).sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection() {
        assert_eq!(project_lm(-0.2, 100.0), 0.0);
        assert_eq!(project_lm(0.5, 100.0), 0.5);
        assert_eq!(project_lm(150.0, 100.0), 100.0);
    }
}
