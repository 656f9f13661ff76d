//! CSI-only comparison schemes: reuse-7 fixed channel assignment, static
//! clustering and greedy dynamic clustering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::phy::{per_bs_power, rate, zf_cluster, ClusterPrecoder, PrecoderSet};
use crate::topology::{ClusteringPattern, NetworkTopology, PatternCatalog};
use crate::{Error, Result};

/// Frequency reuse factor of the fixed channel assignment.
pub const REUSE: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Fca,
    Static,
    Greedy,
}

/// Decisions and outcomes of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotAllocation {
    pub pattern: ClusteringPattern,
    pub precoders: PrecoderSet,
    /// Received power per user.
    pub p: Vec<f64>,
    /// Interference per user, in the units of the rate formula used.
    pub interference: Vec<f64>,
    /// Spectral efficiency per user, normalised to the full band.
    pub rates: Vec<f64>,
    pub bs_power: Vec<f64>,
}

/// Water-filling `p_j = (L / a_j - 1 / scale)^+` with `sum_j a_j p_j = budget`.
pub fn waterfill_sum_power(a: &[f64], budget: f64, scale: f64) -> Vec<f64> {
    let mut floors: Vec<f64> = a.iter().map(|x| x / scale).collect();
    floors.sort_by(|x, y| x.total_cmp(y));
    let mut level = 0.0;
    let mut acc = 0.0;
    for (k, f) in floors.iter().enumerate() {
        acc += f;
        let l = (budget + acc) / (k + 1) as f64;
        if l <= *f {
            break;
        }
        level = l;
    }
    a.iter().map(|x| (level / x - 1.0 / scale).max(0.0)).collect()
}

/// Maximises `sum_u log2(1 + scale p_u)` over the users of one cluster
/// subject to `sum_u ||w_{u,b}||^2 p_u <= budget_b` at every BS of the
/// cluster. `budgets` follows `pre.bss`.
///
/// A single BS is solved by water-filling. Larger clusters use a
/// coordinate-wise dual search on the per-BS prices, followed by a uniform
/// scaling that makes the most loaded BS meet its budget exactly.
pub fn sum_rate_power(pre: &ClusterPrecoder, budgets: &[f64], scale: f64) -> Vec<f64> {
    let m = pre.users.len();
    let nb = pre.bss.len();
    let a: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..nb).map(|i| pre.norm_sqr(j, i)).collect())
        .collect();
    if nb == 1 {
        let col: Vec<f64> = a.iter().map(|r| r[0]).collect();
        return waterfill_sum_power(&col, budgets[0], scale);
    }
    let powers = |nu: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|j| {
                let price: f64 = (0..nb).map(|i| nu[i] * a[j][i]).sum();
                if price > 0.0 {
                    (1.0 / (std::f64::consts::LN_2 * price) - 1.0 / scale).max(0.0)
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    };
    let load = |p: &[f64], i: usize| -> f64 { (0..m).map(|j| a[j][i] * p[j]).sum() };
    let mut nu = vec![1.0; nb];
    for _ in 0..200 {
        let before = nu.clone();
        for i in 0..nb {
            let over = |x: f64, nu: &mut Vec<f64>| {
                nu[i] = x;
                load(&powers(nu), i) > budgets[i]
            };
            let start = before[i];
            if !over(0.0, &mut nu) {
                nu[i] = 0.0;
                continue;
            }
            let (mut lo, mut hi) = if start > 0.0 && over(start, &mut nu) {
                let mut hi = start * 2.0;
                while over(hi, &mut nu) {
                    hi *= 2.0;
                }
                (hi / 2.0, hi)
            } else {
                let mut lo = if start > 0.0 { start / 2.0 } else { 0.5 };
                while !over(lo, &mut nu) && lo > 1e-300 {
                    lo /= 2.0;
                }
                (lo, lo * 2.0)
            };
            while hi / lo > 1.0 + 1e-10 {
                let mid = (lo * hi).sqrt();
                if over(mid, &mut nu) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            nu[i] = hi;
        }
        let change = nu
            .iter()
            .zip(&before)
            .map(|(x, y)| (x - y).abs() / x.abs().max(1e-300))
            .fold(0.0, f64::max);
        if change < 1e-8 {
            break;
        }
    }
    let mut p = powers(&nu);
    for x in p.iter_mut() {
        if !x.is_finite() {
            *x = 0.0;
        }
    }
    let ratio = (0..nb)
        .map(|i| budgets[i] / load(&p, i))
        .fold(f64::INFINITY, f64::min);
    if ratio.is_finite() {
        p.iter_mut().for_each(|x| *x *= ratio);
    }
    p
}

/// Zero-forcing and CSI-only power in every cluster, then rates under the
/// resulting inter-cluster interference.
pub fn static_cluster_allocate(
    channel: &ChannelState,
    pattern: &ClusteringPattern,
    budgets: &[f64],
) -> Result<SlotAllocation> {
    let k = channel.num_users / channel.num_cells;
    let mut cache = ClusterCache::default();
    for c in &pattern.clusters {
        cache.get(channel, c, k, budgets)?;
    }
    Ok(cache.assemble(channel, pattern))
}

/// Proper 7-coloring of the hexagonal lattice; synthetic topologies use the
/// BS index modulo 7.
pub fn fca_colors(topo: &NetworkTopology) -> Vec<usize> {
    match &topo.bs_axial {
        Some(ax) => ax
            .iter()
            .map(|&(q, r)| (q + 3 * r).rem_euclid(REUSE as i32) as usize)
            .collect(),
        None => (0..topo.num_cells).map(|b| b % REUSE).collect(),
    }
}

/// Each BS serves its own users on one seventh of the band with single-cell
/// zero-forcing. Interference comes only from cells of the same color.
pub fn fca_allocate(
    channel: &ChannelState,
    topo: &NetworkTopology,
    budgets: &[f64],
) -> Result<SlotAllocation> {
    let k = topo.users_per_cell;
    let colors = fca_colors(topo);
    let scale = REUSE as f64;
    let clusters = (0..topo.num_cells)
        .map(|b| zf_cluster(channel, &[b], k))
        .collect::<Result<Vec<_>>>()?;
    let mut p = vec![0.0; topo.num_users()];
    for (b, c) in clusters.iter().enumerate() {
        for (j, x) in sum_rate_power(c, &budgets[b..=b], scale).into_iter().enumerate() {
            p[c.users[j]] = x;
        }
    }
    let precoders = PrecoderSet::from_clusters(clusters, topo.num_users(), topo.num_cells);
    let interference: Vec<f64> = (0..topo.num_users())
        .map(|rx| {
            let own = topo.serving_cell(rx);
            (0..topo.num_users())
                .filter(|&tx| {
                    let b = topo.serving_cell(tx);
                    b != own && colors[b] == colors[own]
                })
                .map(|tx| precoders.gain(channel, rx, tx).norm_sqr() * p[tx])
                .sum()
        })
        .collect();
    let rates = p
        .iter()
        .zip(&interference)
        .map(|(&x, &i)| rate(scale * x, scale * i) / scale)
        .collect();
    Ok(SlotAllocation {
        pattern: ClusteringPattern::singletons(topo.num_cells),
        bs_power: per_bs_power(&precoders, &p),
        precoders,
        p,
        interference,
        rates,
    })
}

/// Per-slot memo of cluster precoders, powers and effective gains.
#[derive(Default)]
struct ClusterCache {
    entries: BTreeMap<Vec<usize>, Option<(ClusterPrecoder, Vec<f64>)>>,
}

impl ClusterCache {
    fn get(
        &mut self,
        channel: &ChannelState,
        bss: &[usize],
        k: usize,
        budgets: &[f64],
    ) -> Result<&(ClusterPrecoder, Vec<f64>)> {
        if !self.entries.contains_key(bss) {
            let entry = match zf_cluster(channel, bss, k) {
                Ok(pre) => {
                    let local: Vec<f64> = bss.iter().map(|&b| budgets[b]).collect();
                    let p = sum_rate_power(&pre, &local, 1.0);
                    Some((pre, p))
                }
                Err(Error::SingularChannel { .. }) => None,
                Err(e) => return Err(e),
            };
            self.entries.insert(bss.to_vec(), entry);
        }
        self.entries[bss]
            .as_ref()
            .ok_or_else(|| Error::SingularChannel { cluster: bss.to_vec() })
    }

    fn assemble(&self, channel: &ChannelState, pattern: &ClusteringPattern) -> SlotAllocation {
        let mut p = vec![0.0; channel.num_users];
        let clusters: Vec<ClusterPrecoder> = pattern
            .clusters
            .iter()
            .map(|c| {
                let (pre, pc) = self.entries[c].as_ref().expect("cached cluster");
                for (j, &u) in pre.users.iter().enumerate() {
                    p[u] = pc[j];
                }
                pre.clone()
            })
            .collect();
        let precoders = PrecoderSet::from_clusters(clusters, channel.num_users, channel.num_cells);
        let interference = crate::phy::inter_cluster_interference(channel, &precoders, &p);
        let rates = p.iter().zip(&interference).map(|(&x, &i)| rate(x, i)).collect();
        SlotAllocation {
            pattern: pattern.clone(),
            bs_power: per_bs_power(&precoders, &p),
            precoders,
            p,
            interference,
            rates,
        }
    }
}

fn sum_rate(alloc: &SlotAllocation) -> f64 {
    alloc.rates.iter().sum()
}

/// Starts from singletons and repeatedly applies the merge of two adjacent
/// clusters that most increases the instantaneous sum rate. Merged clusters
/// must appear in the catalog. Ties go to the merge whose union has the
/// lowest BS indices.
pub fn greedy_dynamic_cluster(
    channel: &ChannelState,
    topo: &NetworkTopology,
    catalog: &PatternCatalog,
    budgets: &[f64],
) -> Result<SlotAllocation> {
    let k = topo.users_per_cell;
    let mut cache = ClusterCache::default();
    let mut current = ClusteringPattern::singletons(topo.num_cells);
    for c in &current.clusters {
        cache.get(channel, c, k, budgets)?;
    }
    let mut best_alloc = cache.assemble(channel, &current);
    loop {
        let base = sum_rate(&best_alloc);
        let mut best: Option<(f64, Vec<usize>, ClusteringPattern)> = None;
        let n = current.clusters.len();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&current.clusters[i], &current.clusters[j]);
                if a.len() + b.len() > catalog.max_cluster_size
                    || !a.iter().any(|&x| b.iter().any(|&y| topo.are_neighbors(x, y)))
                {
                    continue;
                }
                let mut union: Vec<usize> = a.iter().chain(b).copied().collect();
                union.sort_unstable();
                if catalog.cluster_id(&union).is_none() {
                    continue;
                }
                match cache.get(channel, &union, k, budgets) {
                    Ok(_) => {}
                    Err(Error::SingularChannel { .. }) => continue,
                    Err(e) => return Err(e),
                }
                let mut clusters: Vec<Vec<usize>> = current
                    .clusters
                    .iter()
                    .enumerate()
                    .filter(|&(x, _)| x != i && x != j)
                    .map(|(_, c)| c.clone())
                    .collect();
                clusters.push(union.clone());
                let candidate = ClusteringPattern::new(clusters);
                let gain = sum_rate(&cache.assemble(channel, &candidate)) - base;
                let better = match &best {
                    None => gain > 0.0,
                    Some((g, u, _)) => gain > *g || (gain == *g && union < *u),
                };
                if better {
                    best = Some((gain, union, candidate));
                }
            }
        }
        match best {
            Some((_, _, pattern)) => {
                best_alloc = cache.assemble(channel, &pattern);
                current = pattern;
            }
            None => break,
        }
    }
    best_alloc.pattern.pattern_id = catalog.find(&best_alloc.pattern);
    Ok(best_alloc)
}
