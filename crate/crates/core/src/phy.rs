//! Intra-cluster zero-forcing, per-BS power, rates and inter-cluster coupling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelState;
use crate::topology::ClusteringPattern;
use crate::{Error, Result};

/// Gram pivots below this fraction of the largest pivot are treated as a
/// rank-deficient stacked channel.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-10;

/// Zero-forcing precoders of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPrecoder {
    pub bss: Vec<usize>,
    pub users: Vec<usize>,
    pub antennas: usize,
    /// Entry `(j * bss.len() + i) * N_t + a` is antenna `a` of `bss[i]`
    /// in the precoder of `users[j]`.
    pub w: Vec<Complex64>,
}

impl ClusterPrecoder {
    /// Slice of the precoder of local user `j` at local BS `i`.
    pub fn block(&self, j: usize, i: usize) -> &[Complex64] {
        let o = (j * self.bss.len() + i) * self.antennas;
        &self.w[o..o + self.antennas]
    }

    pub fn norm_sqr(&self, j: usize, i: usize) -> f64 {
        self.block(j, i).iter().map(|z| z.norm_sqr()).sum()
    }

    /// Effective scalar gain `sum_b h_{rx,b} w_{users[j],b}` seen by `rx`.
    pub fn gain(&self, channel: &ChannelState, rx: usize, j: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &b) in self.bss.iter().enumerate() {
            acc += dot(channel.link(rx, b), self.block(j, i));
        }
        acc
    }

    /// Transmit power of local BS `i` for received powers `p` of the
    /// cluster's users, in cluster order.
    pub fn bs_power(&self, i: usize, p: &[f64]) -> f64 {
        (0..self.users.len()).map(|j| self.norm_sqr(j, i) * p[j]).sum()
    }
}

#[inline]
fn dot(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    h.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Minimum-norm zero-forcing for the users served by `bss`.
///
/// Users are taken in BS order, `users_per_cell` per BS. The stacked channel
/// must have full row rank.
pub fn zf_cluster(
    channel: &ChannelState,
    bss: &[usize],
    users_per_cell: usize,
) -> Result<ClusterPrecoder> {
    let nt = channel.antennas;
    if users_per_cell > nt {
        return Err(Error::config("zero-forcing needs at least as many antennas as users per cell"));
    }
    let users: Vec<usize> = bss
        .iter()
        .flat_map(|&b| b * users_per_cell..(b + 1) * users_per_cell)
        .collect();
    let m = users.len();
    let n = bss.len() * nt;
    let h = DMatrix::from_fn(m, n, |r, c| channel.link(users[r], bss[c / nt])[c % nt]);
    let singular = || Error::SingularChannel {
        cluster: bss.to_vec(),
    };
    let hh = h.adjoint();
    let gram = &h * &hh;
    let chol = gram.clone().cholesky().ok_or_else(singular)?;
    let pivots: Vec<f64> = (0..m).map(|i| chol.l_dirty()[(i, i)].re.powi(2)).collect();
    let max = pivots.iter().cloned().fold(0.0, f64::max);
    let min = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min < SINGULAR_PIVOT_RATIO * max {
        return Err(singular());
    }
    let eye = DMatrix::<Complex64>::identity(m, m);
    let mut x = chol.solve(&eye);
    let residual = &eye - &gram * &x;
    x += chol.solve(&residual);
    let mut wm = &hh * x;
    for j in 0..m {
        let desired: Complex64 = (0..n).map(|c| h[(j, c)] * wm[(c, j)]).sum();
        let col = DVector::from_iterator(n, wm.column(j).iter().map(|z| z / desired));
        wm.set_column(j, &col);
    }
    let mut w = Vec::with_capacity(m * n);
    for j in 0..m {
        w.extend(wm.column(j).iter().copied());
    }
    Ok(ClusterPrecoder {
        bss: bss.to_vec(),
        users,
        antennas: nt,
        w,
    })
}

/// Zero-forcing precoders for every cluster of a pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub clusters: Vec<ClusterPrecoder>,
    /// `(cluster, local index)` of every user.
    pub position: Vec<(usize, usize)>,
    pub num_cells: usize,
}

impl PrecoderSet {
    pub fn from_clusters(clusters: Vec<ClusterPrecoder>, num_users: usize, num_cells: usize) -> Self {
        let mut position = vec![(usize::MAX, usize::MAX); num_users];
        for (n, c) in clusters.iter().enumerate() {
            for (j, &u) in c.users.iter().enumerate() {
                position[u] = (n, j);
            }
        }
        PrecoderSet {
            clusters,
            position,
            num_cells,
        }
    }

    pub fn num_users(&self) -> usize {
        self.position.len()
    }

    pub fn cluster_of_user(&self, user: usize) -> usize {
        self.position[user].0
    }

    /// `||w_{user, bs}||^2`, zero when `bs` is outside the user's cluster.
    pub fn norm_sqr(&self, user: usize, bs: usize) -> f64 {
        let (n, j) = self.position[user];
        let c = &self.clusters[n];
        c.bss
            .iter()
            .position(|&b| b == bs)
            .map_or(0.0, |i| c.norm_sqr(j, i))
    }

    /// Effective gain from the precoder of `tx` at receiver `rx`.
    pub fn gain(&self, channel: &ChannelState, rx: usize, tx: usize) -> Complex64 {
        let (n, j) = self.position[tx];
        self.clusters[n].gain(channel, rx, j)
    }

    /// `sum_b gamma_b ||w_{user, b}||^2`: the power price of one unit of
    /// received power at `user`.
    pub fn power_price(&self, user: usize, gamma: &[f64]) -> f64 {
        let (n, j) = self.position[user];
        let c = &self.clusters[n];
        c.bss
            .iter()
            .enumerate()
            .map(|(i, &b)| gamma[b] * c.norm_sqr(j, i))
            .sum()
    }
}

/// Zero-forcing within every cluster of `pattern`.
pub fn compute_zf_precoders(
    channel: &ChannelState,
    pattern: &ClusteringPattern,
) -> Result<PrecoderSet> {
    let k = channel.num_users / channel.num_cells;
    let clusters = pattern
        .clusters
        .iter()
        .map(|c| zf_cluster(channel, c, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(PrecoderSet::from_clusters(clusters, channel.num_users, channel.num_cells))
}

/// Per-BS transmit power `P_b = sum ||w_{u,b}||^2 p_u`.
pub fn per_bs_power(precoders: &PrecoderSet, p: &[f64]) -> Vec<f64> {
    let mut power = vec![0.0; precoders.num_cells];
    for c in &precoders.clusters {
        for (j, &u) in c.users.iter().enumerate() {
            for (i, &b) in c.bss.iter().enumerate() {
                power[b] += c.norm_sqr(j, i) * p[u];
            }
        }
    }
    power
}

/// Interference received by every user from the other clusters.
pub fn inter_cluster_interference(
    channel: &ChannelState,
    precoders: &PrecoderSet,
    p: &[f64],
) -> Vec<f64> {
    let num_users = precoders.num_users();
    (0..num_users)
        .map(|rx| {
            let own = precoders.cluster_of_user(rx);
            (0..num_users)
                .filter(|&tx| precoders.cluster_of_user(tx) != own && p[tx] != 0.0)
                .map(|tx| precoders.gain(channel, rx, tx).norm_sqr() * p[tx])
                .sum()
        })
        .collect()
}

/// Spectral efficiency `log2(1 + p / (1 + I))` in bit/s/Hz.
#[inline]
pub fn rate(p: f64, interference: f64) -> f64 {
    (p / (1.0 + interference)).ln_1p() / std::f64::consts::LN_2
}

/// Cross-cluster gain matrix indexed by user.
pub type CouplingMatrix = DMatrix<f64>;

/// `S[rx, tx] = |gain(rx <- tx)|^2` across clusters, zero within a cluster.
pub fn build_coupling_matrix(channel: &ChannelState, precoders: &PrecoderSet) -> CouplingMatrix {
    let n = precoders.num_users();
    DMatrix::from_fn(n, n, |rx, tx| {
        if precoders.cluster_of_user(rx) == precoders.cluster_of_user(tx) {
            0.0
        } else {
            precoders.gain(channel, rx, tx).norm_sqr()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(values: &[(f64, f64)], users: usize, cells: usize, nt: usize) -> ChannelState {
        let mut s = ChannelState::zeros(users, cells, nt, 0);
        for (z, &(re, im)) in s.h.iter_mut().zip(values) {
            *z = Complex64::new(re, im);
        }
        s
    }

    #[test]
    fn scalar_inversion() {
        let ch = channel(&[(0.5, 0.5)], 1, 1, 1);
        let pre = compute_zf_precoders(&ch, &ClusteringPattern::global(1)).unwrap();
        let w = pre.clusters[0].block(0, 0)[0];
        assert!((w - Complex64::new(1.0, -1.0)).norm() < 1e-12);
        assert!((pre.norm_sqr(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_is_singular() {
        let ch = channel(&[(1.0, 0.0), (2.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 2, 2, 1);
        let err = compute_zf_precoders(&ch, &ClusteringPattern::global(2)).unwrap_err();
        assert!(matches!(err, Error::SingularChannel { .. }));
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate(0.0, 0.0), 0.0);
        assert!((rate(3.0, 0.0) - 2.0).abs() < 1e-15);
        assert!((rate(3.0, 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_examples() {
        let ch = channel(&[(2f64.sqrt(), 0.0)], 1, 1, 1);
        let pre = compute_zf_precoders(&ch, &ClusteringPattern::global(1)).unwrap();
        assert!((pre.norm_sqr(0, 0) - 0.5).abs() < 1e-12);
        assert!((per_bs_power(&pre, &[2.0])[0] - 1.0).abs() < 1e-12);
        assert_eq!(per_bs_power(&pre, &[0.0])[0], 0.0);
    }
}
