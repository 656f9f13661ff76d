//! Small-scale fading and discrete CSI.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::rng::{substream_with, Stream};
use crate::topology::NetworkTopology;
use crate::{Error, Result};

/// Channel vectors for every (user, BS) pair in one slot.
///
/// Entry `((u * B) + b) * N_t + i` is antenna `i` of BS `b` towards user `u`,
/// already scaled by the square root of the effective path gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub slot: u64,
    pub num_users: usize,
    pub num_cells: usize,
    pub antennas: usize,
    pub h: Vec<Complex64>,
}

impl ChannelState {
    pub fn zeros(num_users: usize, num_cells: usize, antennas: usize, slot: u64) -> Self {
        ChannelState {
            slot,
            num_users,
            num_cells,
            antennas,
            h: vec![Complex64::new(0.0, 0.0); num_users * num_cells * antennas],
        }
    }

    #[inline]
    fn offset(&self, user: usize, bs: usize) -> usize {
        (user * self.num_cells + bs) * self.antennas
    }

    /// Row vector `h_{u, b}` of length `N_t`.
    #[inline]
    pub fn link(&self, user: usize, bs: usize) -> &[Complex64] {
        let o = self.offset(user, bs);
        &self.h[o..o + self.antennas]
    }

    pub fn link_mut(&mut self, user: usize, bs: usize) -> &mut [Complex64] {
        let o = self.offset(user, bs);
        &mut self.h[o..o + self.antennas]
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Appends one CSV row per scalar entry: `slot,user,bs,antenna,re,im`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        for u in 0..self.num_users {
            for b in 0..self.num_cells {
                for (i, z) in self.link(u, b).iter().enumerate() {
                    writeln!(out, "{},{},{},{},{},{}", self.slot, u, b, i, z.re, z.im)?;
                }
            }
        }
        Ok(())
    }
}

/// Draws a standard circularly-symmetric complex Gaussian.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rayleigh fading for one slot: every entry is `sqrt(sigma) * g`,
/// `g ~ CN(0, 1)`, independent across pairs, antennas and slots.
pub fn sample_channel(topo: &NetworkTopology, seed: u64, slot: u64) -> ChannelState {
    sample_channel_attempt(topo, seed, slot, 0)
}

/// Like [`sample_channel`], with an extra key used to redraw a slot.
pub fn sample_channel_attempt(
    topo: &NetworkTopology,
    seed: u64,
    slot: u64,
    attempt: u64,
) -> ChannelState {
    let mut rng = substream_with(seed, Stream::Channel, slot, attempt);
    let mut state = ChannelState::zeros(topo.num_users(), topo.num_cells, topo.antennas, slot);
    for u in 0..topo.num_users() {
        for b in 0..topo.num_cells {
            let amp = topo.effective_gain(u, b).sqrt();
            for z in state.link_mut(u, b) {
                *z = complex_gaussian(&mut rng) * amp;
            }
        }
    }
    state
}

/// Scalar reconstruction levels applied to the real and imaginary parts of
/// the normalised fading coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiCodebook {
    levels: Vec<f64>,
    /// Probability of each level when a `CN(0, 1)` component is quantised.
    probabilities: Vec<f64>,
}

impl CsiCodebook {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::config("a CSI codebook needs at least two levels"));
        }
        if levels.windows(2).any(|w| !(w[0] < w[1])) || levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::config("codebook levels must be finite and strictly increasing"));
        }
        let component = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
        let n = levels.len();
        let probabilities = (0..n)
            .map(|i| {
                let lo = if i == 0 {
                    0.0
                } else {
                    component.cdf(0.5 * (levels[i - 1] + levels[i]))
                };
                let hi = if i + 1 == n {
                    1.0
                } else {
                    component.cdf(0.5 * (levels[i] + levels[i + 1]))
                };
                hi - lo
            })
            .collect();
        Ok(CsiCodebook {
            levels,
            probabilities,
        })
    }

    /// Two levels `±1/sqrt(2)`: every quantised coefficient has unit magnitude.
    pub fn binary() -> Self {
        let l = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(vec![-l, l]).expect("valid codebook")
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Cardinality per real-valued component.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Index of the nearest level; ties go to the lower level.
    pub fn nearest(&self, value: f64) -> usize {
        let mut best = 0;
        for (i, &l) in self.levels.iter().enumerate() {
            if (value - l).abs() < (value - self.levels[best]).abs() {
                best = i;
            }
        }
        best
    }
}

/// Per-scalar codebook indices of a quantised channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedCsi {
    /// `(real, imaginary)` level index for every scalar entry, in
    /// [`ChannelState`] order.
    pub indices: Vec<(usize, usize)>,
    pub levels_per_component: usize,
}

impl QuantizedCsi {
    /// Mixed-radix index of the joint CSI state.
    pub fn joint_index(&self) -> u128 {
        let base = self.levels_per_component as u128;
        self.indices
            .iter()
            .fold(0u128, |acc, &(re, im)| (acc * base + re as u128) * base + im as u128)
    }

    /// Number of distinct joint states.
    pub fn joint_cardinality(&self) -> u128 {
        (self.levels_per_component as u128).pow(2 * self.indices.len() as u32)
    }

    /// Rebuilds a channel from the codebook levels.
    pub fn reconstruct(
        &self,
        topo: &NetworkTopology,
        codebook: &CsiCodebook,
        slot: u64,
    ) -> ChannelState {
        let mut state = ChannelState::zeros(topo.num_users(), topo.num_cells, topo.antennas, slot);
        let mut it = self.indices.iter();
        for u in 0..topo.num_users() {
            for b in 0..topo.num_cells {
                let amp = topo.effective_gain(u, b).sqrt();
                for z in state.link_mut(u, b) {
                    let &(re, im) = it.next().expect("index per scalar");
                    *z = Complex64::new(codebook.levels[re], codebook.levels[im]) * amp;
                }
            }
        }
        state
    }
}

/// Nearest-level quantisation of every real and imaginary component after
/// removing the path-gain scaling.
pub fn quantize_channel(
    state: &ChannelState,
    topo: &NetworkTopology,
    codebook: &CsiCodebook,
) -> QuantizedCsi {
    let mut indices = Vec::with_capacity(state.h.len());
    for u in 0..state.num_users {
        for b in 0..state.num_cells {
            let amp = topo.effective_gain(u, b).sqrt();
            for z in state.link(u, b) {
                let g = if amp > 0.0 { z / amp } else { Complex64::new(0.0, 0.0) };
                indices.push((codebook.nearest(g.re), codebook.nearest(g.im)));
            }
        }
    }
    QuantizedCsi {
        indices,
        levels_per_component: codebook.len(),
    }
}

/// Draws a channel and snaps it onto the codebook.
pub fn sample_quantized_channel(
    topo: &NetworkTopology,
    codebook: &CsiCodebook,
    seed: u64,
    slot: u64,
) -> ChannelState {
    let raw = sample_channel(topo, seed, slot);
    quantize_channel(&raw, topo, codebook).reconstruct(topo, codebook, slot)
}

/// How a simulation obtains its per-slot channels.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    Rayleigh,
    Quantized(CsiCodebook),
}

impl ChannelModel {
    pub fn sample(&self, topo: &NetworkTopology, seed: u64, slot: u64, attempt: u64) -> ChannelState {
        match self {
            ChannelModel::Rayleigh => sample_channel_attempt(topo, seed, slot, attempt),
            ChannelModel::Quantized(cb) => {
                let raw = sample_channel_attempt(topo, seed, slot, attempt);
                quantize_channel(&raw, topo, cb).reconstruct(topo, cb, slot)
            }
        }
    }

    /// Quantised channels are redrawn never; singular slots are skipped.
    pub fn resamples_singular(&self) -> bool {
        matches!(self, ChannelModel::Rayleigh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo(gains: Vec<Vec<f64>>, antennas: usize) -> NetworkTopology {
        let n = gains[0].len();
        let neighbors = (0..n)
            .map(|a| (0..n).filter(|&b| b != a).collect())
            .collect();
        NetworkTopology::from_path_gains(1, antennas, &gains, neighbors).unwrap()
    }

    #[test]
    fn determinism_per_slot() {
        let t = topo(vec![vec![1.0, 0.5], vec![0.2, 2.0]], 2);
        assert_eq!(sample_channel(&t, 9, 4), sample_channel(&t, 9, 4));
        assert_ne!(sample_channel(&t, 9, 4), sample_channel(&t, 9, 5));
    }

    #[test]
    fn zero_gain_gives_zero_entry() {
        let mut t = topo(vec![vec![1.0]], 1);
        t.path_gains[0] = 0.0;
        let s = sample_channel(&t, 1, 0);
        assert_eq!(s.h[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn empirical_variance_matches_gain() {
        let sigma = 0.7;
        let t = topo(vec![vec![sigma]], 1);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|s| sample_channel(&t, 3, s).h[0].norm_sqr())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - sigma).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn lag_one_autocorrelation_vanishes() {
        let t = topo(vec![vec![1.0]], 1);
        let n = 50_000u64;
        let xs: Vec<f64> = (0..n).map(|s| sample_channel(&t, 5, s).h[0].re).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let cov = xs
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        let rho = cov / var;
        assert!(rho.abs() < 3.0 / (n as f64).sqrt(), "rho {rho}");
    }

    #[test]
    fn nearest_level() {
        let cb = CsiCodebook::new(vec![-1.0, 1.0]).unwrap();
        assert_eq!(cb.nearest(1.0), 1);
        assert_eq!(cb.nearest(-1.0), 0);
        assert_eq!(cb.nearest(0.2), 1);
        assert!((cb.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((cb.probabilities()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn codebook_validation() {
        assert!(CsiCodebook::new(vec![1.0]).is_err());
        assert!(CsiCodebook::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn joint_state_count() {
        let t = topo(vec![vec![1.0]], 2);
        let cb = CsiCodebook::binary();
        let q = quantize_channel(&sample_channel(&t, 0, 0), &t, &cb);
        assert_eq!(q.indices.len(), 2);
        assert_eq!(q.joint_cardinality(), 16);
        let mut seen = std::collections::BTreeSet::new();
        for s in 0..2000 {
            seen.insert(quantize_channel(&sample_channel(&t, 0, s), &t, &cb).joint_index());
        }
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn quantized_entries_sit_on_levels() {
        let t = topo(vec![vec![4.0]], 2);
        let cb = CsiCodebook::binary();
        let s = sample_quantized_channel(&t, &cb, 1, 7);
        for z in &s.h {
            assert!((z.norm_sqr() - 4.0).abs() < 1e-12);
        }
    }
}
