//! Arrivals, queue evolution and the birth-death transition kernel.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::rng::{substream, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QueueMode {
    #[default]
    Packets,
    Bits,
}

/// Source statistics shared by all users unless overridden per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    /// Packet arrival rate per user, packets per second.
    pub arrival_rate: Vec<f64>,
    /// Mean packet size per user, bits.
    pub mean_packet_bits: Vec<f64>,
    /// Slot duration, seconds.
    pub slot_seconds: f64,
    pub mode: QueueMode,
}

impl TrafficConfig {
    pub fn uniform(
        num_users: usize,
        arrival_rate: f64,
        mean_packet_bits: f64,
        slot_seconds: f64,
        mode: QueueMode,
    ) -> Self {
        TrafficConfig {
            arrival_rate: vec![arrival_rate; num_users],
            mean_packet_bits: vec![mean_packet_bits; num_users],
            slot_seconds,
            mode,
        }
    }

    pub fn num_users(&self) -> usize {
        self.arrival_rate.len()
    }

    /// Per-slot arrival probability `lambda * tau`.
    pub fn arrival_prob(&self, user: usize) -> f64 {
        self.arrival_rate[user] * self.slot_seconds
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean_packet_bits.len() != self.arrival_rate.len() {
            return Err(Error::config("arrival rates and packet sizes differ in length"));
        }
        if !(self.slot_seconds > 0.0) {
            return Err(Error::config("slot duration must be positive"));
        }
        for u in 0..self.num_users() {
            let lt = self.arrival_prob(u);
            if !(0.0..1.0).contains(&lt) {
                return Err(Error::config(format!(
                    "user {u}: arrival probability per slot {lt} must lie in [0, 1)"
                )));
            }
            if !(self.mean_packet_bits[u] > 0.0) {
                return Err(Error::config(format!("user {u}: mean packet size must be positive")));
            }
            if lt > 0.2 {
                log::warn!("user {u}: arrival probability per slot {lt} is not small");
            }
        }
        Ok(())
    }
}

/// Queue lengths (packets or bits) with their common capacity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueState {
    pub q: Vec<u64>,
    pub capacity: u64,
}

impl QueueState {
    pub fn empty(num_users: usize, capacity: u64) -> Self {
        QueueState {
            q: vec![0; num_users],
            capacity,
        }
    }
}

/// What happened to one queue in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QueueEvent {
    pub arrived: u64,
    pub departed: u64,
    pub dropped: u64,
}

/// Draws this slot's arrivals: 0/1 packets in packet mode, a bit count in
/// bit mode (one packet with exponential size, rounded up).
pub fn sample_arrivals(traffic: &TrafficConfig, seed: u64, slot: u64) -> Vec<u64> {
    let mut rng = substream(seed, Stream::Arrivals, slot);
    (0..traffic.num_users())
        .map(|u| {
            let hit = rng.random::<f64>() < traffic.arrival_prob(u);
            let size = Exp::new(1.0 / traffic.mean_packet_bits[u])
                .expect("positive packet size")
                .sample(&mut rng);
            match (traffic.mode, hit) {
                (_, false) => 0,
                (QueueMode::Packets, true) => 1,
                (QueueMode::Bits, true) => size.ceil().max(1.0) as u64,
            }
        })
        .collect()
}

/// One uniform per user for this slot's departure decisions.
pub fn departure_uniforms(num_users: usize, seed: u64, slot: u64) -> Vec<f64> {
    let mut rng = substream(seed, Stream::Departures, slot);
    (0..num_users).map(|_| rng.random()).collect()
}

/// Packet-mode step.
///
/// An arriving packet is admitted (or dropped at capacity). A slot without
/// an arrival sees a departure with probability `mu_tau / (1 - lambda_tau)`
/// when the queue is non-empty, so the one-step law is exactly
/// [`birth_death_kernel`].
pub fn step_queue_packets(
    state: &mut QueueState,
    mu_tau: &[f64],
    lambda_tau: &[f64],
    arrivals: &[u64],
    uniforms: &[f64],
) -> Result<Vec<QueueEvent>> {
    let mut events = Vec::with_capacity(state.q.len());
    for u in 0..state.q.len() {
        let (mt, lt) = (mu_tau[u], lambda_tau[u]);
        if !(0.0..=1.0).contains(&mt) || mt + lt > 1.0 + 1e-12 {
            return Err(Error::contract(format!(
                "user {u}: departure probability {mt} with arrival probability {lt}"
            )));
        }
        let q = &mut state.q[u];
        let mut ev = QueueEvent::default();
        if arrivals[u] > 0 {
            if *q < state.capacity {
                *q += 1;
                ev.arrived = 1;
            } else {
                ev.dropped = 1;
            }
        } else if *q > 0 && lt < 1.0 && uniforms[u] * (1.0 - lt) < mt {
            *q -= 1;
            ev.departed = 1;
        }
        events.push(ev);
    }
    Ok(events)
}

/// Bit-mode step `Q' = min(ceil((Q - served)^+) + A, N_Q)`.
pub fn step_queue_bits(
    state: &mut QueueState,
    served_bits: &[f64],
    arrivals: &[u64],
) -> Vec<QueueEvent> {
    let cap = state.capacity;
    state
        .q
        .iter_mut()
        .zip(served_bits.iter().zip(arrivals))
        .map(|(q, (&s, &a))| {
            let left = (*q as f64 - s.max(0.0)).max(0.0).ceil() as u64;
            let total = left + a;
            let next = total.min(cap);
            let ev = QueueEvent {
                arrived: next - left,
                departed: *q - left,
                dropped: total - next,
            };
            *q = next;
            ev
        })
        .collect()
}

/// `(P(Q-1), P(Q), P(Q+1))` of the finite birth-death chain on `0..=capacity`.
/// Blocked moves at the boundaries stay put.
pub fn birth_death_kernel(q: u64, capacity: u64, lambda_tau: f64, mu_tau: f64) -> Result<[f64; 3]> {
    if lambda_tau < 0.0 || mu_tau < 0.0 || lambda_tau + mu_tau > 1.0 + 1e-12 {
        return Err(Error::contract(format!(
            "birth-death probabilities {lambda_tau} + {mu_tau} exceed one"
        )));
    }
    let down = if q > 0 { mu_tau } else { 0.0 };
    let up = if q < capacity { lambda_tau } else { 0.0 };
    Ok([down, 1.0 - down - up, up])
}

/// Departure probability per slot `mu tau = R tau / N`.
#[inline]
pub fn service_probability(rate_bits_per_s: f64, mean_packet_bits: f64, slot_seconds: f64) -> f64 {
    rate_bits_per_s * slot_seconds / mean_packet_bits
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_example() {
        let k = birth_death_kernel(3, 9, 0.05, 0.1).unwrap();
        assert!((k[0] - 0.1).abs() < 1e-15);
        assert!((k[1] - 0.85).abs() < 1e-15);
        assert!((k[2] - 0.05).abs() < 1e-15);
        assert_eq!(birth_death_kernel(0, 9, 0.05, 0.1).unwrap()[0], 0.0);
        assert!(birth_death_kernel(0, 9, 0.6, 0.5).is_err());
    }

    #[test]
    fn packet_examples() {
        let mut s = QueueState {
            q: vec![0, 9, 3],
            capacity: 9,
        };
        let ev = step_queue_packets(&mut s, &[0.5, 0.0, 0.5], &[0.1; 3], &[0, 1, 0], &[0.0; 3])
            .unwrap();
        assert_eq!(s.q, vec![0, 9, 2]);
        assert_eq!(ev[1].dropped, 1);
        assert_eq!(ev[2].departed, 1);
    }

    #[test]
    fn packet_contract() {
        let mut s = QueueState::empty(1, 9);
        assert!(step_queue_packets(&mut s, &[1.5], &[0.0], &[0], &[0.5]).is_err());
    }

    #[test]
    fn bit_examples() {
        let mut s = QueueState {
            q: vec![5, 5, 100],
            capacity: 100,
        };
        step_queue_bits(&mut s, &[10.0, 2.0, 0.0], &[0, 1, 50]);
        assert_eq!(s.q, vec![0, 4, 100]);
    }

    #[test]
    fn zero_rate_means_no_arrivals() {
        let t = TrafficConfig::uniform(3, 0.0, 1e3, 5e-3, QueueMode::Packets);
        for slot in 0..1000 {
            assert!(sample_arrivals(&t, 1, slot).iter().all(|&a| a == 0));
        }
    }

    #[test]
    fn config_rejects_large_arrival_probability() {
        let t = TrafficConfig::uniform(1, 300.0, 1e3, 5e-3, QueueMode::Packets);
        assert!(t.validate().is_err());
    }
}
