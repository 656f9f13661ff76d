//! Multicell network-MIMO simulator with queue-aware dynamic base-station
//! clustering and power allocation.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: hexagonal cell layout, path gains and the catalog of
//!   clustering patterns.
//! - [`channel`]: per-slot Rayleigh fading and discrete CSI codebooks.
//! - [`phy`]: intra-cluster zero-forcing, per-BS power, rates and the
//!   inter-cluster coupling matrix.
//! - [`queueing`]: packet and bit queues, arrivals and the birth-death kernel.
//! - [`control`]: compact per-cluster per-user potential tables, pattern
//!   selection and Lagrange multipliers.
//! - [`learning`]: two-timescale stochastic-approximation updates.
//! - [`game`]: queue-aware iterative water-filling between clusters.
//! - [`oracle`]: exact relative value iteration on tiny instances.
//! - [`baselines`]: CSI-only comparison schemes.
//! - [`harness`]: episode engine, metrics, sweeps and validation.

pub mod baselines;
pub mod channel;
pub mod control;
mod error;
pub mod game;
pub mod harness;
pub mod learning;
pub mod oracle;
pub mod phy;
pub mod queueing;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};

/// Flat index of MS `(b, k)`.
#[inline]
pub fn user_index(bs: usize, k: usize, users_per_cell: usize) -> usize {
    bs * users_per_cell + k
}
