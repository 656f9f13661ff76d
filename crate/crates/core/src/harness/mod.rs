//! Episode orchestration, metrics, configuration, sweeps and the
//! acceptance checks.

pub mod config;
pub mod engine;
pub mod metrics;
pub mod output;
pub mod sweep;
pub mod validation;

pub use config::{Scheme, SimConfig};
pub use engine::{run_episode, run_episode_with, EpisodeResult, Scenario, TraceOptions};
pub use metrics::Summary;
pub use output::write_episode;
pub use sweep::{run_sweep, write_sweep, SweepResult};
