//! Versioned TOML configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelModel, CsiCodebook};
use crate::game::DEFAULT_P_MAX;
use crate::learning::StepSizeSchedule;
use crate::oracle::{TinyInstance, Utility};
use crate::queueing::{QueueMode, TrafficConfig};
use crate::topology::{
    enumerate_patterns, CatalogMode, ClusteringPattern, HexLayout, NetworkTopology, PatternCatalog,
};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the root directory for run outputs.
pub const OUTPUT_ROOT_ENV: &str = "NETMIMO_OUTPUT_ROOT";

/// The desk-scale default configuration.
pub const DESK_CONFIG: &str = include_str!("../../configs/desk.toml");
/// The bundled tiny instance used to check learning against the oracle.
pub const TINY_CONFIG: &str = include_str!("../../configs/tiny.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Proposed,
    Fca,
    Static,
    Greedy,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::Greedy, Scheme::Static, Scheme::Fca];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Fca => "fca",
            Scheme::Static => "static",
            Scheme::Greedy => "greedy",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::config(format!("unknown scheme '{name}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub schema_version: u32,
    pub topology: TopologyConfig,
    pub radio: RadioConfig,
    pub traffic: TrafficSection,
    #[serde(default)]
    pub scheme: SchemeConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub learning: LearningConfig,
    #[serde(default)]
    pub game: GameConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default = "one")]
    pub num_rings: usize,
    #[serde(default = "default_radius")]
    pub cell_radius_m: f64,
    pub users_per_cell: usize,
    pub antennas: usize,
    #[serde(default = "unit")]
    pub placement_fraction: f64,
    /// Seed of the mobile drop; the run seed when absent.
    pub placement_seed: Option<u64>,
    pub max_cluster_size: usize,
    #[serde(default = "default_catalog")]
    pub catalog: CatalogMode,
    /// Explicit linear path gains `[user][bs]`, replacing the hexagonal layout.
    pub path_gains: Option<Vec<Vec<f64>>>,
    /// Adjacency for explicit gains; all pairs are neighbors when absent.
    pub neighbors: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    #[default]
    Rayleigh,
    Quantized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    #[serde(default = "default_nf")]
    pub noise_figure_db: f64,
    /// Noise power over the band; derived from thermal noise when absent.
    pub noise_dbm: Option<f64>,
    /// Average transmit-power budget of every BS.
    pub budget_dbm: f64,
    #[serde(default)]
    pub channel: ChannelKind,
    /// Levels of the quantised channel model.
    pub codebook: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    /// Packets per second per user.
    pub arrival_rate: f64,
    pub mean_packet_bits: f64,
    pub slot_seconds: f64,
    pub queue_capacity: u64,
    #[serde(default)]
    pub mode: QueueMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub kind: Scheme,
    /// Pattern of the static scheme; the most cooperative catalog pattern
    /// when absent.
    pub static_pattern: Option<Vec<Vec<usize>>>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            kind: Scheme::Proposed,
            static_pattern: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub slots: u64,
    pub seed: u64,
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    #[serde(default = "default_utility")]
    pub utility: Utility,
    #[serde(default = "unit")]
    pub beta: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            utility: Utility::Delay,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningConfig {
    #[serde(default = "default_resolution")]
    pub resolution: u64,
    #[serde(default = "unit")]
    pub gamma_init: f64,
    #[serde(default = "default_gamma_bound")]
    pub gamma_bound: f64,
    #[serde(default = "default_exponent_v")]
    pub exponent_v: f64,
    #[serde(default = "unit")]
    pub scale_v: f64,
    #[serde(default = "default_exponent_gamma")]
    pub exponent_gamma: f64,
    #[serde(default = "default_scale_gamma")]
    pub scale_gamma: f64,
}

impl LearningConfig {
    pub fn schedule(&self) -> StepSizeSchedule {
        StepSizeSchedule {
            exponent_v: self.exponent_v,
            scale_v: self.scale_v,
            exponent_gamma: self.exponent_gamma,
            scale_gamma: self.scale_gamma,
        }
    }
}

impl Default for LearningConfig {
    fn default() -> Self {
        let s = StepSizeSchedule::default();
        LearningConfig {
            resolution: default_resolution(),
            gamma_init: 1.0,
            gamma_bound: default_gamma_bound(),
            exponent_v: s.exponent_v,
            scale_v: s.scale_v,
            exponent_gamma: s.exponent_gamma,
            scale_gamma: s.scale_gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    /// Per-BS peak transmit power as a multiple of the average budget.
    /// Clusters whose allocation exceeds it at some BS are scaled down.
    pub peak_ratio: Option<f64>,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            tol: default_tol(),
            max_iter: default_max_iter(),
            p_max: default_p_max(),
            peak_ratio: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the output root.
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub write_slots: bool,
    /// Potential snapshot period in slots; 0 disables snapshots.
    #[serde(default = "default_snapshot")]
    pub snapshot_every: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            write_slots: true,
            snapshot_every: default_snapshot(),
        }
    }
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_radius() -> f64 {
    500.0
}
fn default_catalog() -> CatalogMode {
    CatalogMode::Tiling
}
fn default_nf() -> f64 {
    9.0
}
fn default_warmup() -> f64 {
    0.2
}
fn default_utility() -> Utility {
    Utility::Delay
}
fn default_resolution() -> u64 {
    3
}
fn default_gamma_bound() -> f64 {
    100.0
}
fn default_exponent_v() -> f64 {
    StepSizeSchedule::default().exponent_v
}
fn default_exponent_gamma() -> f64 {
    StepSizeSchedule::default().exponent_gamma
}
fn default_scale_gamma() -> f64 {
    StepSizeSchedule::default().scale_gamma
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    200
}
fn default_p_max() -> f64 {
    DEFAULT_P_MAX
}
fn default_snapshot() -> u64 {
    100
}

/// Thermal noise over `bandwidth_hz` plus a noise figure, in dBm.
pub fn thermal_noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn desk() -> Self {
        Self::from_toml(DESK_CONFIG).expect("bundled desk config is valid")
    }

    pub fn tiny() -> Self {
        Self::from_toml(TINY_CONFIG).expect("bundled tiny config is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML serialisation.
    /// SHA-256 of the canonical TOML, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = None;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.run.slots == 0 {
            return Err(Error::config("run.slots must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.run.warmup_fraction) {
            return Err(Error::config("run.warmup_fraction must lie in [0, 1)"));
        }
        if !(self.radio.bandwidth_hz > 0.0) {
            return Err(Error::config("radio.bandwidth_hz must be positive"));
        }
        if self.radio.channel == ChannelKind::Quantized && self.radio.codebook.is_none() {
            return Err(Error::config("radio.codebook is required for quantized channels"));
        }
        if self.scheme.kind == Scheme::Proposed && self.traffic.mode != QueueMode::Packets {
            return Err(Error::config("the proposed scheme needs traffic.mode = \"packets\""));
        }
        if self.traffic.queue_capacity == 0 {
            return Err(Error::config("traffic.queue_capacity must be at least 1"));
        }
        if self.learning.resolution == 0 || self.learning.resolution > self.traffic.queue_capacity {
            return Err(Error::config("learning.resolution must lie in 1..=queue_capacity"));
        }
        if !(self.game.tol > 0.0) || !(self.game.p_max > 0.0) {
            return Err(Error::config("game.tol and game.p_max must be positive"));
        }
        if self.game.peak_ratio.is_some_and(|r| !(r >= 1.0)) {
            return Err(Error::config("game.peak_ratio must be at least 1"));
        }
        self.learning.schedule().validate()?;
        self.traffic().validate()
    }

    pub fn noise_dbm(&self) -> f64 {
        self.radio
            .noise_dbm
            .unwrap_or_else(|| thermal_noise_dbm(self.radio.bandwidth_hz, self.radio.noise_figure_db))
    }

    /// Budget-to-noise ratio: the factor turning path gains into received
    /// SNR when a BS spends its whole budget.
    pub fn gain_scale(&self) -> f64 {
        10f64.powf((self.radio.budget_dbm - self.noise_dbm()) / 10.0)
    }

    pub fn num_users(&self) -> usize {
        match &self.topology.path_gains {
            Some(g) => g.len(),
            None => {
                let cells = 1 + 3 * self.topology.num_rings * (self.topology.num_rings + 1);
                cells * self.topology.users_per_cell
            }
        }
    }

    pub fn traffic(&self) -> TrafficConfig {
        TrafficConfig::uniform(
            self.num_users(),
            self.traffic.arrival_rate,
            self.traffic.mean_packet_bits,
            self.traffic.slot_seconds,
            self.traffic.mode,
        )
    }

    /// Departure probability per slot for one bit/s/Hz of spectral efficiency.
    pub fn kappa(&self) -> f64 {
        self.radio.bandwidth_hz * self.traffic.slot_seconds / self.traffic.mean_packet_bits
    }

    pub fn build_topology(&self) -> Result<NetworkTopology> {
        let t = &self.topology;
        let topo = match &t.path_gains {
            Some(gains) => {
                let cells = gains.len() / t.users_per_cell.max(1);
                let neighbors = t.neighbors.clone().unwrap_or_else(|| {
                    (0..cells)
                        .map(|a| (0..cells).filter(|&b| b != a).collect())
                        .collect()
                });
                let topo = NetworkTopology::from_path_gains(t.users_per_cell, t.antennas, gains, neighbors)?;
                if t.antennas < t.users_per_cell {
                    return Err(Error::config("antennas must be at least users_per_cell"));
                }
                topo
            }
            None => HexLayout {
                num_rings: t.num_rings,
                cell_radius: t.cell_radius_m,
                users_per_cell: t.users_per_cell,
                antennas: t.antennas,
                placement_fraction: t.placement_fraction,
                seed: t.placement_seed.unwrap_or(self.run.seed),
            }
            .build()?,
        };
        Ok(topo.with_gain_scale(self.gain_scale()))
    }

    pub fn build_catalog(&self, topo: &NetworkTopology) -> Result<PatternCatalog> {
        enumerate_patterns(topo, self.topology.max_cluster_size, self.topology.catalog)
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        Ok(match self.radio.channel {
            ChannelKind::Rayleigh => ChannelModel::Rayleigh,
            ChannelKind::Quantized => ChannelModel::Quantized(CsiCodebook::new(
                self.radio.codebook.clone().unwrap_or_default(),
            )?),
        })
    }

    pub fn static_pattern(&self, topo: &NetworkTopology, catalog: &PatternCatalog) -> Result<ClusteringPattern> {
        match &self.scheme.static_pattern {
            Some(clusters) => {
                let mut p = ClusteringPattern::new(clusters.clone());
                p.validate(topo, self.topology.max_cluster_size)?;
                p.pattern_id = catalog.find(&p);
                Ok(p)
            }
            None => Ok(catalog.most_cooperative().clone()),
        }
    }

    /// The oracle instance of a single-cluster configuration with quantised
    /// CSI, at multipliers `gamma`.
    pub fn tiny_instance(&self, gamma: &[f64]) -> Result<TinyInstance> {
        let topology = self.build_topology()?;
        let codebook = match self.channel_model()? {
            ChannelModel::Quantized(cb) => cb,
            ChannelModel::Rayleigh => {
                return Err(Error::config("the oracle needs radio.channel = \"quantized\""))
            }
        };
        let n = topology.num_users();
        let traffic = self.traffic();
        let inst = TinyInstance {
            capacity: self.traffic.queue_capacity,
            lambda_tau: (0..n).map(|u| traffic.arrival_prob(u)).collect(),
            kappa: vec![self.kappa(); n],
            service_cap: None,
            beta: vec![self.cost.beta; n],
            utility: self.cost.utility,
            gamma: gamma.to_vec(),
            budgets: vec![1.0; topology.num_cells],
            p_max: self.game.p_max,
            topology,
            codebook,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Resolves the output directory against [`OUTPUT_ROOT_ENV`].
    pub fn output_dir(&self) -> Option<PathBuf> {
        let dir = self.output.dir.as_ref()?;
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if dir.is_relative() => Some(PathBuf::from(root).join(dir)),
            _ => Some(dir.clone()),
        }
    }

    /// Replaces the numeric field at a dotted path such as
    /// `radio.budget_dbm`.
    pub fn with_field(&self, path: &str, value: f64) -> Result<Self> {
        let mut doc: toml::Value = toml::Value::try_from(self)
            .map_err(|e| Error::config(format!("cannot serialise config: {e}")))?;
        let mut node = &mut doc;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::config(format!("unknown axis '{path}'")))?;
            let entry = table
                .get_mut(*part)
                .ok_or_else(|| Error::config(format!("unknown axis '{path}'")))?;
            if i + 1 == parts.len() {
                *entry = match entry {
                    toml::Value::Float(_) => toml::Value::Float(value),
                    toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
                    _ => return Err(Error::config(format!("axis '{path}' is not a numeric field"))),
                };
                break;
            }
            node = entry;
        }
        let cfg: SimConfig = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("axis '{path}': {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
