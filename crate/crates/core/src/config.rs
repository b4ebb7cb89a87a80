//! JSON experiment configuration and the bundled presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{EnvKind, SpringDamper};
use crate::error::{Error, Result};
use crate::paths::{read_csv, read_csv_from, PiecewisePath};
use crate::sigdp::example::ObservationSource;
use crate::sigkernel::SignatureKernelConfig;
use crate::sigmpc::MpcConfig;

pub const DEFAULT_SEED: u64 = 1234;

/// Bundled point-mass reference, 2D positions.
pub const POINTMASS_REFERENCE_CSV: &str = include_str!("../data/pointmass_reference.csv");

/// Waypoints the bundled point-mass reference is smoothed from.
pub const POINTMASS_WAYPOINTS: [[f64; 2]; 5] = [[5.0, 5.0], [15.0, 40.0], [40.0, 70.0], [70.0, 85.0], [95.0, 95.0]];
pub const POINTMASS_REFERENCE_NODES: usize = 100;
pub const POINTMASS_SMOOTHING_WEIGHT: f64 = 20.0;

const PRESETS: &[(&str, &str)] = &[
    ("stable", include_str!("../presets/stable.json")),
    ("bellman_check", include_str!("../presets/bellman_check.json")),
    ("chen_opt", include_str!("../presets/chen_opt.json")),
    ("error_explosion", include_str!("../presets/error_explosion.json")),
    ("pointmass", include_str!("../presets/pointmass.json")),
    ("springdamper_d1", include_str!("../presets/springdamper_d1.json")),
    ("springdamper_d2", include_str!("../presets/springdamper_d2.json")),
    ("similar_path", include_str!("../presets/similar_path.json")),
    ("similar_path_grow", include_str!("../presets/similar_path_grow.json")),
    ("kernel_profile", include_str!("../presets/kernel_profile.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::UnknownPreset(name.into()))?;
    Ok(serde_json::from_str(text)?)
}

pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
    // relative CSV paths are resolved against the config file
    if let Some(dir) = path.parent() {
        cfg.resolve_paths(dir);
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
#[allow(clippy::large_enum_variant)]
pub enum ExperimentConfig {
    Stable(StableConfig),
    BellmanCheck(BellmanConfig),
    ChenOpt(ChenConfig),
    ErrorExplosion(ErrorExplosionConfig),
    Track(TrackConfig),
    SimilarPath(SimilarPathConfig),
    KernelProfile(KernelProfileConfig),
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Stable(_) => "stable",
            ExperimentConfig::BellmanCheck(_) => "bellman-check",
            ExperimentConfig::ChenOpt(_) => "chen-opt",
            ExperimentConfig::ErrorExplosion(_) => "error-explosion",
            ExperimentConfig::Track(_) => "track",
            ExperimentConfig::SimilarPath(_) => "similar-path",
            ExperimentConfig::KernelProfile(_) => "kernel-profile",
        }
    }

    /// Overrides every seed the experiment uses.
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::BellmanCheck(c) => c.seed = seed,
            ExperimentConfig::ErrorExplosion(c) => c.seed = seed,
            ExperimentConfig::Track(c) => c.mpc.optimizer.seed = seed,
            ExperimentConfig::SimilarPath(c) => c.seed = seed,
            ExperimentConfig::Stable(_) | ExperimentConfig::ChenOpt(_) | ExperimentConfig::KernelProfile(_) => {}
        }
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let reference = match self {
            ExperimentConfig::Track(c) => Some(&mut c.reference),
            ExperimentConfig::SimilarPath(c) => Some(&mut c.reference),
            _ => None,
        };
        if let Some(ReferenceSource::Csv { path }) = reference {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        }
    }
}

fn default_depth() -> usize {
    2
}
fn default_gamma() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableConfig {
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub observations: ObservationSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellmanConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub observations: ObservationSource,
    /// Additional random MDPs checked after the example.
    #[serde(default)]
    pub random_trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChenConfig {
    /// 1-based, as in printed tables.
    pub branch_state: usize,
    pub time: usize,
    /// 1-based.
    pub candidates: Vec<usize>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub observations: ObservationSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorExplosionConfig {
    pub start: Vec<f64>,
    /// Transitions; the path has `n_steps + 1` nodes.
    pub n_steps: usize,
    pub eps: f64,
    pub depth: usize,
    /// Added to every coefficient (levels 1..=depth) for the perturbation route.
    pub coefficient_error: f64,
    #[serde(default)]
    pub reconstruction: Option<ReconstructionConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub n_nodes: usize,
    pub step_size: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSource {
    /// A reference shipped with the library (`pointmass`).
    Bundled { name: String },
    Csv { path: PathBuf },
    Points { points: Vec<Vec<f64>> },
    /// `(x, x^2)` for `x` evenly spaced on `[x_min, x_max]`.
    Parabola { x_min: f64, x_max: f64, n_nodes: usize },
}

impl ReferenceSource {
    pub fn load(&self) -> Result<PiecewisePath> {
        match self {
            ReferenceSource::Bundled { name } => match name.as_str() {
                "pointmass" => read_csv_from(POINTMASS_REFERENCE_CSV.as_bytes()).map(|p| p.without_times()),
                other => Err(Error::InvalidInput(format!("no bundled reference named `{other}`"))),
            },
            ReferenceSource::Csv { path } => read_csv(path).map(|p| p.without_times()),
            ReferenceSource::Points { points } => PiecewisePath::new(points.clone()),
            ReferenceSource::Parabola { x_min, x_max, n_nodes } => {
                if *n_nodes < 2 {
                    return Err(Error::InvalidInput("a parabola needs at least two nodes".into()));
                }
                PiecewisePath::new(
                    (0..*n_nodes)
                        .map(|i| {
                            let x = x_min + (x_max - x_min) * i as f64 / (*n_nodes - 1) as f64;
                            vec![x, x * x]
                        })
                        .collect(),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackConfig {
    pub env: EnvKind,
    /// Planning model; defaults to `env` without disturbance.
    #[serde(default)]
    pub model: Option<EnvKind>,
    pub initial_state: Vec<f64>,
    pub max_time: f64,
    pub reference: ReferenceSource,
    /// Every `coarse_stride`-th reference node (plus the last) forms the
    /// coarse reference for terminal suffixes.
    #[serde(default = "default_stride")]
    pub coarse_stride: usize,
    pub mpc: MpcConfig,
}

fn default_stride() -> usize {
    1
}

impl TrackConfig {
    pub fn planning_model(&self) -> EnvKind {
        self.model.unwrap_or(match self.env {
            EnvKind::SpringDamper(sd) => EnvKind::SpringDamper(SpringDamper {
                disturbance: [0.0; 2],
                ..sd
            }),
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarPathConfig {
    pub reference: ReferenceSource,
    pub depth: usize,
    pub alpha: f64,
    /// Treat `alpha` as a decision variable with cost `... - alpha`.
    #[serde(default)]
    pub optimize_alpha: bool,
    pub step_size: f64,
    pub iterations: usize,
    /// Iterations at which the current path and `alpha` are logged.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelProfileConfig {
    pub horizon: f64,
    /// Nodes per path over `[0, horizon]`.
    pub n_nodes: usize,
    pub dyadic_order: u32,
    pub rbf_bandwidth: f64,
}

impl KernelProfileConfig {
    pub fn kernels(&self) -> [(&'static str, SignatureKernelConfig); 2] {
        [
            ("linear", SignatureKernelConfig::linear(self.dyadic_order)),
            ("rbf", SignatureKernelConfig::rbf(self.rbf_bandwidth, self.dyadic_order)),
        ]
    }
}
