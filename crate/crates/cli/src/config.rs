//! Experiment configuration: built-in defaults, overlaid by a TOML file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use ust_core::collision::{DEFAULT_EPS_GRID, DEFAULT_EXACT_CAP};
use ust_core::walk::BETA_REFERENCE;
use ust_core::{BoundaryMode, WilsonConfig};

pub const WORKERS_ENV: &str = "UST_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; `None` falls back to the environment, then to the machine.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub container_factor: f64,
    pub out: PathBuf,
    pub plot: bool,
    pub beta: BetaParams,
    pub collisions: CollisionParams,
    pub resistance: ResistanceParams,
    pub sample_ust: SampleParams,
    pub validate: ValidateParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaParams {
    pub radii: Vec<u64>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionParams {
    pub radii: Vec<u64>,
    pub trees: usize,
    pub mc_runs: usize,
    pub eps_grid: Vec<f64>,
    pub exact_cap: usize,
    /// Thresholds N for the collision-certificate table on tree 0; empty to skip.
    pub demo_thresholds: Vec<u64>,
    pub demo_eps: f64,
    pub demo_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResistanceParams {
    pub radii: Vec<u64>,
    pub trees: usize,
    pub lambda_grid: Vec<f64>,
    pub beta: f64,
    /// Container factors to compare at each radius; empty to skip.
    pub sensitivity_factors: Vec<f64>,
    pub sensitivity_trees: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Reveal just the intrinsic ball B_U(0, r).
    Ball,
    /// Cover every vertex of the Euclidean ball B(0, r).
    Region,
    /// Exact wired tree of the cube [-r, r]³.
    Wired,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleParams {
    pub r: u64,
    pub count: usize,
    pub mode: SampleMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateParams {
    pub loop_erase_traces: usize,
    pub max_trace_length: usize,
    pub exhaustive_length: usize,
    pub hitting_pairs: usize,
    pub uniformity_samples: usize,
    pub electrical_balls: usize,
    pub electrical_max_radius: u64,
    pub series_tolerance: f64,
    pub moment_balls: usize,
    pub moment_max_radius: u64,
    pub line_mc_runs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            workers: None,
            container_factor: 4.0,
            out: PathBuf::from("ust-out"),
            plot: false,
            beta: BetaParams::default(),
            collisions: CollisionParams::default(),
            resistance: ResistanceParams::default(),
            sample_ust: SampleParams::default(),
            validate: ValidateParams::default(),
        }
    }
}

impl Default for BetaParams {
    fn default() -> Self {
        BetaParams { radii: vec![16, 32, 64, 128, 256, 512], samples: 2000 }
    }
}

impl Default for CollisionParams {
    fn default() -> Self {
        CollisionParams {
            radii: vec![25],
            trees: 200,
            mc_runs: 1000,
            eps_grid: DEFAULT_EPS_GRID.to_vec(),
            exact_cap: DEFAULT_EXACT_CAP,
            demo_thresholds: Vec::new(),
            demo_eps: 0.1,
            demo_runs: 2000,
        }
    }
}

impl Default for ResistanceParams {
    fn default() -> Self {
        ResistanceParams {
            radii: vec![50],
            trees: 200,
            lambda_grid: vec![2.0, 4.0, 8.0, 16.0],
            beta: BETA_REFERENCE,
            sensitivity_factors: Vec::new(),
            sensitivity_trees: 100,
        }
    }
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams { r: 10, count: 1, mode: SampleMode::Ball }
    }
}

impl Default for ValidateParams {
    fn default() -> Self {
        ValidateParams {
            loop_erase_traces: 100_000,
            max_trace_length: 200,
            exhaustive_length: 6,
            hitting_pairs: 10_000,
            uniformity_samples: 100_000,
            electrical_balls: 100,
            electrical_max_radius: 20,
            series_tolerance: 1e-9,
            moment_balls: 20,
            moment_max_radius: 5,
            line_mc_runs: 10_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("invalid configuration file")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    /// The configuration as it is echoed into output headers.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("configuration is serializable")
    }

    pub fn wilson(&self) -> WilsonConfig {
        WilsonConfig { container_factor: self.container_factor, ..WilsonConfig::default() }
    }

    pub fn wilson_for(&self, mode: BoundaryMode) -> WilsonConfig {
        WilsonConfig { boundary_mode: mode, ..self.wilson() }
    }

    /// Worker count: configured value, else the environment, else the machine's parallelism.
    pub fn resolved_workers(&self) -> anyhow::Result<usize> {
        let n = match self.workers {
            Some(n) => n,
            None => match std::env::var(WORKERS_ENV) {
                Ok(v) => v.trim().parse().with_context(|| format!("{WORKERS_ENV}={v} is not a count"))?,
                Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
            },
        };
        if n == 0 {
            bail!("worker count must be positive");
        }
        Ok(n)
    }
}
