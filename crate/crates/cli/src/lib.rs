//! Command-line front end: argument parsing, configuration resolution and the
//! experiment commands.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
pub mod validate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run, Outcome};
pub use config::{ExperimentConfig, SampleMode, WORKERS_ENV};

#[derive(Debug, Parser)]
#[command(name = "ust", version, about = "Uniform spanning trees of Z^3, effective resistance and collision counts")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct GlobalArgs {
    /// Base seed of every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [env: UST_WORKERS; default: available cores].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Container radius as a multiple of the sampled radius.
    #[arg(long, global = true)]
    pub container_factor: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub plot: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every implementation against its reference oracle.
    Validate,
    /// Estimate the growth exponent of loop-erased walk.
    Beta {
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<u64>>,
        /// Samples per radius.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Sample trees and write them to tree files.
    SampleUst {
        #[arg(long)]
        r: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<SampleMode>,
    },
    /// Collision moments of two walks killed on leaving intrinsic balls.
    Collisions {
        /// Comma-separated intrinsic radii.
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<u64>>,
        #[arg(long)]
        trees: Option<usize>,
        /// Monte Carlo runs per tree; 0 for exact moments only.
        #[arg(long)]
        mc_runs: Option<usize>,
        /// Comma-separated epsilon grid.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        /// Largest ball for exact moments.
        #[arg(long)]
        exact_cap: Option<usize>,
        /// Comma-separated thresholds N for the collision-certificate table.
        #[arg(long, value_delimiter = ',')]
        demo: Option<Vec<u64>>,
        #[arg(long)]
        demo_eps: Option<f64>,
    },
    /// Effective resistance survey and exceedance frequencies.
    Resistance {
        /// Comma-separated intrinsic radii.
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<u64>>,
        #[arg(long)]
        trees: Option<usize>,
        /// Comma-separated lambda grid.
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        /// Plug-in growth exponent.
        #[arg(long)]
        beta: Option<f64>,
        /// Comma-separated container factors to compare, e.g. 2,4,8.
        #[arg(long, value_delimiter = ',')]
        sensitivity: Option<Vec<f64>>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Beta { .. } => "beta",
            Command::SampleUst { .. } => "sample-ust",
            Command::Collisions { .. } => "collisions",
            Command::Resistance { .. } => "resistance",
        }
    }
}

fn set<T>(slot: &mut T, value: &Option<T>)
where
    T: Clone,
{
    if let Some(v) = value {
        *slot = v.clone();
    }
}

/// Defaults, then the configuration file, then flags.
pub fn resolve(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let g = &cli.global;
    set(&mut cfg.seed, &g.seed);
    if g.workers.is_some() {
        cfg.workers = g.workers;
    }
    set(&mut cfg.container_factor, &g.container_factor);
    set(&mut cfg.out, &g.out);
    cfg.plot |= g.plot;
    match &cli.command {
        Command::Validate => {}
        Command::Beta { radii, samples } => {
            set(&mut cfg.beta.radii, radii);
            set(&mut cfg.beta.samples, samples);
        }
        Command::SampleUst { r, count, mode } => {
            set(&mut cfg.sample_ust.r, r);
            set(&mut cfg.sample_ust.count, count);
            set(&mut cfg.sample_ust.mode, mode);
        }
        Command::Collisions { r, trees, mc_runs, eps, exact_cap, demo, demo_eps } => {
            let c = &mut cfg.collisions;
            set(&mut c.radii, r);
            set(&mut c.trees, trees);
            set(&mut c.mc_runs, mc_runs);
            set(&mut c.eps_grid, eps);
            set(&mut c.exact_cap, exact_cap);
            set(&mut c.demo_thresholds, demo);
            set(&mut c.demo_eps, demo_eps);
        }
        Command::Resistance { r, trees, lambda, beta, sensitivity } => {
            let c = &mut cfg.resistance;
            set(&mut c.radii, r);
            set(&mut c.trees, trees);
            set(&mut c.lambda_grid, lambda);
            set(&mut c.beta, beta);
            set(&mut c.sensitivity_factors, sensitivity);
        }
    }
    Ok(cfg)
}
