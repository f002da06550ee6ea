use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use conslaw::bench::{AblationVariant, PipelineOptions, Scale, DEFAULT_DATA_SEED};
use conslaw::systems::SystemId;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "conslaw", version, about = "Discover conserved quantities from trajectory data")]
pub struct Cli {
    /// Worker threads. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the benchmark systems and store their datasets.
    Generate(GenerateArgs),
    /// Run the full pipeline per system and seed.
    Discover(DiscoverArgs),
    /// Run one of the experiment suites.
    Experiment {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Check stored (or freshly generated) datasets against their closed-form invariants.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Selection {
    /// Comma-separated system names.
    #[arg(long = "system", visible_alias = "systems", value_delimiter = ',')]
    pub systems: Vec<SystemId>,
    /// Every benchmark system.
    #[arg(long, conflicts_with = "systems")]
    pub all: bool,
}

impl Selection {
    pub fn resolve(&self) -> Result<Vec<SystemId>, CliError> {
        if self.all {
            return Ok(SystemId::ALL.to_vec());
        }
        if self.systems.is_empty() {
            return Err(CliError::Usage("select systems with --system or --all".into()));
        }
        let mut out = self.systems.clone();
        out.dedup();
        Ok(out)
    }
}

/// Where data comes from and where results go.
#[derive(Debug, Clone, Args)]
pub struct Io {
    /// Dataset scale: `desk` (100 trajectories × 200 steps) or `paper`.
    #[arg(long, default_value = "desk")]
    pub scale: Scale,
    /// Seed the datasets are generated from when --data is absent.
    #[arg(long, default_value_t = DEFAULT_DATA_SEED)]
    pub data_seed: u64,
    /// Directory written by `generate`; one subdirectory per system.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory. Defaults to `$CONSLAW_OUTPUT_ROOT/<command>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Pipeline overrides on top of the scale defaults.
#[derive(Debug, Clone, Args)]
pub struct Tuning {
    /// Strict gate threshold on test constancy.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Minimum diversity ratio.
    #[arg(long)]
    pub rho_min: Option<f64>,
    /// Invariant-network restarts.
    #[arg(long)]
    pub restarts: Option<usize>,
}

impl Tuning {
    pub fn options(&self, scale: Scale) -> Result<PipelineOptions, CliError> {
        let mut o = PipelineOptions::new(scale);
        if let Some(t) = self.tau {
            o.gate.tau = t;
        }
        if let Some(r) = self.rho_min {
            o.gate.rho_min = r;
        }
        if let Some(r) = self.restarts {
            o.restarts = r;
        }
        o.validate()?;
        Ok(o)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub select: Selection,
    #[arg(long, default_value_t = DEFAULT_DATA_SEED)]
    pub seed: u64,
    #[arg(long, default_value = "desk")]
    pub scale: Scale,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub select: Selection,
    /// Pipeline seeds; each gives one run per system.
    #[arg(long, visible_alias = "seed", value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub io: Io,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub select: Selection,
    #[command(flatten)]
    pub io: Io,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Restarts,
    RhoMin,
}

#[derive(Debug, Subcommand)]
pub enum Suite {
    /// Component ablations; table cells are `F1 (DR/FDR)`.
    Ablate {
        #[command(flatten)]
        select: Selection,
        #[arg(long, value_delimiter = ',', default_value = "full,no_restarts,no_diversity,no_lv_lasso,no_poly_lasso,lasso_off")]
        variants: Vec<AblationVariant>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Gaussian state noise of each σ.
    Noise {
        #[command(flatten)]
        select: Selection,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
        sigmas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        seeds: Vec<u64>,
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Training-set size sweep. Default sizes follow the scale.
    Samples {
        #[command(flatten)]
        select: Selection,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Restart-count or diversity-threshold sweep.
    Sweep {
        #[command(flatten)]
        select: Selection,
        #[arg(long, value_enum)]
        axis: SweepKind,
        /// Grid values; defaults to 1,3,10 restarts or 0,1,3,10,30 for ρ_min.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Test constancy against complexity for every candidate of one run.
    Pareto {
        #[command(flatten)]
        select: Selection,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        tuning: Tuning,
    },
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Ablate { .. } => "ablate",
            Suite::Noise { .. } => "noise",
            Suite::Samples { .. } => "samples",
            Suite::Sweep { .. } => "sweep",
            Suite::Pareto { .. } => "pareto",
        }
    }
}
