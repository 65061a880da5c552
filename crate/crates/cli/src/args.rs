use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "shapemeans", version, about = "Shape-constrained design-based estimation of domain means")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate domain means, standard errors and intervals from a sample file.
    Estimate(EstimateArgs),
    /// Run Monte-Carlo scenarios from a study file.
    Simulate(SimulateArgs),
    /// Check that a constraint specification is irreducible.
    CheckConstraints(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Sample CSV: unit_id, y, pi or weight, domain, optional stratum.
    #[arg(long)]
    pub data: PathBuf,
    /// Constraint specification (JSON).
    #[arg(long)]
    pub constraints: PathBuf,
    /// `linearization`, `dagjk:G` or `replicate:FILE`.
    #[arg(long, default_value = "linearization")]
    pub variance: VarianceChoice,
    /// Replicate coefficients CSV, required with `replicate:FILE`.
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
    /// Seed for the jackknife grouping, required with `dagjk:G`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Sampling design used for linearization variances.
    #[arg(long, value_enum, default_value_t = DesignChoice::Srswor)]
    pub design: DesignChoice,
    /// Result JSON; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Study file (JSON): one scenario or `{"scenarios": [...]}`.
    #[arg(long)]
    pub config: PathBuf,
    /// Replications; overrides the scenario value (default 1000).
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub constraints: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarianceChoice {
    Linearization,
    Dagjk(usize),
    Replicate(PathBuf),
}

impl FromStr for VarianceChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "linearization" {
            return Ok(VarianceChoice::Linearization);
        }
        if let Some(g) = s.strip_prefix("dagjk:") {
            return g.parse().map(VarianceChoice::Dagjk).map_err(|_| format!("bad group count in {s:?}"));
        }
        if let Some(path) = s.strip_prefix("replicate:") {
            if path.is_empty() {
                return Err("replicate: needs a weights file".into());
            }
            return Ok(VarianceChoice::Replicate(PathBuf::from(path)));
        }
        Err(format!("expected linearization, dagjk:G or replicate:FILE, got {s:?}"))
    }
}

impl VarianceChoice {
    pub fn label(&self) -> String {
        match self {
            VarianceChoice::Linearization => "linearization".into(),
            VarianceChoice::Dagjk(g) => format!("dagjk:{g}"),
            VarianceChoice::Replicate(p) => format!("replicate:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignChoice {
    /// SRSWOR within the strata of the stratum column (one stratum if absent).
    Srswor,
    /// Independent Bernoulli inclusions.
    Poisson,
}
