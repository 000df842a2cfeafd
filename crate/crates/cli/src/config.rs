use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlqsim_core::bounds::GrowthRate;
use nlqsim_core::search::T1Policy;
use nlqsim_core::Nonlinearity;

#[derive(Parser, Clone, Debug, PartialEq)]
#[command(
    name = "nlqsim",
    version,
    about = "Nonlinear quantum dynamics: discrimination, search and bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Time for two nearby qubit states to become orthogonal.
    Discriminate,
    /// Certified growth rates and their check against integrated dynamics.
    Bounds,
    /// Run the search pipeline.
    Search,
    /// Audit the query lower bound by co-integrating all oracle trajectories.
    Audit,
    /// Multi-start search for the best higher-dimensional pair orientation.
    Optimize,
    /// Validity window of the mean-field approximation.
    GpValidity,
    /// Regenerate figure data as CSV.
    Figures,
    /// Run the invariant suite.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Discriminate => "discriminate",
            Command::Bounds => "bounds",
            Command::Search => "search",
            Command::Audit => "audit",
            Command::Optimize => "optimize",
            Command::GpValidity => "gp-validity",
            Command::Figures => "figures",
            Command::Validate => "validate",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GrowthRateArg {
    Stated,
    #[default]
    Sound,
}

impl From<GrowthRateArg> for GrowthRate {
    fn from(g: GrowthRateArg) -> Self {
        match g {
            GrowthRateArg::Stated => GrowthRate::Stated,
            GrowthRateArg::Sound => GrowthRate::Sound,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// `gp:<g>`, `log:<g>`, `sqrt[:<g>]`, `quartic[:<g>]`, `linear` or `custom:<csv>`.
    #[arg(long, global = true, default_value = "gp:1", value_parser = parse_nonlinearity)]
    pub nonlinearity: String,
    /// Initial separation angle on the Bloch sphere.
    #[arg(long, global = true)]
    pub alpha0: Option<f64>,
    /// Initial overlap deficit; overrides `--alpha0`.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Number of search items.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Number of atoms in the condensate.
    #[arg(long, global = true)]
    pub atoms: Option<f64>,
    /// Interaction strength per atom.
    #[arg(long, global = true)]
    pub interaction: Option<f64>,
    /// Oracle time: `auto` or a number.
    #[arg(long, global = true, default_value = "auto", value_parser = parse_t1)]
    pub t1: T1Policy,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true, default_value_t = 64)]
    pub restarts: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Integrator tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Output file (directory for `figures`); CSV goes to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Reduced grids.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Zero-based index of the marked item.
    #[arg(long, global = true)]
    pub marked: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = GrowthRateArg::Sound)]
    pub growth_rate: GrowthRateArg,
}

fn parse_nonlinearity(s: &str) -> Result<String, String> {
    s.parse::<Nonlinearity>().map_err(|e| e.to_string())?;
    Ok(s.to_string())
}

fn parse_t1(s: &str) -> Result<T1Policy, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(T1Policy::PaperDefault);
    }
    match s.parse::<f64>() {
        Ok(t) if t >= 0.0 && t.is_finite() => Ok(T1Policy::Explicit(t)),
        _ => Err(format!(
            "expected `auto` or a non-negative number, got `{s}`"
        )),
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Cli::try_parse_from(["nlqsim", "validate"])
            .expect("defaults parse")
            .config
    }
}

impl RunConfig {
    pub fn kappa(&self) -> anyhow::Result<Nonlinearity> {
        Ok(self.nonlinearity.parse()?)
    }

    /// Command-line flags reproducing this configuration.
    pub fn to_args(&self) -> Vec<String> {
        let mut a = Vec::new();
        let mut push = |flag: &str, v: String| {
            a.push(format!("--{flag}"));
            a.push(v);
        };
        push("nonlinearity", self.nonlinearity.clone());
        if let Some(v) = self.alpha0 {
            push("alpha0", v.to_string());
        }
        if let Some(v) = self.epsilon {
            push("epsilon", v.to_string());
        }
        if let Some(v) = self.n {
            push("n", v.to_string());
        }
        if let Some(v) = self.atoms {
            push("atoms", v.to_string());
        }
        if let Some(v) = self.interaction {
            push("interaction", v.to_string());
        }
        push("t1", self.t1.to_string());
        if let Some(v) = self.dim {
            push("dim", v.to_string());
        }
        push("restarts", self.restarts.to_string());
        push("seed", self.seed.to_string());
        push("tol", self.tol.to_string());
        if let Some(v) = &self.out {
            push("out", v.display().to_string());
        }
        if let Some(v) = self.marked {
            push("marked", v.to_string());
        }
        let rate = self
            .growth_rate
            .to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string();
        push("growth-rate", rate);
        if self.quick {
            a.push("--quick".into());
        }
        a
    }
}

impl Cli {
    pub fn to_args(&self) -> Vec<String> {
        let mut a = vec![self.command.name().to_string()];
        a.extend(self.config.to_args());
        a
    }
}
