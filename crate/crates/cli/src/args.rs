use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncverify_core::supdetect::DetectorKind;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ncverify", version, about = "Superposition-detector verifier experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the mixed protocol on an instance and witness, analytically and by sampling.
    Verify(VerifyArgs),
    /// Emit the allowed (w_D, w_Q) region as CSV and SVG, with a random-witness scatter.
    Region(RegionArgs),
    /// Run the detector on two ensembles that share a density matrix.
    Distinguish(DistinguishArgs),
    /// Resolve protocol constants and the resulting promise gap.
    Constants(ConstantsArgs),
    /// Search for a high-acceptance witness with projected gradient ascent.
    Optimize(OptimizeArgs),
    /// Write a generated Yes or No instance as JSON.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Constants satisfying every inequality of the soundness argument.
    Proof,
    /// Measurable-gap constants (eps = 0.0025, nu_low = nu_high = 0.1).
    Diagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GenLabel {
    Yes,
    No,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random choice of the command.
    #[arg(long, env = "NCV_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "ncverify-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Instance JSON file.
    #[arg(long, required_unless_present = "generate", conflicts_with = "generate")]
    pub instance: Option<PathBuf>,
    /// Generate the instance instead of loading it.
    #[arg(long, value_enum)]
    pub generate: Option<GenLabel>,
    /// Variables of a generated instance.
    #[arg(long = "vars", default_value_t = 4)]
    pub n_vars: usize,
    /// Constraints of a generated instance.
    #[arg(long = "constraints", default_value_t = 6)]
    pub n_constraints: usize,
    /// Arity of a generated instance.
    #[arg(long, default_value_t = 2)]
    pub arity: usize,
    /// Soundness threshold of a generated No instance.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[arg(long, default_value = "noncollapsing")]
    pub detector: DetectorKind,
    #[arg(long, value_enum, default_value = "diagnostic")]
    pub preset: Preset,
    /// Soundness parameter xi of the constraint check.
    #[arg(long, default_value_t = ncverify_core::verifier::DEFAULT_XI)]
    pub xi: f64,
    /// Completeness of the dampened constraint check.
    #[arg(long = "c-yes", default_value_t = ncverify_core::verifier::DEFAULT_C_YES)]
    pub c_yes: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: InstanceArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Witness state JSON; defaults to a satisfying rigid witness (Yes) or the
    /// best rigid witness (otherwise).
    #[arg(long)]
    pub witness: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long, default_value_t = 4)]
    pub kappa: usize,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Override the detector margin used for the boundary.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value = "noncollapsing")]
    pub detector: DetectorKind,
    /// Boundary points.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Random witnesses in the scatter.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Constraint register size of the scattered witnesses.
    #[arg(long = "constraints", default_value_t = 4)]
    pub n_constraints: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DistinguishArgs {
    /// Qubits.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[arg(long, default_value_t = 4)]
    pub kappa: usize,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub source: InstanceArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    #[arg(long = "max-iters", default_value_t = 10_000)]
    pub max_iters: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub label: GenLabel,
    #[arg(long = "vars", default_value_t = 4)]
    pub n_vars: usize,
    #[arg(long = "constraints", default_value_t = 6)]
    pub n_constraints: usize,
    #[arg(long, default_value_t = 2)]
    pub arity: usize,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub delta: f64,
    #[command(flatten)]
    pub common: Common,
}
