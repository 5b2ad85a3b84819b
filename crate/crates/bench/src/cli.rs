use std::path::PathBuf;
use std::str::FromStr;

use adasketch::SketchFamily;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "adasketch",
    version,
    about = "Sketch-preconditioned least-squares solvers and benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic problem with geometrically decaying singular values.
    Gen(GenArgs),
    /// Run one solver and write its trace.
    Solve(SolveArgs),
    /// Run several solvers on the same problem and write one long-format trace.
    Compare(CompareArgs),
    /// Monte Carlo study of sketch quality over a grid of sketch sizes.
    Concentration(ConcentrationArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0.995)]
    pub decay: f64,
    #[arg(long)]
    pub nu: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelModeArg {
    /// Last column holds class labels (one-hot encoded).
    Class,
    /// Last column holds a real target.
    Real,
    /// No labels.
    None,
}

/// Where the problem comes from.
#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Directory written by `gen`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Numeric CSV; targets come from the last column.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LabelModeArg::Class)]
    pub label_mode: LabelModeArg,
    /// Ridge parameter λ for CSV data (ν = √λ).
    #[arg(long)]
    pub lambda_reg: Option<f64>,
    /// Random Fourier features bandwidth (CSV only).
    #[arg(long)]
    pub rff_gamma: Option<f64>,
    /// Random Fourier features output dimension (CSV only).
    #[arg(long)]
    pub rff_dim: Option<usize>,
    /// Overrides ν for `--data` directories.
    #[arg(long)]
    pub nu: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Direct,
    Cg,
    Ihs,
    Pcg,
    AdaIhs,
    AdaPcg,
    PolyakIhs,
}

impl SolverKind {
    pub fn is_adaptive(self) -> bool {
        matches!(self, SolverKind::AdaIhs | SolverKind::AdaPcg)
    }

    pub fn uses_sketch(self) -> bool {
        !matches!(self, SolverKind::Direct | SolverKind::Cg)
    }

    pub fn uses_rho(self) -> bool {
        matches!(
            self,
            SolverKind::Ihs | SolverKind::PolyakIhs | SolverKind::AdaIhs | SolverKind::AdaPcg
        )
    }
}

/// A sketch size: absolute (`512`) or a multiple of d (`2d`, `0.5d`, `d`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SizeSpec {
    Rows(usize),
    TimesD(f64),
}

impl SizeSpec {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            SizeSpec::Rows(m) => m,
            SizeSpec::TimesD(k) => ((k * d as f64).ceil() as usize).max(1),
        }
    }
}

impl FromStr for SizeSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || {
            CliError::Flag(format!(
                "sketch size {s:?} is neither a count nor a multiple of d"
            ))
        };
        if let Some(k) = s.strip_suffix('d') {
            let k = if k.is_empty() {
                1.0
            } else {
                k.parse::<f64>().map_err(|_| bad())?
            };
            if !(k > 0.0 && k.is_finite()) {
                return Err(bad());
            }
            return Ok(SizeSpec::TimesD(k));
        }
        match s.parse::<usize>() {
            Ok(m) if m >= 1 => Ok(SizeSpec::Rows(m)),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for SizeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SizeSpec::Rows(m) => write!(f, "{m}"),
            SizeSpec::TimesD(k) => write!(f, "{k}d"),
        }
    }
}

fn parse_size(s: &str) -> Result<SizeSpec, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

fn parse_family(s: &str) -> Result<SketchFamily, String> {
    s.parse().map_err(|e: adasketch::Error| e.to_string())
}

/// Solver settings shared by `solve` and each `compare --run`.
#[derive(Debug, Args, Clone, Default)]
pub struct RunFlags {
    #[arg(long, value_parser = parse_family)]
    pub sketch: Option<SketchFamily>,
    /// Fixed sketch size (count or multiple of d); default 2d.
    #[arg(long, value_parser = parse_size)]
    pub m: Option<SizeSpec>,
    /// Initial sketch size of the adaptive solvers; default 1.
    #[arg(long, value_parser = parse_size)]
    pub m_init: Option<SizeSpec>,
    /// Rate parameter ρ; default 1/8.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Iteration budget.
    #[arg(long = "T")]
    pub iterations: Option<usize>,
    /// SJLT nonzeros per column.
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop once δ̃_t ≤ tol·δ̃_0.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub solver: SolverKind,
    #[command(flatten)]
    pub run: RunFlags,
    #[command(flatten)]
    pub data: DataArgs,
    /// Largest d for which the exact solution is computed for exact errors.
    #[arg(long, default_value_t = 4096)]
    pub exact_cap: usize,
    /// Trace CSV path; the manifest is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// `"<solver> key=value ... label=<name>"`; keys: sketch, m, m-init, rho, T, s, seed, tol, label.
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    /// Default seed for runs that do not set one.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 4096)]
    pub exact_cap: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// Probability of ‖C_S − I‖₂ ≤ max{√ρ, ρ}.
    Event,
    /// Two-sided Gaussian deviation bound.
    GaussianDeviation,
    /// Randomized Hadamard row-norm bound (ignores the m grid).
    Rownorm,
}

#[derive(Debug, Args)]
pub struct ConcentrationArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_family, default_value = "gaussian")]
    pub family: SketchFamily,
    /// Comma-separated sketch sizes (counts or multiples of d).
    #[arg(long, value_delimiter = ',', value_parser = parse_size)]
    pub m_grid: Vec<SizeSpec>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.25)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = CheckKind::Event)]
    pub check: CheckKind,
    /// Report JSON path; the manifest is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}
