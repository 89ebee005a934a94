mod commands;
mod demo;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynrecon::models::Demo;
use dynrecon::{Error, RankTolerance};

/// Null-space chains, observability ranks and state reconstruction for
/// linear dynamics seen through a fixed projection.
///
/// Exit codes: 0 success, 1 a demo check failed, 2 invalid input,
/// 3 numerical failure.
#[derive(Parser)]
#[command(name = "dynrecon", version)]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, value_name = "DIR")]
    outdir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the null-space chain and its optimality report.
    Chain(ChainArgs),
    /// Propagate an initial state and write the measurements.
    Simulate(SimulateArgs),
    /// Recover the initial state from a measurement file.
    Reconstruct(ReconstructArgs),
    /// Run a genericity or conditioning study and print CSV.
    Experiment(ExperimentArgs),
    /// Run the built-in checks and write their artifacts.
    Demo(DemoArgs),
}

#[derive(Args, Clone)]
pub struct SystemArgs {
    /// Built-in system: cyclic, random6, l1grid or l2grid.
    #[arg(long, conflicts_with_all = ["dynamics", "projection"])]
    pub demo: Option<Demo>,

    /// Seed for the random6 demo.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Dynamics matrix file; one file per step with --time-varying.
    #[arg(long, num_args = 1.., value_name = "FILE", requires = "projection")]
    pub dynamics: Vec<PathBuf>,

    /// Projection matrix file.
    #[arg(long, value_name = "FILE")]
    pub projection: Option<PathBuf>,

    /// Treat the dynamics files as L_1, L_2, ... in order.
    #[arg(long)]
    pub time_varying: bool,

    /// Side of the pixel grid the state lives on, for image output.
    #[arg(long, value_name = "SIDE")]
    pub grid: Option<usize>,
}

#[derive(Args)]
struct ChainArgs {
    #[command(flatten)]
    system: SystemArgs,

    /// Maximum number of chain members (default n + 1).
    #[arg(long)]
    max_steps: Option<usize>,

    /// Relative rank threshold, or "machine".
    #[arg(long, default_value_t = RankTolerance::default())]
    tol: RankTolerance,

    /// Also write the chain as CSV (columns k,dim,transverse).
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemArgs,

    /// Initial state as a matrix file (n x 1 or 1 x n).
    #[arg(long, value_name = "FILE", conflicts_with = "blob", required_unless_present = "blob")]
    x0: Option<PathBuf>,

    /// Gaussian blob initial state on the grid: ci,cj,sigma.
    #[arg(long, value_name = "CI,CJ,SIGMA")]
    blob: Option<String>,

    /// Number of states (and measurements).
    #[arg(long)]
    steps: usize,

    /// Prefix of the output files.
    #[arg(long, default_value = "sim")]
    out: String,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    system: SystemArgs,

    /// Measurement file with columns t,component_index,value.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,

    /// Prefix of the output files.
    #[arg(long, default_value = "rec")]
    out: String,

    /// Relative rank threshold, or "machine".
    #[arg(long, default_value_t = RankTolerance::MachinePrecision)]
    tol: RankTolerance,
}

/// Genericity output is field,value CSV (n, m, trials, seed, time_varying,
/// random_projection, count_optimal, count_all_transverse,
/// fraction_optimal, fraction_all_transverse, failing_seeds,
/// lower_bound_violations, consistency_violations). The per-trial detail
/// has columns trial,seed,dims,k_star,lower_bound,optimal,all_transverse.
/// Conditioning output has columns T,rank,condition.
#[derive(Args)]
struct ExperimentArgs {
    /// n m trials seed
    #[arg(long, num_args = 4, value_names = ["N", "M", "TRIALS", "SEED"], conflicts_with = "condstudy", required_unless_present = "condstudy")]
    genericity: Option<Vec<u64>>,

    /// Draw a fresh operator for every step.
    #[arg(long, requires = "genericity")]
    time_varying: bool,

    /// Draw a Gaussian projection per trial instead of the first m rows of I.
    #[arg(long, requires = "genericity")]
    random_projection: bool,

    /// Per-trial CSV output.
    #[arg(long, value_name = "PATH", requires = "genericity")]
    detail: Option<PathBuf>,

    /// demo t_min t_max
    #[arg(long, num_args = 3, value_names = ["DEMO", "T_MIN", "T_MAX"])]
    condstudy: Option<Vec<String>>,

    /// Seed for the random6 demo in --condstudy.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Relative rank threshold, or "machine" (default: 1e-10 for
    /// genericity, machine for conditioning).
    #[arg(long)]
    tol: Option<RankTolerance>,

    /// Write the report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    /// Artifact directory, relative to --outdir.
    #[arg(long, default_value = "demo")]
    out: PathBuf,
}

/// Resolves relative output paths against --outdir.
pub struct Output {
    root: Option<PathBuf>,
}

impl Output {
    pub fn path(&self, p: impl AsRef<Path>) -> PathBuf {
        let p = p.as_ref();
        match &self.root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn ensure_parent(&self, p: &Path) -> dynrecon::Result<()> {
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.to_path_buf(),
                source: e,
            })?;
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Output { root: cli.outdir };
    let result = match cli.command {
        Command::Chain(a) => commands::chain(&out, &a.system, a.max_steps, a.tol, a.csv.as_deref()),
        Command::Simulate(a) => commands::simulate(&out, &a.system, a.x0.as_deref(), a.blob.as_deref(), a.steps, &a.out),
        Command::Reconstruct(a) => commands::reconstruct(&out, &a.system, &a.data, &a.out, a.tol),
        Command::Experiment(a) => match (a.genericity, a.condstudy) {
            (Some(g), _) => commands::genericity(
                &out,
                &g,
                a.time_varying,
                a.random_projection,
                a.tol.unwrap_or_default(),
                a.detail.as_deref(),
                a.out.as_deref(),
            ),
            (None, Some(c)) => commands::condstudy(&out, &c, a.seed, a.tol.unwrap_or(RankTolerance::MachinePrecision), a.out.as_deref()),
            (None, None) => unreachable!("clap requires one of the studies"),
        },
        Command::Demo(a) => match demo::run(&out, &a.out) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
