//! Command-line interface: end-to-end flow estimation, the controlled
//! condition grid, and kernel/threading benchmarks.

mod commands;
mod manifest;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use fullflow::{DataTerm, Penalty, SolverConfig};

/// Exit codes: 0 success, 1 usage, 2 input error, 3 resource limit,
/// 4 internal invariant violation.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn input(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<fullflow::Error> for CliError {
    fn from(e: fullflow::Error) -> Self {
        use fullflow::Error::*;
        let code = match &e {
            Config(_) => 1,
            InvalidInput(_)
            | Io { .. }
            | FloBadMagic { .. }
            | FloTruncated { .. }
            | FloDimensions { .. }
            | UnsupportedImage(_)
            | CorruptImage(_)
            | NoValidPixels => 2,
            MemoryBudget { .. } => 3,
            NonConvexPenalty => 4,
        };
        CliError { code, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "fullflow", version, about = "Optical flow by global optimization over regular grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate flow between two images and write all artifacts
    Flow(FlowArgs),
    /// Run the data-term x penalty x truncation condition grid with
    /// per-condition parameter search
    Grid(GridArgs),
    /// Benchmark message kernels and thread scaling
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyArg {
    L1,
    L2,
    Charbonnier,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataTermArg {
    Ncc,
    Hs,
}

fn parse_tau(s: &str) -> Result<f64, String> {
    if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>().map_err(|e| e.to_string())
}

/// Model and solver parameters shared by `flow` and `grid`.
#[derive(Args)]
struct ModelArgs {
    /// Regularization weight
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Smoothness truncation (a number, or "inf" for none)
    #[arg(long, value_parser = parse_tau, default_value = "inf")]
    tau: f64,
    /// Laplace edge-weight scale
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Unary penalty for displacements leaving the image
    #[arg(long, default_value_t = 1.0)]
    zeta: f64,
    /// Forward-backward consistency threshold (squared 4D distance)
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    /// Label radius in solver-resolution pixels
    #[arg(long, default_value_t = 8)]
    radius: u32,
    /// Message-passing iterations
    #[arg(long, default_value_t = 3)]
    iterations: u32,
    /// Smoothness penalty kind
    #[arg(long, value_enum, default_value_t = PenaltyArg::L1)]
    penalty: PenaltyArg,
    /// Epsilon of the Charbonnier penalty
    #[arg(long = "charbonnier-eps", default_value_t = 5.0)]
    charbonnier_eps: f64,
    /// NCC half window (1 = 3x3 patches)
    #[arg(long = "patch-radius", default_value_t = 1)]
    patch_radius: u32,
    /// Integer downsampling factor before matching
    #[arg(long, default_value_t = 3)]
    scale: u32,
    /// Unary data term
    #[arg(long = "data-term", value_enum, default_value_t = DataTermArg::Ncc)]
    data_term: DataTermArg,
    /// Worker threads (defaults to FULLFLOW_THREADS or all cores)
    #[arg(long, env = "FULLFLOW_THREADS")]
    threads: Option<usize>,
    /// Abort before allocating more than this many GiB for the big buffers
    #[arg(long = "memory-cap-gb", default_value_t = 8.0)]
    memory_cap_gb: f64,
}

impl ModelArgs {
    fn solver_config(&self) -> SolverConfig {
        let threads = self.threads.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        });
        SolverConfig {
            lambda: self.lambda,
            tau: self.tau,
            beta: self.beta,
            zeta: self.zeta,
            delta: self.delta,
            radius: self.radius,
            iterations: self.iterations,
            penalty: match self.penalty {
                PenaltyArg::L1 => Penalty::L1,
                PenaltyArg::L2 => Penalty::SquaredL2,
                PenaltyArg::Charbonnier => Penalty::Charbonnier { epsilon: self.charbonnier_eps },
            },
            patch_radius: self.patch_radius,
            scale: self.scale,
            data_term: match self.data_term {
                DataTermArg::Ncc => DataTerm::TruncatedNcc,
                DataTermArg::Hs => DataTerm::PixelwiseHs,
            },
            threads: threads.max(1),
        }
    }

    fn memory_cap_bytes(&self) -> u64 {
        (self.memory_cap_gb * (1u64 << 30) as f64) as u64
    }
}

#[derive(Args)]
struct FlowArgs {
    /// First input image (PPM or PNG)
    image1: PathBuf,
    /// Second input image
    image2: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Ground-truth .flo for metrics and an error map
    #[arg(long)]
    gt: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct GridArgs {
    /// Manifest file: one "first second gt" line per pair
    #[arg(long)]
    manifest: PathBuf,
    /// TOML file overriding the searched parameter ranges
    #[arg(long)]
    ranges: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Label radii for the kernel scaling measurement
    #[arg(long, value_delimiter = ',', default_values_t = vec![10u32, 20, 40, 80])]
    radii: Vec<u32>,
    /// Thread counts for the sweep timing ("max" resolves to all cores)
    #[arg(long = "threads-list", value_delimiter = ',', default_value = "1,2,max")]
    threads_list: Vec<String>,
    /// Instance width for the thread benchmark
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Instance height for the thread benchmark
    #[arg(long, default_value_t = 48)]
    height: usize,
    /// Label radius for the thread benchmark
    #[arg(long, default_value_t = 8)]
    radius: u32,
    /// Iterations timed per thread count
    #[arg(long, default_value_t = 2)]
    iterations: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Flow(args) => commands::run_flow(args),
        Command::Grid(args) => commands::run_grid_cmd(args),
        Command::Bench(args) => commands::run_bench(args),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}
