use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod manifest;
mod run;

#[derive(Parser, Debug)]
#[command(name = "cosparse", version, about = "Cosparse analysis model experiments")]
struct Cli {
    /// Master seed for every random draw (a config file may also set it;
    /// this flag wins). Defaults to 0.
    #[arg(long, global = true, env = "COSPARSE_SEED")]
    seed: Option<u64>,

    /// Directory receiving output files and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an analysis operator and write `operator.txt`.
    GenOperator(GenOperatorArgs),
    /// Draw a cosparse signal and write `signal.txt`.
    GenSignal(GenSignalArgs),
    /// Measure a signal and write `instance.txt`.
    Measure(MeasureArgs),
    /// Recover a signal from an instance and write `solution.txt`.
    Solve(SolveArgs),
    /// Build a certified random packing and write `packing.txt`.
    Pack(PackArgs),
    /// Check a packing file exhaustively.
    VerifyPack(VerifyPackArgs),
    /// Evaluate the closed-form minimax lower bounds.
    Bounds {
        #[command(subcommand)]
        action: BoundsAction,
    },
    /// Run a phase-transition grid and write `phase.csv` and `phase.svg`.
    Phase(PhaseArgs),
    /// Monte Carlo check of one probability bound.
    McVerify(McVerifyArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    Dif2d,
    Gaussian,
}

#[derive(Args, Debug)]
struct GenOperatorArgs {
    #[arg(long, value_enum)]
    kind: Model,
    /// Image side (dif2d).
    #[arg(long, required_if_eq("kind", "dif2d"))]
    n: Option<usize>,
    /// Rows (gaussian).
    #[arg(long, required_if_eq("kind", "gaussian"))]
    p: Option<usize>,
    /// Columns (gaussian).
    #[arg(long, required_if_eq("kind", "gaussian"))]
    d: Option<usize>,
    /// Write only the header; a Gaussian operator is rebuilt from its seed.
    #[arg(long)]
    header_only: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Source {
    GaussianK1,
    RandomWalk,
    PackingPattern,
}

#[derive(Args, Debug)]
struct GenSignalArgs {
    #[arg(long, value_enum)]
    source: Source,
    /// Gaussian operator file (gaussian-k1).
    #[arg(long, required_if_eq("source", "gaussian-k1"))]
    operator: Option<PathBuf>,
    /// Image side (random-walk, packing-pattern).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    max_retries: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum NormArg {
    UnitColumns,
    OpNorm,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long)]
    signal: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = NormArg::UnitColumns)]
    normalization: NormArg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    L1,
    L0,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    operator: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverArg::L1)]
    solver: SolverArg,
    /// Flat key = value file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    l1_tol: Option<f64>,
    #[arg(long)]
    l1_max_iter: Option<usize>,
    #[arg(long)]
    l1_rho: Option<f64>,
    #[arg(long)]
    l0_b_max: Option<usize>,
    #[arg(long)]
    l0_eq_tol: Option<f64>,
}

#[derive(Args, Debug)]
struct PackArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Image side (dif2d).
    #[arg(long, required_if_eq("model", "dif2d"))]
    n: Option<usize>,
    /// Signal dimension (gaussian).
    #[arg(long, required_if_eq("model", "gaussian"))]
    d: Option<usize>,
    /// Operator rows (gaussian).
    #[arg(long, required_if_eq("model", "gaussian"))]
    p: Option<usize>,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 20)]
    max_restarts: usize,
}

#[derive(Args, Debug)]
struct VerifyPackArgs {
    #[arg(long)]
    packing: PathBuf,
    /// Distance to check against; defaults to the file's own delta.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum BoundsAction {
    /// Print one bound with six significant digits.
    Eval(BoundsEvalArgs),
}

#[derive(Args, Debug)]
struct BoundsEvalArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    m: usize,
    /// Operator rows (gaussian only).
    #[arg(long, required_if_eq("model", "gaussian"))]
    p: Option<usize>,
    #[arg(long)]
    sigma: f64,
}

#[derive(Args, Debug)]
struct PhaseArgs {
    #[arg(long, value_enum)]
    model: Option<Model>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Signal dimension (gaussian).
    #[arg(long)]
    d: Option<usize>,
    /// Image side (dif2d).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated δ = m/d values.
    #[arg(long)]
    delta: Option<String>,
    /// Comma-separated ρ = p/d values (gaussian).
    #[arg(long)]
    rho: Option<String>,
    /// Number of cosparsity bins (dif2d).
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    pilot_images: Option<usize>,
    #[arg(long)]
    gen_budget: Option<usize>,
    #[arg(long)]
    l1_tol: Option<f64>,
    #[arg(long)]
    l1_max_iter: Option<usize>,
    #[arg(long)]
    l1_rho: Option<f64>,
    /// d = 200 with 500 trials per cell unless overridden.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args, Debug)]
struct McVerifyArgs {
    /// One of L3-collision, L5-overlap, L4-collision, L6-distance, L7-bayes.
    #[arg(long)]
    lemma: String,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 60)]
    p: usize,
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// ε/2σ for the Bayes check.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(run::Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(run::Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
