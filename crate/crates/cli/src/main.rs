mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Tests of mutual independence built on ordered squared correlations.
#[derive(Parser, Debug)]
#[command(name = "ltest", version, about)]
struct Cli {
    /// Worker threads; 0 uses one per core. Outputs do not depend on it.
    #[arg(long, global = true, env = "LTEST_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run tests on a CSV file and write a JSON report.
    Test(TestArgs),
    /// Build a permutation null ensemble for a CSV file and save it as JSON.
    Null(TestArgs),
    /// Empirical size under simulated independent data (CSV table).
    Size(SimArgs),
    /// Size-corrected power against block alternatives (CSV table).
    Power(SimArgs),
}

#[derive(Args, Debug, Clone)]
struct TestArgs {
    /// Input CSV: one row per observation, one column per variable.
    #[arg(long)]
    input: PathBuf,
    /// The first row holds data, not column names.
    #[arg(long)]
    no_header: bool,
    /// Comma-separated: t5, tk=<int>, tgamma=<float>, tc, sc, j, lx, f.
    /// Defaults to tc plus every baseline.
    #[arg(long)]
    method: Option<String>,
    /// Permutation replicates.
    #[arg(long = "B", default_value_t = 400)]
    b: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Level used for the `reject` field of the report.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Explicit diverging k values for tc, comma-separated.
    #[arg(long)]
    k_list: Option<String>,
    /// Build the dyadic grid from p instead of the number of pairs.
    #[arg(long)]
    literal_p: bool,
    /// Use (1 + #{T* >= T}) / (B + 1) instead of #{T* > T} / B.
    #[arg(long)]
    conservative: bool,
    /// Reuse this ensemble file when it matches, otherwise build and store it.
    #[arg(long)]
    null_cache: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock time in the report (makes it run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// gaussian, uniform or t=<nu>.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated levels.
    #[arg(long)]
    alpha: Option<String>,
    /// Replicates (alternative replicates per m for power).
    #[arg(long = "R")]
    r: Option<usize>,
    /// Null replicates for the power critical values; defaults to R.
    #[arg(long = "R0")]
    r0: Option<usize>,
    #[arg(long = "B")]
    b: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Block sizes, comma-separated.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    k_list: Option<String>,
    #[arg(long)]
    literal_p: bool,
    #[arg(long)]
    conservative: bool,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG chart here.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start thread pool: {e}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Test(a) => commands::test(&a),
        Command::Null(a) => commands::null(&a),
        Command::Size(a) => commands::simulate(&a, commands::Experiment::Size),
        Command::Power(a) => commands::simulate(&a, commands::Experiment::Power),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
