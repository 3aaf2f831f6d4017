mod commands;
mod error;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "ecdf-bands",
    version,
    about = "Simultaneous ECDF confidence bands for PIT values and MCMC chains"
)]
struct Cli {
    /// Worker threads for replicate loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Cache if it covers the query, else optimize for up to 3 chains, else simulate.
    Auto,
    Simulate,
    Optimize,
    Cache,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TieArg {
    Deterministic,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKindArg {
    Ecdf,
    Diff,
    Hist,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if a > 0.0 && a <= 0.5 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 0.5], got {a}"))
    }
}

/// Options shared by every command that builds bands.
#[derive(Args, Clone, Debug)]
pub struct BandOpts {
    #[arg(long, default_value = "0.05", value_parser = parse_alpha)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
    /// Replicates for the simulation method.
    #[arg(long = "m-reps", default_value_t = 10_000)]
    pub m_reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum number of evaluation points.
    #[arg(long = "grid-k", default_value_t = 100)]
    pub grid_k: usize,
    #[arg(long = "tie-policy", value_enum, default_value = "deterministic")]
    pub tie_policy: TieArg,
    /// Precomputed gamma grid.
    #[arg(long, env = "ECDF_BANDS_CACHE")]
    pub cache: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Test PIT values (one column) or compare chains (several columns).
    Test {
        input: PathBuf,
        #[command(flatten)]
        opts: BandOpts,
        /// Report JSON path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write an SVG plot.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Plot the ECDF difference rather than the ECDF.
        #[arg(long)]
        diff: bool,
    },
    /// Empirical PIT values of draws against per-draw comparison samples.
    Pit {
        /// One draw per row.
        #[arg(long)]
        draws: PathBuf,
        /// One comparison sample per row, all of the same size.
        #[arg(long)]
        comparison: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rejection rates under a transformation family.
    Power {
        #[arg(long, default_value = "A")]
        family: String,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.8,1,1.25,2,3")]
        ks: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        chains: usize,
        /// Any of bands, t1, w2, u2, ks.
        #[arg(long, value_delimiter = ',', default_value = "bands")]
        tests: Vec<String>,
        #[arg(long, default_value = "0.05", value_parser = parse_alpha)]
        alpha: f64,
        #[arg(long = "m-reps", default_value_t = 10_000)]
        m_reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Thin chains by an ESS-based factor.
    Thin {
        input: PathBuf,
        #[arg(long, default_value = "BULK_TAIL_MIN")]
        strategy: String,
        /// Thinned chains CSV (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// ESS report and plan JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build or query gamma values.
    Gamma {
        #[command(subcommand)]
        action: GammaAction,
    },
    /// Render an ECDF, ECDF difference or rank histogram plot.
    Plot {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "diff")]
        kind: PlotKindArg,
        #[command(flatten)]
        opts: BandOpts,
        /// Histogram bins (default: min(N, 20)).
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        title: Option<String>,
        /// SVG path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the plot-data JSON.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
pub enum GammaAction {
    /// Precompute a grid over N, chain counts and alphas.
    Build {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        chains: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.05")]
        alpha: Vec<f64>,
        #[arg(long = "grid-k", default_value_t = 100)]
        grid_k: usize,
        #[arg(long = "m-reps", default_value_t = 10_000)]
        m_reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// gamma for one (N, L, alpha).
    Get {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        chains: usize,
        #[command(flatten)]
        opts: BandOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Test {
            input,
            opts,
            out,
            svg,
            diff,
        } => commands::test(&input, &opts, out.as_deref(), svg.as_deref(), diff),
        Command::Pit {
            draws,
            comparison,
            out,
        } => commands::pit(&draws, &comparison, out.as_deref()),
        Command::Power {
            family,
            ks,
            n,
            chains,
            tests,
            alpha,
            m_reps,
            seed,
            out,
        } => commands::power(&commands::PowerArgs {
            family,
            ks,
            n,
            chains,
            tests,
            alpha,
            m_reps,
            seed,
            out,
        }),
        Command::Thin {
            input,
            strategy,
            out,
            report,
        } => commands::thin(&input, &strategy, out.as_deref(), report.as_deref()),
        Command::Gamma { action } => commands::gamma(action),
        Command::Plot {
            input,
            kind,
            opts,
            bins,
            title,
            out,
            data,
        } => commands::plot(&commands::PlotArgs {
            input,
            kind,
            opts,
            bins,
            title,
            out,
            data,
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
