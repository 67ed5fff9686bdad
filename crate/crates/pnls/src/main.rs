//! Command-line driver: dispatch experiments from flat key=value configs,
//! with a config-free mode for the exponent calculus.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pnls::config::{parse_config_for, Experiment, SimConfig};
use pnls::exponents::{
    parse_rational, scan_witnesses, solve_system_with_bound, NonlinearityContext,
    DEFAULT_DENOMINATOR_BOUND,
};
use pnls::runner::run_experiment;

#[derive(Parser)]
#[command(
    name = "pnls",
    about = "Pseudospectral laboratory for the nonlinear Schrodinger equation on product domains",
    version
)]
struct Cli {
    /// Experiment configuration file (flat key=value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parallel workers for sweep fan-out (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Strichartz exponent calculus: print the deterministic witness
    /// or dump the whole lattice scan as CSV.
    Exponents {
        /// Euclidean dimension (config-free mode).
        #[arg(long)]
        n: Option<u32>,
        /// Nonlinearity power as a rational string like 7/2 (config-free mode).
        #[arg(long)]
        mu: Option<String>,
        /// Reciprocal-denominator bound for the scan.
        #[arg(long, default_value_t = DEFAULT_DENOMINATOR_BOUND)]
        denominator_bound: u32,
        /// Dump every lattice witness as CSV instead of the first one.
        #[arg(long)]
        scan: bool,
    },
    /// Split-step integration with per-sample conservation diagnostics.
    Evolve,
    /// Duhamel fixed-point iteration from the free evolution.
    Picard,
    /// Scattering diagnostics: wave data, Cauchy windows, tails.
    Scatter,
    /// Randomized product-inequality sweep on the torus.
    Fracineq,
    /// Free dispersive-decay fit.
    Decay,
    /// Parallel sweep over the configured data sizes.
    Sweep,
}

fn load_config(cli: &Cli, experiment: Experiment) -> Result<SimConfig, String> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| format!("`pnls {}` needs --config", experiment.name()))?;
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg = parse_config_for(&text, Some(experiment)).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(outdir) = &cli.outdir {
        cfg.outdir = outdir.clone();
    }
    Ok(cfg)
}

fn exponents_direct(n: u32, mu: &str, bound: u32, scan: bool) -> Result<(), String> {
    let mu = parse_rational(mu).map_err(|e| format!("--mu: {e}"))?;
    let ctx = NonlinearityContext::new(n, 1, mu, -1.0, 1.0).map_err(|e| e.to_string())?;
    if scan {
        let witnesses = scan_witnesses(&ctx, bound).map_err(|e| e.to_string())?;
        println!("q,r,qt,rt,l,p");
        for sys in witnesses {
            println!(
                "{},{},{},{},{},{}",
                sys.pair.q, sys.pair.r, sys.dual_pair.q, sys.dual_pair.r,
                sys.derived_pair.q, sys.derived_pair.r,
            );
        }
    } else {
        let sys = solve_system_with_bound(&ctx, bound).map_err(|e| e.to_string())?;
        println!(
            "q={} r={} qt={} rt={} l={} p={} s={}",
            sys.pair.q, sys.pair.r, sys.dual_pair.q, sys.dual_pair.r,
            sys.derived_pair.q, sys.derived_pair.r, sys.ctx.s,
        );
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), String> {
    let experiment = match &cli.command {
        Command::Exponents { n, mu, denominator_bound, scan } => {
            if let (Some(n), Some(mu)) = (n, mu) {
                return exponents_direct(*n, mu, *denominator_bound, *scan);
            }
            if cli.config.is_none() {
                return Err("`pnls exponents` needs either --n and --mu or --config".into());
            }
            Experiment::Exponents
        }
        Command::Evolve => Experiment::Evolve,
        Command::Picard => Experiment::Picard,
        Command::Scatter => Experiment::Scatter,
        Command::Fracineq => Experiment::Fracineq,
        Command::Decay => Experiment::Decay,
        Command::Sweep => Experiment::Sweep,
    };
    let cfg = load_config(cli, experiment)?;
    let paths = run_experiment(&cfg, cli.jobs).map_err(|e| e.to_string())?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
