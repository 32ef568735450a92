use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symquad_cli::config::Experiment;
use symquad_cli::{run, run_config_file, write_outputs, ExperimentConfig, RunError};
use symquad_core::geometry::{read_quadrature, verify_exactness};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "symquad", version, about = "Symmetrization experiments for rotation-invariant regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available experiments.
    List,
    /// Report the degree of exactness of a quadrature file on SO(3).
    VerifyQuadrature {
        file: PathBuf,
        #[arg(long)]
        lmax: usize,
    },
    /// Simulate perturbed dynamics and report angular-momentum drift.
    Drift {
        /// Comma-separated perturbation strengths.
        #[arg(long, value_delimiter = ',', default_values_t = symquad_core::dynamics::DEFAULT_EPSILONS)]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = symquad_core::dynamics::DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 100)]
        record_every: u64,
        /// Number of random initial conditions; zero uses the default one.
        #[arg(long, default_value_t = 0)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

fn fail(err: RunError) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        RunError::Config(_) => ExitCode::from(EXIT_CONFIG),
        RunError::Numerical(_) => ExitCode::from(EXIT_NUMERICAL),
        RunError::Io(_) => ExitCode::FAILURE,
    }
}

fn report(written: &[PathBuf], aborted: &[(String, f64)]) -> ExitCode {
    for p in written {
        println!("{}", p.display());
    }
    if aborted.is_empty() {
        return ExitCode::SUCCESS;
    }
    for (name, t) in aborted {
        eprintln!("error: {name} became non-finite after t = {t}");
    }
    ExitCode::from(EXIT_NUMERICAL)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => match run_config_file(&config, out.as_deref()) {
            Ok((output, written)) => report(&written, &output.aborted),
            Err(e) => fail(e),
        },
        Command::List => {
            for e in Experiment::ALL {
                println!("{:<22} {}", e.id(), e.description());
            }
            ExitCode::SUCCESS
        }
        Command::VerifyQuadrature { file, lmax } => match read_quadrature(&file) {
            Ok(rule) => {
                println!("{}", verify_exactness(&rule, lmax));
                ExitCode::SUCCESS
            }
            Err(e) => fail(RunError::from(e)),
        },
        Command::Drift {
            eps,
            steps,
            dt,
            record_every,
            seeds,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig {
                experiment: Some(Experiment::Drift),
                eps: Some(eps),
                steps: Some(steps),
                dt: Some(dt),
                record_every: Some(record_every),
                seeds: Some(seeds.max(1)),
                seed: Some(seed),
                initial: Some(if seeds == 0 { "default" } else { "random" }.into()),
                ..Default::default()
            };
            if let Err(e) = cfg.validate() {
                return fail(RunError::Config(e.to_string()));
            }
            match run(&cfg).and_then(|o| write_outputs(&cfg, &o, &out).map(|w| (o, w))) {
                Ok((output, written)) => report(&written, &output.aborted),
                Err(e) => fail(e),
            }
        }
    }
}
