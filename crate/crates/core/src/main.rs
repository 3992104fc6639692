//! `dml-lab` command line: run experiments, the smoothing sweep, print
//! oracle grids and run the self-checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dml_lab::harness::{
    emit_results, medians, oracle_at, run_experiment, run_smoothing_sweep, ExperimentConfig, ExperimentKind,
    MethodName,
};
use dml_lab::selftest::{gradient_suite, unbiasedness_suite, GRADIENT_NETWORKS, UNBIASEDNESS_SAMPLES};
use dml_lab::{DmlError, Result};

#[derive(Parser)]
#[command(name = "dml-lab", version, about = "Differential ML with pathwise and likelihood-ratio labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every configured method.
    Run(RunArgs),
    /// Smoothed-pathwise RMSE across ramp widths, with standard and LRM references.
    Sweep(RunArgs),
    /// Print oracle price, delta and gamma on the evaluation grid as CSV.
    Oracle(RunArgs),
    /// Run the estimator unbiasedness and network gradient checks.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Samples per unbiasedness check.
        #[arg(long, default_value_t = UNBIASEDNESS_SAMPLES)]
        samples: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file, or the name of a built-in experiment preset.
    #[arg(long)]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let path = Path::new(&self.config);
        let mut cfg = if path.exists() {
            ExperimentConfig::load(path)?
        } else {
            ExperimentConfig::preset(ExperimentKind::parse(&self.config).map_err(|_| {
                DmlError::Config(format!("{} is neither a file nor an experiment name", self.config))
            })?)
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.replications {
            cfg.replications = n;
        }
        if let Some(names) = &self.method {
            cfg.methods = names.iter().map(|n| MethodName::parse(n.trim())).collect::<Result<_>>()?;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("results").join(cfg.experiment.name()))
}

fn print_medians(run: &dml_lab::harness::RunOutput) {
    println!("method,eps_multiplier,m,replications,price_rmse,delta_rmse,gamma_rmse,rmse_pct_of_price");
    for m in medians(run) {
        let eps = m.eps_multiplier.map(|e| e.to_string()).unwrap_or_default();
        let gamma = m.gamma_rmse.map(|g| format!("{g:.6}")).unwrap_or_default();
        println!(
            "{},{eps},{},{},{:.6},{:.6},{gamma},{:.4}",
            m.method.name(),
            m.m,
            m.replications,
            m.price_rmse,
            m.delta_rmse,
            m.rmse_pct_of_price
        );
    }
    for f in &run.failures {
        eprintln!("failed: {} replication {}: {}", f.variant.method.name(), f.replication, f.message);
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let out = if cfg.experiment == ExperimentKind::SmoothingSweep {
                let (run, table) = run_smoothing_sweep(&cfg)?;
                emit_results(&run, Some(&table), &output_dir(&cfg))?;
                run
            } else {
                let run = run_experiment(&cfg)?;
                emit_results(&run, None, &output_dir(&cfg))?;
                run
            };
            print_medians(&out);
            eprintln!("results written to {}", output_dir(&cfg).display());
            Ok(out.failures.is_empty())
        }
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            let (run, table) = run_smoothing_sweep(&cfg)?;
            emit_results(&run, Some(&table), &output_dir(&cfg))?;
            println!("method,eps_multiplier,price_rmse_pct,replications");
            for row in &table {
                let eps = row.eps_multiplier.map(|e| e.to_string()).unwrap_or_default();
                println!("{},{eps},{:.4},{}", row.method.name(), row.price_rmse_pct, row.replications);
            }
            eprintln!("results written to {}", output_dir(&cfg).display());
            Ok(run.failures.is_empty())
        }
        Command::Oracle(args) => {
            let cfg = args.resolve()?;
            println!("spot,price,delta,gamma");
            for spot in cfg.eval.points() {
                let o = oracle_at(&cfg, spot)?;
                let gamma = o.gamma.map(|g| g.to_string()).unwrap_or_default();
                println!("{spot},{},{},{gamma}", o.price, o.mean_delta());
            }
            Ok(true)
        }
        Command::Selftest { seed, samples } => {
            let mut ok = true;
            for outcome in unbiasedness_suite(samples, seed)?.into_iter().chain(gradient_suite(GRADIENT_NETWORKS, seed)?) {
                ok &= outcome.passed;
                println!("{outcome}");
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
