//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 other failure, 2 config error, 3 IO or parse
//! error, 4 filter divergence (only with `--fail-on-divergence`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ttsrkf::harness::config::{DatasetKind, ExperimentConfig, FilterKind};
use ttsrkf::harness::data::{simulate_tanks, write_dataset_csv, write_tanks_csv};
use ttsrkf::harness::output::{write_joined_metrics, write_plot_svg};
use ttsrkf::harness::runner::{
    build_dataset, experiment_name, output_dir, run_experiment, write_outputs, SIMULATED_TANKS_LEN,
};
use ttsrkf::Error;

#[derive(Parser)]
#[command(name = "ttsrkf", version, about = "Tensor-train square-root Kalman filter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write metrics.csv and predictions.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set sqrt_rank=8`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with code 4 if a tnkf run diverges.
        #[arg(long)]
        fail_on_divergence: bool,
    },
    /// Run several experiments and join their metrics on `t`.
    Compare {
        #[arg(long, value_delimiter = ',', required = true)]
        configs: Vec<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "out/compare")]
        out: PathBuf,
    },
    /// Generate a dataset CSV.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long)]
        out: PathBuf,
        /// Optional config supplying sizes and seeds.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Gp,
    Volterra,
    Tanks,
}

enum Failure {
    Lib(Error),
    Diverged(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn load_config(path: Option<&Path>, set: &[String]) -> Result<ExperimentConfig, Error> {
    match path {
        Some(p) => ExperimentConfig::from_file(p, set),
        None => ExperimentConfig::parse("", set),
    }
}

fn run(config: &Path, set: &[String], out: Option<&Path>, fail_on_divergence: bool) -> Result<(), Failure> {
    let cfg = load_config(Some(config), set)?;
    let name = experiment_name(&cfg, Some(config));
    let dir = output_dir(&cfg, &name, out);
    let result = run_experiment(&cfg)?;
    write_outputs(&dir, &name, &cfg, &result)?;
    match result.diverged_at {
        Some(t) => {
            println!("{name}: diverged at update {t}; outputs in {}", dir.display());
            if fail_on_divergence && cfg.filter == FilterKind::Tnkf {
                return Err(Failure::Diverged(t));
            }
        }
        None => {
            if let Some(last) = result.rows.last() {
                println!(
                    "{name}: t={} rmse={} nll={}; outputs in {}",
                    last.t,
                    last.rmse,
                    last.nll,
                    dir.display()
                );
            }
        }
    }
    Ok(())
}

fn compare(configs: &[PathBuf], set: &[String], out: &Path) -> Result<(), Failure> {
    let mut series = Vec::new();
    for path in configs {
        let cfg = load_config(Some(path), set)?;
        let name = experiment_name(&cfg, Some(path));
        let dir = out.join(&name);
        let result = run_experiment(&cfg)?;
        write_outputs(&dir, &name, &cfg, &result)?;
        series.push((name, result.rows.iter().map(|r| (r.t, r.rmse, r.nll)).collect()));
    }
    write_joined_metrics(&out.join("compare.csv"), &series)?;
    write_plot_svg(&out.join("compare.svg"), &series)?;
    println!("joined metrics in {}", out.join("compare.csv").display());
    Ok(())
}

fn generate(kind: GenKind, out: &Path, config: Option<&Path>, set: &[String]) -> Result<(), Failure> {
    let mut cfg = load_config(config, set)?;
    match kind {
        GenKind::Tanks => {
            write_tanks_csv(out, &simulate_tanks(SIMULATED_TANKS_LEN, cfg.data_seed()))?;
        }
        GenKind::Gp | GenKind::Volterra => {
            cfg.dataset = if matches!(kind, GenKind::Gp) {
                DatasetKind::Gp
            } else {
                DatasetKind::Volterra
            };
            cfg.validate()?;
            write_dataset_csv(out, &build_dataset(&cfg)?)?;
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run {
            config,
            set,
            out,
            fail_on_divergence,
        } => run(config, set, out.as_deref(), *fail_on_divergence),
        Command::Compare { configs, set, out } => compare(configs, set, out),
        Command::Gen { kind, out, config, set } => generate(*kind, out, config.as_deref(), set),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diverged(t)) => {
            eprintln!("error: filter diverged at update {t}");
            ExitCode::from(4)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Io { .. } | Error::Parse { .. } => 3,
                _ => 1,
            })
        }
    }
}
