use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levy_drift::experiment::{regime_preset, run_experiment, summarize, ExperimentConfig};

#[derive(Parser)]
#[command(name = "levy-drift", about = "Sparse plus low-rank drift estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (horizon, replicate) cell of a configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; results do not depend on this value.
        #[arg(long)]
        parallel: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a results file by the given columns.
    Summarize {
        #[arg(long)]
        results: PathBuf,
        /// Comma-separated column names.
        #[arg(long, value_delimiter = ',', default_value = "t")]
        group_by: Vec<String>,
    },
    /// Print or write the default configuration of a regime.
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> levy_drift::Result<()> {
    match cli.command {
        Command::Run { config, parallel, out } => {
            let cfg = ExperimentConfig::from_json(&fs::read_to_string(&config)?)?;
            let run = run_experiment(&cfg, parallel, out.as_deref())?;
            println!(
                "{} cells ({} failed) -> {}",
                run.manifest.rows_total,
                run.manifest.rows_failed,
                run.results_path.display()
            );
            println!("manifest -> {}", run.manifest_path.display());
        }
        Command::Summarize { results, group_by } => {
            let s = summarize(&results, &group_by)?;
            for row in &s.rows {
                println!(
                    "{}: n={} failed={} mean_err={:.4e} cone={:.2} rsc={:.2} dual={:.2}",
                    row.group,
                    row.count,
                    row.failures,
                    row.mean_frob_err_sq,
                    row.cone_pass_freq,
                    row.rsc_pass_freq,
                    row.dual_pass_freq
                );
            }
            if s.skipped > 0 {
                println!("skipped {} malformed rows", s.skipped);
            }
            if let Some(fit) = &s.oracle_fit {
                println!(
                    "rate fit: c1 = {:.4e}, c2 = {:.4e}, R^2 = {:.3}",
                    fit.c1, fit.c2, fit.r_squared
                );
                if let Some(slope) = fit.slope_vs_t {
                    println!("log-log slope vs T = {slope:.3}");
                }
            }
            println!("summary -> {}", s.summary_path.display());
            println!("plot -> {}", s.plot_path.display());
        }
        Command::Preset { name, emit } => {
            let json = regime_preset(&name)?.to_json()?;
            match emit {
                Some(path) => fs::write(path, json)?,
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
