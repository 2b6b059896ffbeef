use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ruda::cli::{self, Overrides};
use ruda::env::{self, RoverParams, TaskId};
use ruda::evolution::Variant;
use ruda::io;

#[derive(Parser)]
#[command(name = "ruda", version, about = "Relevance-guided quality-diversity experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign of experiments.
    Run {
        /// key = value config file; omit to use defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Desk-scale preset (2000 iterations, target size 500).
        #[arg(long)]
        desk: bool,
        /// Variants to run (RUDA, AURORA, R-MeS, MeS, HC).
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        variant: Vec<Variant>,
        /// Tasks to run (navigation, forward, half-turn).
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        task: Vec<TaskId>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Extra key=value overrides.
        #[arg(long = "set", value_parser = parse_pair)]
        set: Vec<(String, String)>,
    },
    /// Recompute coverage curves from stored archives.
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 50)]
        coverage_grid: usize,
        /// Number of evenly spaced fitness thresholds after -inf.
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Dump the per-step trajectory of one archived individual.
    Trace {
        /// Run directory holding archive.csv.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        id: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

fn run(args: Args) -> ruda::Result<i32> {
    let params = RoverParams::default();
    match args.command {
        Command::Run { config, desk, variant, task, reps, out, jobs, set } => {
            let overrides = Overrides {
                desk,
                variants: (!variant.is_empty()).then_some(variant),
                tasks: (!task.is_empty()).then_some(task),
                reps,
                out,
                set,
            };
            let campaign = match config {
                Some(path) => cli::load_config(&path, &overrides)?,
                None => cli::parse_config("", &overrides)?,
            };
            let report = cli::run_campaign(&campaign, &params, jobs)?;
            for r in &report.runs {
                let status = r.error.as_deref().unwrap_or("ok");
                println!("{}: {status}", r.spec.config.out_dir.display());
            }
            Ok(report.exit_code())
        }
        Command::Metrics { input, coverage_grid, steps } => {
            let rows = cli::recompute_coverage(&input, &params, coverage_grid, steps)?;
            println!("wrote {} coverage rows to {}", rows.len(), input.join(cli::COVERAGE_FILE).display());
            Ok(0)
        }
        Command::Trace { input, id, out } => {
            let records = io::read_archive(&input.join(cli::ARCHIVE_FILE))?;
            let Some(record) = records.iter().find(|r| r.id == id) else {
                eprintln!("no member with id {id} in {}", input.display());
                return Ok(1);
            };
            let (_, _, trace) = env::rollout_traced(&params, &record.genotype)?;
            io::write_trace(&out, &trace)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
