use clap::{Args, Parser, Subcommand};
use raceline_cli::{commands, CliError, Overrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Racing-line optimization by Bayesian optimization over lateral offsets.
#[derive(Parser)]
#[command(name = "raceline", version)]
struct Cli {
    /// Log progress to stderr (RUST_LOG takes precedence).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the racing line and write its artifacts.
    Optimize(Common),
    /// Evaluate one offset vector and print its lap time.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Offsets file: one value per line, or a CSV with an offset_m column.
        #[arg(long)]
        offsets: PathBuf,
    },
    /// Compare random search, EI and NEI over repeated runs.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of random, ei, nei (or "all").
        #[arg(long)]
        methods: Option<String>,
        /// Runs per method.
        #[arg(long)]
        runs: Option<usize>,
        /// Lap-time evaluations per run, initialization included.
        #[arg(long)]
        evaluations: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config, or a summary.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    track: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Optimization steps after initialization.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// ei or nei.
    #[arg(long)]
    acquisition: Option<String>,
    /// Worker threads; 1 disables parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            track: self.track.clone(),
            nodes: self.nodes,
            budget: self.budget,
            seed: self.seed,
            acquisition: self.acquisition.clone(),
            jobs: self.jobs,
            out: self.out.clone(),
            ..Overrides::default()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Optimize(common) => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.overrides())?;
            let outcome = commands::optimize(&cfg)?;
            let s = &outcome.summary;
            println!("lap_time_s = {}", s.lap_time_s);
            println!("center_lap_time_s = {}", s.center_lap_time_s);
            println!("evaluations = {}", s.evaluations);
            println!("runtime_s = {:.2}", s.runtime_s);
            println!("artifacts in {}", cfg.out.display());
        }
        Command::Evaluate { common, offsets } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.overrides())?;
            let outcome = commands::evaluate(&cfg, &offsets)?;
            println!("lap_time_s = {}", outcome.lap_time);
        }
        Command::Compare { common, methods, runs, evaluations } => {
            let overrides = Overrides {
                methods,
                runs,
                evaluations,
                ..common.overrides()
            };
            let cfg = RunConfig::load(common.config.as_deref(), &overrides)?;
            let (_, summary) = commands::compare(&cfg)?;
            for m in &summary.methods {
                println!(
                    "{:<6} final best {:.4} s  95% band [{:.4}, {:.4}]  ({} runs)",
                    m.method.label(),
                    m.final_mean_s,
                    m.final_lower_s,
                    m.final_upper_s,
                    m.n_runs
                );
            }
            for e in &summary.exclusions {
                println!("excluded {} seed {}: {}", e.method, e.seed, e.message);
            }
            println!("artifacts in {}", cfg.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
