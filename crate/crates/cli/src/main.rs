use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcgnn::hierarchy::HierarchyMethod;
use hcgnn_cli::results::results_root;
use hcgnn_cli::{
    cmd_gen_grid, cmd_hierarchy, cmd_sweep_hierarchy, cmd_sweep_levels, cmd_sweep_sparsity,
    cmd_train, CliError, Env, ExperimentConfig, Overrides,
};

#[derive(Parser)]
#[command(
    name = "hcgnn",
    version,
    about = "Hierarchical message-passing GNN experiments"
)]
struct Cli {
    /// Results root (default: $HCGNN_RESULTS, else ./results)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Runs executed concurrently
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    config: PathBuf,
    /// Comma-separated seeds
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    layers: Option<usize>,
    /// louvain, girvan-newman, random or flat
    #[arg(long, value_parser = parse_method)]
    method: Option<HierarchyMethod>,
    #[arg(long)]
    levels_used: Option<usize>,
    #[arg(long)]
    lambda: Option<usize>,
}

fn parse_method(s: &str) -> Result<HierarchyMethod, String> {
    s.parse().map_err(|e: hcgnn::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Build and summarize the hierarchy
    Hierarchy(Common),
    /// Train every seed and aggregate
    Train(Common),
    /// Metric against the number of levels used, plus the flat baseline
    SweepLevels(Common),
    /// Metric for each hierarchy construction method
    SweepHierarchy(Common),
    /// Metric against the fraction of removed edges
    SweepSparsity(Common),
    /// Write a lattice edge list
    GenGrid {
        #[arg(long, default_value_t = 20)]
        rows: usize,
        #[arg(long, default_value_t = 20)]
        cols: usize,
        output: PathBuf,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_file(&c.config)?;
    Overrides {
        seeds: c.seeds.clone(),
        epochs: c.epochs,
        lr: c.lr,
        layers: c.layers,
        method: c.method,
        levels_used: c.levels_used,
        lambda: c.lambda,
    }
    .apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let env = Env {
        root: results_root(cli.out.as_deref()),
        jobs: cli.jobs,
    };
    match cli.cmd {
        Command::Hierarchy(c) => {
            let s = cmd_hierarchy(&load(&c)?, &env)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&s).expect("serializable")
            );
        }
        Command::Train(c) => {
            let s = cmd_train(&load(&c)?, &env)?;
            print!("{}", s.aggregate);
            eprintln!("results in {}", s.dir.display());
        }
        Command::SweepLevels(c) => print!("{}", cmd_sweep_levels(&load(&c)?, &env)?.1),
        Command::SweepHierarchy(c) => print!("{}", cmd_sweep_hierarchy(&load(&c)?, &env)?.1),
        Command::SweepSparsity(c) => print!("{}", cmd_sweep_sparsity(&load(&c)?, &env)?),
        Command::GenGrid { rows, cols, output } => cmd_gen_grid(rows, cols, &output)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
