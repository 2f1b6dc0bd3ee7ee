//! Command-line driver: flows, distances, checks and reports for one scenario
//! file.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use output::OutputDir;

#[derive(Parser, Debug)]
#[command(
    name = "krflow",
    version,
    about = "Ricci flow lab on the flat torus with singular data"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sampling seed, overriding `[sampling] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Treat optional checks as required.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the approximating flows and write checkpoints and diagnostics.
    Run,
    /// Distances and Hölder fits at a checkpoint time or in the limit.
    Dist {
        #[arg(long, conflicts_with = "limit", required_unless_present = "limit")]
        time: Option<f64>,
        #[arg(long)]
        limit: bool,
        /// Truncation level of the checkpoint (default: the largest).
        #[arg(long)]
        level: Option<u32>,
    },
    /// Run the full check battery and write report.csv.
    Verify,
    /// Distance comparison on the collapsing-tube family.
    Counterexample {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        levels: Vec<u32>,
    },
    /// Summarize report.csv and write heatmaps of the last checkpoints.
    Report,
}

fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    if let Command::Counterexample { levels } = &cli.command {
        let out_dir = cli
            .global
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"));
        let seed = cli.global.seed.unwrap_or(11);
        let tag = format!("counterexample levels={levels:?} seed={seed}");
        let hash = config::short_hash(tag.as_bytes());
        let mut out = OutputDir::open(&out_dir, &hash)?;
        return commands::cmd_counterexample(levels, seed, &mut out);
    }
    let path = cli
        .global
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config <file> is required".into()))?;
    let mut cfg = commands::read_config(path)?;
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.global.out {
        cfg.output = dir.clone();
    }
    let mut out = OutputDir::open(&cfg.output, &cfg.hash())?;
    out.write("config.toml", cfg.to_toml().as_bytes())?;
    match cli.command {
        Command::Run => commands::cmd_run(&cfg, &mut out).map(|_| ()),
        Command::Dist { time, level, .. } => commands::cmd_dist(&cfg, &mut out, time, level),
        Command::Verify => commands::cmd_verify(&cfg, &mut out, cli.global.strict),
        Command::Report => commands::cmd_report(&mut out),
        Command::Counterexample { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
