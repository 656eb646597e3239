use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedgl_cli::{cmd_generate, cmd_grid, cmd_report, cmd_run, CliError, Config, Method};

#[derive(Parser)]
#[command(name = "fedgl", version, about = "Federated graph learning from smooth signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn graphs with one method and score them.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Method::Ppgl)]
        method: Method,
        /// Dataset directory; generated into <out>/data when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid search over beta, nu and lambda.
    Grid {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize the metrics of several runs.
    Report {
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Results directories written by `run`.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn config(path: Option<PathBuf>, seed: Option<u64>) -> Result<Config, CliError> {
    let mut cfg = Config::load(path.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config: c, seed, out } => config(c, seed).and_then(|cfg| {
            let m = cmd_generate(&cfg, &out)?;
            println!("wrote {} clients, {} base edges, {} consensus edges to {}", m.clients, m.base_edges, m.consensus_edges, out.display());
            Ok(true)
        }),
        Command::Run { config: c, seed, method, data, out } => config(c, seed).and_then(|cfg| {
            let s = cmd_run(&cfg, data.as_deref(), method, &out, None)?;
            match s.fs_consensus {
                Some(c) => println!("{method}: local FS {:.4}, consensus FS {c:.4}", s.fs_local),
                None => println!("{method}: local FS {:.4}", s.fs_local),
            }
            if !s.converged {
                eprintln!("warning: solver stopped at its iteration cap before reaching the tolerance");
            }
            Ok(s.converged)
        }),
        Command::Grid { config: c, seed, data, out } => config(c, seed).and_then(|cfg| {
            let rows = cmd_grid(&cfg, data.as_deref(), &out)?;
            println!("{} grid points written to {}", rows.len(), out.join("grid.csv").display());
            Ok(true)
        }),
        Command::Report { out, runs } => cmd_report(&runs, &out).map(|rows| {
            println!("{:<8} {:<10} {:>4} {:>8} {:>8}", "method", "target", "runs", "fs", "std");
            for r in rows {
                println!("{:<8} {:<10} {:>4} {:>8.4} {:>8.4}", r.method, r.target, r.runs, r.fs_mean, r.fs_std);
            }
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
