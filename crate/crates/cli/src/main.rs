//! `fragdiff`: fragmentation, alignment, sampling, toy training, audits and ranking.
//!
//! Exit status: 0 success, 1 usage error, 2 unreadable or malformed input,
//! 3 numerical failure (the message names the library error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fragdiff_cli::config::RunConfig;
use fragdiff_cli::error::CliError;
use fragdiff_cli::{commands, verify};

#[derive(Debug, Parser)]
#[command(name = "fragdiff", version, about = "Fragment-level rigid-body diffusion docking toolkit")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed (same as `--set seed=N`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fragment a ligand and write the fragment set as JSON.
    Fragment {
        #[arg(long, value_name = "SDF")]
        ligand: PathBuf,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align a conformer onto a target pose over dihedrals and rigid motion.
    Align {
        #[arg(long, value_name = "SDF")]
        conformer: PathBuf,
        #[arg(long, value_name = "SDF")]
        target: PathBuf,
        /// Aligned conformer as SDF.
        #[arg(long)]
        out: Option<PathBuf>,
        /// RMSD report as CSV (stdout if omitted).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = fragdiff_core::align::DEFAULT_MAX_ROUNDS)]
        max_rounds: usize,
    },
    /// Draw poses by reverse diffusion.
    Sample {
        #[arg(long, value_name = "SDF")]
        ligand: PathBuf,
        #[arg(long, value_name = "JSON")]
        pocket: PathBuf,
        /// Toy-model weights from `train-toy`; without them the exact score
        /// for the ligand's input pose is used.
        #[arg(long, value_name = "JSON")]
        weights: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Number of seeds (same as `--set n_seeds=N`).
        #[arg(long)]
        n_seeds: Option<usize>,
    },
    /// Overfit the toy score model to one ligand in its pocket.
    TrainToy {
        #[arg(long, value_name = "SDF")]
        ligand: PathBuf,
        #[arg(long, value_name = "JSON")]
        pocket: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Weights JSON (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gram matrices of the torsional and fragment parametrizations.
    AuditGram {
        #[arg(long, value_name = "SDF")]
        ligand: PathBuf,
        #[arg(long, value_name = "JSON")]
        out_json: Option<PathBuf>,
        /// Summary CSV (stdout if omitted).
        #[arg(long, value_name = "CSV")]
        out_csv: Option<PathBuf>,
    },
    /// Order sampled poses by the mixed energy/check score.
    Rank {
        #[arg(long, value_name = "SDF")]
        ligand: PathBuf,
        #[arg(long, value_name = "JSON")]
        pocket: PathBuf,
        /// Per-seed pose files written by `sample`.
        #[arg(required = true)]
        poses: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant checks on the bundled fixtures.
    Verify,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")));
        };
        cfg.set(k, v)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Command::Sample { n_seeds: Some(n), .. } = cli.command {
        cfg.n_seeds = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli)?;
    match cli.command {
        Command::Fragment { ligand, out } => commands::fragment(&cfg, &ligand, out.as_deref()),
        Command::Align { conformer, target, out, report, max_rounds } => {
            commands::align(&cfg, &conformer, &target, max_rounds, out.as_deref(), report.as_deref())
        }
        Command::Sample { ligand, pocket, weights, out, threads, .. } => {
            if threads == Some(0) {
                return Err(CliError::Usage("--threads must be at least 1".into()));
            }
            commands::sample_cmd(&cfg, &ligand, &pocket, weights.as_deref(), &out, threads)
        }
        Command::TrainToy { ligand, pocket, steps, lr, out } => {
            commands::train_toy(&cfg, &ligand, &pocket, steps, lr, out.as_deref())
        }
        Command::AuditGram { ligand, out_json, out_csv } => {
            commands::audit_gram(&cfg, &ligand, out_json.as_deref(), out_csv.as_deref())
        }
        Command::Rank { ligand, pocket, poses, out } => commands::rank_cmd(&cfg, &ligand, &pocket, &poses, out.as_deref()),
        Command::Verify => {
            let suites = verify::run(&cfg)?;
            let mut all = true;
            for s in &suites {
                println!("{}: {}/{} passed", s.name, s.passed, s.total);
                all &= s.passed == s.total;
            }
            if all {
                Ok(())
            } else {
                Err(CliError::Check("invariant checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
