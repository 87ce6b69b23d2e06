use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opdopgd::harness::{default_out_dir, run_experiment, verify_suite, ExperimentConfig, Level, PRESETS};
use opdopgd::Error;

#[derive(Parser)]
#[command(name = "opdopgd", version, about = "Distributed online gradient descent with bandit feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's `out_dir`, else `runs/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed; replicate `r` uses `seed + r`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Run the built-in property checks.
    Verify {
        #[arg(long, value_parser = ["fast", "full"], default_value = "fast")]
        level: String,
    },
    /// Inspect the bundled presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's TOML.
    Show { name: String },
}

fn report_error(e: &Error) -> ExitCode {
    let report = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
    eprintln!("{report}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed, replicates } => {
            let mut cfg = match ExperimentConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => return report_error(&e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            let out = out.unwrap_or_else(|| default_out_dir(&cfg));
            match run_experiment(&cfg, &out) {
                Ok(outcome) => {
                    for e in &outcome.summary.estimators {
                        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
                        println!(
                            "{:<20} final regret {} +/- {} ({} ok, {} failed)",
                            e.estimator.name(),
                            fmt(e.final_regret_mean),
                            fmt(e.final_regret_std_error),
                            e.completed,
                            e.failed.len()
                        );
                    }
                    println!("wrote {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => report_error(&e),
            }
        }
        Command::Verify { level } => {
            let level: Level = match level.parse() {
                Ok(l) => l,
                Err(e) => return report_error(&e),
            };
            let report = verify_suite(level);
            for c in &report.checks {
                println!("{c}");
            }
            println!("{:.1}s", report.wall_time_seconds);
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Presets { action: PresetAction::List } => {
            for p in PRESETS {
                println!("{:<10} {}", p.name, p.description);
            }
            ExitCode::SUCCESS
        }
        Command::Presets { action: PresetAction::Show { name } } => match PRESETS.iter().find(|p| p.name == name) {
            Some(p) => {
                print!("{}", p.toml);
                ExitCode::SUCCESS
            }
            None => report_error(&Error::Config(format!("unknown preset {name:?}"))),
        },
    }
}
