use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use peerfed::grid::{write_atomic, SUMMARY_FILE};
use peerfed::{run_grid, summarize_dir, validate_config, Error, Format, GridOptions};

#[derive(Parser)]
#[command(name = "peerfed", version, about = "Peer-to-peer federated learning benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid described by a config file.
    Run {
        config: PathBuf,
        /// Replace the configured seed list with this single seed.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "plain")]
        format: Format,
        /// Parallel grid cells; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check a config file and print the resolved settings.
    Validate { config: PathBuf },
    /// Recompute win counts from a results directory.
    Summarize {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_config() {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match validate_config(&config) {
            Ok(c) => {
                println!("{c:#?}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Run {
            config,
            seed_override,
            out,
            format,
            jobs,
        } => {
            let mut cfg = match validate_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            if let Some(seed) = seed_override {
                cfg = cfg.with_seeds(vec![seed]);
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let options = GridOptions {
                jobs,
                format,
                write: true,
            };
            match run_grid(&cfg, &options) {
                Ok(report) => {
                    print!("{}", report.summary.render());
                    if report.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        for f in &report.failures {
                            eprintln!("failed {}: {}", f.key.file_stem(), f.message);
                        }
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
        Command::Summarize { dir, out } => {
            let result = summarize_dir(&dir).and_then(|s| {
                let text = s.render();
                let path = out.unwrap_or_else(|| dir.join(SUMMARY_FILE));
                write_atomic(&path, text.as_bytes())?;
                Ok(text)
            });
            match result {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
    }
}
