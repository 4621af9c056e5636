use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use faraday_cli::{parse_config, run, RunError};

/// Exit status: 0 all checks pass, 1 a check failed, 2 usage or config error.
#[derive(Parser)]
#[command(name = "faraday", version, about = "Faraday-form Maxwell experiment suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite named in the config and write manifest.json plus outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a config, printing the resolved values.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Validate { config } => match parse_config(&config) {
            Ok(cfg) => {
                println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config, out, seed } => {
            let mut cfg = match parse_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            match run(&cfg) {
                Ok(m) => {
                    for c in &m.checks {
                        let tag = if c.pass { "PASS" } else { "FAIL" };
                        println!("{tag} {}: {:e} (threshold {:e})", c.name, c.value, c.threshold);
                    }
                    println!("manifest: {}", cfg.out.join(faraday_cli::MANIFEST).display());
                    if m.pass {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("{}", m.failure_report());
                        ExitCode::from(1)
                    }
                }
                Err(e @ RunError::Config(_)) | Err(e @ RunError::Io { .. }) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
