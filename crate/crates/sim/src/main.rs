use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dirac_sim::runner::{self, EXIT_CONFIG, EXIT_INSTABILITY, EXIT_OK};
use dirac_sim::{output, presets};

#[derive(Parser)]
#[command(
    name = "diracsim",
    version,
    about = "Run Dirac-type field simulations with conservation monitors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: a TOML file or `preset:NAME`.
    Run {
        config: String,
        /// Override a config value, e.g. `--set grid.N=64`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the built-in presets.
    List,
    /// Print the TOML of a built-in preset.
    Show { name: String },
    /// Run every config matching a glob, in parallel.
    Sweep {
        pattern: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let root = runner::output_root();
    match cli.command {
        Command::List => {
            print!("{}", presets::listing());
            code(EXIT_OK)
        }
        Command::Show { name } => match presets::find(&name) {
            Some(p) => {
                print!("{}", p.text);
                code(EXIT_OK)
            }
            None => {
                eprintln!("error: unknown preset `{name}`");
                code(EXIT_CONFIG)
            }
        },
        Command::Run { config, overrides } => {
            match runner::run_source(&config, &overrides, &root) {
                Ok(done) => {
                    print!("{}", output::render_report(&done.report));
                    println!("\nwrote {}", done.dir.display());
                    code(EXIT_OK)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(e.exit_code())
                }
            }
        }
        Command::Sweep {
            pattern,
            overrides,
            threads,
        } => {
            let threads = threads
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            match runner::sweep(&pattern, &overrides, &root, threads) {
                Err(e) => {
                    eprintln!("error: {e}");
                    code(EXIT_CONFIG)
                }
                Ok(results) => {
                    let mut worst = EXIT_OK;
                    for (path, r) in results {
                        match r {
                            Ok(done) => {
                                println!("ok    {} -> {}", path.display(), done.dir.display())
                            }
                            Err(e) => {
                                println!("error {}: {e}", path.display());
                                worst = match (worst, e.exit_code()) {
                                    (EXIT_INSTABILITY, _) | (_, EXIT_INSTABILITY) => {
                                        EXIT_INSTABILITY
                                    }
                                    (_, c) => c.max(worst),
                                };
                            }
                        }
                    }
                    code(worst)
                }
            }
        }
    }
}
