use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nhsim::cli::{self, EXIT_RUNTIME, EXIT_USAGE};
use nhsim::Error;

#[derive(Parser)]
#[command(
    name = "nhsim",
    version,
    about = "Simulate mechanical and constrained systems on homogeneous spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configured run and write trajectory and summary files.
    Simulate {
        /// TOML run configuration (JSON when the extension is .json).
        #[arg(long)]
        config: PathBuf,
        /// Override a configuration key, e.g. `--set parameters.J2=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Exit with status 1 when a diagnostic budget is exceeded.
        #[arg(long)]
        strict: bool,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suite for a scenario.
    Verify {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print scenario names and parameters as JSON.
    ListScenarios,
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(cli::exit_code(err) as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate {
            config,
            set,
            strict,
            out,
        } => {
            let cfg = match cli::parse_config(Some(&config), &set) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let Some(out) = out.or_else(|| cfg.output.clone()) else {
                return fail(&Error::config("output", "no output directory (use --out)"));
            };
            let summary = match cli::run(&cfg, &out) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            eprintln!(
                "{} steps in {:.3} s, results in {}",
                summary.steps,
                summary.wall_time.as_secs_f64(),
                out.display()
            );
            let violations: Vec<_> = summary.violations().collect();
            for v in &violations {
                eprintln!("budget exceeded: {} = {:e} > {:e}", v.name, v.value, v.limit);
            }
            if (strict || cfg.strict) && !violations.is_empty() {
                return ExitCode::from(EXIT_RUNTIME as u8);
            }
            ExitCode::SUCCESS
        }
        Command::Verify {
            scenario,
            seed,
            samples,
            out,
        } => match cli::verify(&scenario, seed, samples, &out) {
            Ok(report) => {
                for p in &report.properties {
                    eprintln!(
                        "{} {}: worst {:e} {} {:e}",
                        if p.pass { "pass" } else { "FAIL" },
                        p.name,
                        p.worst,
                        p.comparison,
                        p.tolerance
                    );
                }
                if report.pass {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_RUNTIME as u8)
                }
            }
            Err(e) => fail(&e),
        },
        Command::ListScenarios => match serde_json::to_string_pretty(&cli::list_scenarios()) {
            Ok(text) => {
                println!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_USAGE as u8)
            }
        },
    }
}
