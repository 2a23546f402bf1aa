use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aoi_cli::commands::{self, Output};
use aoi_cli::scenario::{Preset, Scenario};
use aoi_cli::{selfcheck, CliError, EXIT_PARSE, EXIT_VALIDATION};

/// Average age of information in a multi-source M/G/1 queue with server
/// breakdowns: closed forms, simulation and sweeps.
#[derive(Parser)]
#[command(name = "aoi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print every closed-form quantity.
    Analyze(Common),
    /// Run the discrete-event simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write the event trace of the first replication to this CSV file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare both closed-form variants with simulation.
    Compare(Common),
    /// Write one CSV per service law over the scenario's sweep grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also simulate every stable point.
        #[arg(long)]
        simulate: bool,
    },
    /// Run the built-in property checks.
    Selfcheck,
}

#[derive(Args)]
struct Common {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Figure preset: fig3, fig4, fig5, fig6a or fig6b.
    #[arg(long)]
    preset: Option<Preset>,
    /// Override a scenario key, e.g. `--set alpha=0`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Source-1 deliveries per replication.
    #[arg(long)]
    horizon: Option<u64>,
    /// Use the given service mean as the plain service mean rather than the
    /// mean completion time including repairs.
    #[arg(long)]
    raw_service_mean: bool,
    /// Directory for CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    s.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())).ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

impl Common {
    fn scenario(&self) -> Result<Scenario, CliError> {
        let base = match (&self.config, self.preset) {
            (Some(_), Some(_)) => return Err(CliError { code: EXIT_PARSE, message: "give either --config or --preset".into() }),
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError { code: EXIT_PARSE, ..CliError::io(path, e) })?;
                Scenario::parse(&text).map_err(|e| CliError { code: EXIT_PARSE, message: format!("{}: {e}", path.display()) })?
            }
            (None, Some(p)) => Scenario::preset(p),
            (None, None) => Scenario::default(),
        };
        let mut overrides = self.overrides.clone();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k.to_string(), v));
            }
        };
        push("seed", self.seed.map(|x| x.to_string()));
        push("replications", self.replications.map(|x| x.to_string()));
        push("horizon", self.horizon.map(|x| x.to_string()));
        push("raw_service_mean", self.raw_service_mean.then(|| "true".to_string()));
        Ok(base.with_overrides(&overrides)?)
    }

    fn emit(&self, output: &Output) -> Result<(), CliError> {
        print!("{}", output.text);
        if let Some(dir) = &self.out {
            for path in output.write_files(dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Analyze(c) => c.emit(&commands::analyze(&c.scenario()?)?.1)?,
        Command::Simulate { common, trace } => common.emit(&commands::simulate(&common.scenario()?, trace.as_deref().map(Path::new))?.1)?,
        Command::Compare(c) => c.emit(&commands::compare(&c.scenario()?)?.1)?,
        Command::Sweep { common, simulate } => common.emit(&commands::sweep(&common.scenario()?, simulate)?.1)?,
        Command::Selfcheck => {
            let mut failed = 0;
            for check in selfcheck::run_all() {
                match check.outcome {
                    Ok(()) => println!("PASS  {}", check.name),
                    Err(why) => {
                        failed += 1;
                        println!("FAIL  {}: {why}", check.name);
                    }
                }
            }
            if failed > 0 {
                println!("{failed} check(s) failed");
                return Ok(ExitCode::from(EXIT_VALIDATION as u8));
            }
            println!("all checks passed");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
