use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crossdiff_cli::scenario::{preset, PRESET_NAMES};
use crossdiff_cli::sweep::parse_values;
use crossdiff_cli::{verify, CliError, Scenario, SweepSpec};

#[derive(Parser)]
#[command(name = "crossdiff", version, about = "Simulate and check cross-diffusion parabolic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its output directory.
    Simulate {
        /// Scenario JSON file or preset name.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario once per parameter value.
    Sweep {
        #[arg(long)]
        config: String,
        /// Dotted path of a numeric field, e.g. `reaction.c0` or `model.eps0`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an invariant suite: operators, reduction, positivity, ladder, sobolev or all.
    Verify { suite: String },
    /// Inspect the preset catalog.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Print preset names with a one-line description.
    List,
    /// Print a preset as scenario JSON.
    Show { name: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Simulate { config, out } => {
            let scenario = Scenario::load(&config)?;
            let summary = crossdiff_cli::run_scenario(&scenario, &out)?;
            let executed = &summary.executed;
            match &executed.result {
                Ok((traj, _)) => println!("{}: {}", scenario.name, traj.outcome.label()),
                Err(e) => println!("{}: error: {e}", scenario.name),
            }
            for c in &executed.checks {
                println!("  {} {} value={:e} threshold={:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            Ok(summary.exit_code)
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let scenario = Scenario::load(&config)?;
            let spec = SweepSpec::new(scenario, &param, parse_values(&values)?)?;
            let report = crossdiff_cli::sweep(&spec, &out)?;
            print!("{}", report.to_csv());
            if let Some(t) = report.transition {
                println!(
                    "transition: completed at {param}={:e}, blow-up at {param}={:e} (t*={:e})",
                    t.last_completed, t.first_blow_up, t.t_star
                );
            }
            Ok(0)
        }
        Command::Verify { suite } => {
            let reports = verify::run_suite(&suite)?;
            let json = serde_json::to_string_pretty(&reports).map_err(crossdiff::Error::from)?;
            println!("{json}");
            Ok(if reports.iter().all(|r| r.pass) { 0 } else { 1 })
        }
        Command::Presets { action } => {
            match action {
                PresetAction::List => {
                    for name in PRESET_NAMES {
                        let s = preset(name).expect("catalog names resolve");
                        println!("{name}\t{:?}, m = {}, dim = {}", s.model.variant, s.model.m(), s.grid.dim);
                    }
                }
                PresetAction::Show { name } => {
                    let s = preset(&name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
                    let json = serde_json::to_string_pretty(&s).map_err(crossdiff::Error::from)?;
                    println!("{json}");
                }
            }
            Ok(0)
        }
    }
}
