use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levy_parametrix_cli::config::{parse_list, parse_time, preset, RunConfig, Stage};
use levy_parametrix_cli::pipeline::{format_table, run};
use levy_parametrix_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "levy-parametrix", version, about = "Transition densities of perturbed Lévy generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated times.
    #[arg(long)]
    t: Option<String>,
    /// Comma-separated stages: exponent,kernel,parametrix,validate,simulate.
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hexadecimal float encoding in kernel and sample files.
    #[arg(long)]
    exact: bool,
    /// Tolerance override `key=value`; repeatable.
    #[arg(long = "tol")]
    tol: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline for a preset or a config file.
    Run(RunArgs),
    /// Print the run configuration of a preset.
    Preset { name: String },
}

fn load(args: RunArgs) -> CliResult<RunConfig> {
    let RunArgs { preset: preset_name, config, t, stages, out, seed, exact, tol } = args;
    let mut c = match (preset_name, config) {
        (Some(name), None) => preset(&name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        _ => return Err(CliError::config("give exactly one of --preset or --config")),
    };
    if let Some(t) = t {
        c.t = parse_list(&t, parse_time)?;
        if let Some(s) = c.simulation.t {
            if !c.t.contains(&s) {
                c.simulation.t = None;
            }
        }
    }
    if let Some(s) = stages {
        c.stages = parse_list(&s, Stage::parse)?;
    }
    if let Some(o) = out {
        c.out = o;
    }
    if let Some(s) = seed {
        c.seed = s;
    }
    c.export.exact |= exact;
    for a in &tol {
        c.override_tolerance(a)?;
    }
    Ok(c)
}

fn fail(e: &CliError, out: Option<&std::path::Path>) -> ExitCode {
    let text = e.to_json();
    eprintln!("{text}");
    if let Some(dir) = out {
        if dir.is_dir() {
            let _ = std::fs::write(dir.join("error.json"), &text);
        }
    }
    ExitCode::from(e.exit_code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Preset { name } => match preset(&name).and_then(|c| c.to_toml()) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e, None),
        },
        Command::Run(args) => {
            let c = match load(args) {
                Ok(c) => c,
                Err(e) => return fail(&e, None),
            };
            match run(&c) {
                Ok(summary) => {
                    print!("{}", format_table(&summary));
                    ExitCode::from(summary.exit_code as u8)
                }
                Err(e) => fail(&e, Some(&c.out)),
            }
        }
    }
}
