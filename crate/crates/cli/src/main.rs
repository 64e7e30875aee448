use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bie_cli::commands;
use bie_cli::config::{load, Layers, Preset, RunConfig};
use bie_cli::CliError;
use clap::{Args, Parser, Subcommand};
use toml::Value;

#[derive(Parser)]
#[command(name = "bie", version, about = "Boundary integral solvers and neural operators on trigonometric coefficients")]
struct Cli {
    /// TOML file layered over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in configuration the other layers start from.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for every relative output and input path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dotted override such as `train.epochs=100`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample random boundaries and write them to a boundary file.
    GenBoundaries {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Generate a dataset for one problem family from a boundary file.
    GenDataset {
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve one problem with the Galerkin method and write its density.
    Solve {
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        shape: Option<String>,
        /// Compare with a collocation solve.
        #[arg(long)]
        cross_check: bool,
    },
    /// Train an operator network on a dataset.
    Train {
        /// `tdonet` or `deeponet`.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Report the metrics table of a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Reconstruct the field of one record on a grid.
    Field(FieldArgs),
}

#[derive(Args)]
struct FieldArgs {
    #[arg(long)]
    record: Option<usize>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn str_flag(flags: &mut Vec<(String, Value)>, key: &str, v: Option<String>) {
    if let Some(v) = v {
        flags.push((key.into(), Value::String(v)));
    }
}

fn int_flag(flags: &mut Vec<(String, Value)>, key: &str, v: Option<usize>) {
    if let Some(v) = v {
        flags.push((key.into(), Value::Integer(v as i64)));
    }
}

fn path_flag(flags: &mut Vec<(String, Value)>, key: &str, v: Option<PathBuf>) {
    str_flag(flags, key, v.map(|p| p.display().to_string()));
}

fn configure(cli: &mut Cli) -> Result<RunConfig, CliError> {
    let mut flags = Vec::new();
    if let Some(s) = cli.seed {
        flags.push(("seed".into(), Value::Integer(s as i64)));
    }
    path_flag(&mut flags, "out", cli.out.take());
    match &mut cli.command {
        Command::GenBoundaries { count } => int_flag(&mut flags, "boundaries.count", *count),
        Command::GenDataset { problem, csv } => {
            str_flag(&mut flags, "dataset.problem", problem.take());
            path_flag(&mut flags, "dataset.csv", csv.take());
        }
        Command::Solve {
            problem,
            shape,
            cross_check,
        } => {
            str_flag(&mut flags, "solve.problem", problem.take());
            str_flag(&mut flags, "solve.shape", shape.take());
            if *cross_check {
                flags.push(("solve.cross_check".into(), Value::Boolean(true)));
            }
        }
        Command::Train { model, epochs } => {
            str_flag(&mut flags, "train.model", model.take());
            int_flag(&mut flags, "train.epochs", *epochs);
        }
        Command::Eval { checkpoint } => path_flag(&mut flags, "eval.checkpoint", checkpoint.take()),
        Command::Field(a) => {
            int_flag(&mut flags, "field.record", a.record);
            path_flag(&mut flags, "field.checkpoint", a.checkpoint.take());
        }
    }
    load(Layers {
        preset: cli.preset,
        config: cli.config.as_deref(),
        sets: &cli.sets,
        flags,
    })
}

fn run(mut cli: Cli) -> Result<(), CliError> {
    let cfg = configure(&mut cli)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::GenBoundaries { .. } => commands::gen_boundaries(&cfg, &mut out),
        Command::GenDataset { .. } => commands::gen_dataset(&cfg, &mut out),
        Command::Solve { .. } => commands::solve(&cfg, &mut out),
        Command::Train { .. } => commands::train(&cfg, &mut out),
        Command::Eval { .. } => commands::eval(&cfg, &mut out),
        Command::Field(_) => commands::field(&cfg, &mut out),
    }?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = std::env::var("BIE_THREADS").ok().and_then(|s| s.parse().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("BIE_THREADS ignored: {e}");
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::FAILURE
        }
    }
}
