use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isabc_core::harness::config::parse_values;
use isabc_core::harness::{run_experiment, ExperimentConfig, Sweep};
use isabc_core::Error;

/// Monte Carlo experiments for integrated sensing and backscatter communication.
///
/// Exit codes: 0 success, 1 configuration or I/O error, 2 when some cell has
/// more than half of its trials infeasible. `ISABC_THREADS` caps the workers.
#[derive(Parser)]
#[command(name = "isabc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(value_name = "CONFIG")]
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one parameter over a list of values.
    Sweep {
        #[arg(long)]
        sweep: Sweep,
        /// Comma-separated values, e.g. 5,10,15.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        common: Common,
    },
    /// Write transmit, receive and joint beampatterns of solved trials.
    Beampattern {
        /// Comma-separated trial indices.
        #[arg(long, default_value = "0")]
        trials: String,
        #[command(flatten)]
        common: Common,
    },
    /// Time the optimizer against the number of tags.
    Runtime {
        /// Comma-separated tag counts.
        #[arg(long, default_value = "1,4,8")]
        values: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Base config file; keys given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set m=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Comma-separated scheme names, or `all`.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long = "num-trials")]
    num_trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// 1000 trials and a final randomization pass of 10^5 draws.
    #[arg(long)]
    paper_scale: bool,
}

fn load(path: Option<&PathBuf>) -> Result<ExperimentConfig, Error> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::parse(&text)
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply(mut cfg: ExperimentConfig, common: &Common) -> Result<ExperimentConfig, Error> {
    if common.paper_scale {
        cfg.paper_scale();
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = &common.scheme {
        cfg.set("scheme", s)?;
    }
    if let Some(t) = common.num_trials {
        cfg.trials = t;
    }
    if let Some(s) = common.seed {
        cfg.base_seed = s;
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = d.clone();
    }
    Ok(cfg)
}

fn build(cmd: &Command) -> Result<ExperimentConfig, Error> {
    let cfg = match cmd {
        Command::Run { file, common } => apply(load(Some(file))?, common)?,
        Command::Sweep { sweep, values, common } => {
            let mut cfg = apply(load(common.config.as_ref())?, common)?;
            cfg.sweep = *sweep;
            cfg.sweep_values = parse_values("--values", values)?;
            cfg
        }
        Command::Beampattern { trials, common } => {
            let mut cfg = apply(load(common.config.as_ref())?, common)?;
            cfg.sweep = Sweep::Beampattern;
            cfg.sweep_values = parse_values("--trials", trials)?;
            cfg
        }
        Command::Runtime { values, common } => {
            let mut cfg = apply(load(common.config.as_ref())?, common)?;
            cfg.sweep = Sweep::Runtime;
            cfg.sweep_values = parse_values("--values", values)?;
            cfg
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match build(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("isabc: {e}");
            return ExitCode::from(1);
        }
    };
    match run_experiment(&cfg) {
        Ok(out) => {
            print!("{}", out.summary);
            if out.exit_code != 0 {
                eprintln!("isabc: more than half of the trials in some cell were infeasible");
            }
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("isabc: {e}");
            ExitCode::from(1)
        }
    }
}
