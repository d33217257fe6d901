use std::process::ExitCode;

use clap::{Parser, Subcommand};
use saddle_opt::config::{load_config, ConfigError, Origin, RunConfig, SEED_ENV};
use saddle_opt::experiment::{run_bench, run_experiment, verify, ExperimentError, Sweep};
use saddle_opt::problems::QuadraticSpec;

#[derive(Parser)]
#[command(name = "spo", version, about = "Derivative-free saddle point optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured trials and write trace and summary CSVs.
    Run {
        /// Config file of `key = value` lines.
        #[arg(short, long)]
        config: Option<String>,
        /// Overrides as `--key value` or `--key=value`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run a sweep over fixed rates, coupling strengths or dimensions.
    Bench {
        #[arg(short, long)]
        config: Option<String>,
        #[arg(short, long, default_value = "eta")]
        sweep: Sweep,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Print the rate constants of the quadratic a/2‖x‖² + b xᵀy − c/2‖y‖².
    Verify {
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 1e-5)]
        zeta: f64,
    },
}

fn flag_error(message: String) -> ExperimentError {
    ConfigError {
        origin: Origin::Flag,
        key: String::new(),
        message,
    }
    .into()
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, ExperimentError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            return Err(flag_error(format!("expected --key, got {arg:?}")));
        };
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| flag_error(format!("--{key} needs a value")))?;
                out.push((key.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn load(config: Option<&str>, overrides: &[String]) -> Result<RunConfig, ExperimentError> {
    let text = match config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            flag_error(format!("cannot read config {path}: {e}"))
        })?,
        None => String::new(),
    };
    let env = std::env::var(SEED_ENV).ok();
    Ok(load_config(&text, &parse_overrides(overrides)?, env.as_deref())?)
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(config.as_deref(), &overrides)?;
            let rows = run_experiment(&cfg)?;
            let reached = rows.iter().filter(|r| r.f_calls_to_threshold.is_some()).count();
            println!(
                "{} trials, {} reached the target; trace {}, summary {}",
                rows.len(),
                reached,
                cfg.output,
                cfg.summary_path()
            );
        }
        Command::Bench { config, sweep, overrides } => {
            let cfg = load(config.as_deref(), &overrides)?;
            let rows = run_bench(&cfg, sweep)?;
            println!("{} rows written to {}", rows.len(), cfg.summary_path());
        }
        Command::Verify { a, b, c, eps, zeta } => {
            let spec = QuadraticSpec::new(a, b, c).map_err(|e| flag_error(e.to_string()))?;
            if !(0.0..1.0).contains(&eps) || !(zeta > 0.0 && zeta < 1.0) {
                return Err(flag_error("need 0 ≤ eps < 1 and 0 < zeta < 1".into()));
            }
            print!("{}", verify(spec, eps, zeta)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
