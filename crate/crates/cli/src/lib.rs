//! Command-line front end for `pmc-core`: JSON configs, plot-ready outputs and
//! exit codes a driver script can branch on.

pub mod commands;
pub mod config;
pub mod export;
pub mod summary;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use commands::{CliError, Context, EXIT_CONFIG, EXIT_OK};
use config::{ConfigError, FieldError, RunConfig, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "pmc", version, about = "Prescribed mean curvature radial graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundled scenario name; overrides the config's scenario.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Output directory; overrides output.directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refinement level: the base resolution is doubled this many times.
    #[arg(long, default_value_t = 0)]
    pub level: u32,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the monotone iteration and write summary, trace, fields and mesh.
    Solve(Common),
    /// Check that the barriers are ordered sub- and supersolutions.
    CheckBarriers(Common),
    /// Recompute H from a stored fields.csv.
    Curvature {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fields: PathBuf,
    },
    /// Compare J at the solution against random feasible competitors.
    ProbeMinimality(Common),
    /// Dyadic refinement against the exact solution.
    ConvergenceStudy(Common),
}

impl Common {
    pub fn context(&self) -> Result<Context, CliError> {
        let mut config = match (&self.config, &self.scenario) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::for_bundled(name),
            (None, None) => {
                return Err(ConfigError::Invalid(vec![FieldError {
                    field: "--config".into(),
                    message: "pass --config or --scenario".into(),
                }])
                .into())
            }
        };
        if let (Some(_), Some(name)) = (&self.config, &self.scenario) {
            config.scenario = ScenarioConfig::Bundled { name: name.clone() };
            config.grid = None;
        }
        Context::new(config, self.level, self.out.clone())
    }
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

/// Run one command, report on stdout/stderr, return the exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve(c) => c.context().and_then(|ctx| {
            let s = commands::cmd_solve(&ctx)?;
            print_json(&s);
            Ok(())
        }),
        Command::CheckBarriers(c) => c.context().and_then(|ctx| {
            let r = commands::cmd_check_barriers(&ctx)?;
            print_json(&r);
            Ok(())
        }),
        Command::Curvature { common, fields } => common.context().and_then(|ctx| {
            let r = commands::cmd_curvature(&ctx, fields)?;
            print_json(&r);
            Ok(())
        }),
        Command::ProbeMinimality(c) => c.context().and_then(|ctx| {
            let r = commands::cmd_probe(&ctx)?;
            print_json(&r);
            Ok(())
        }),
        Command::ConvergenceStudy(c) => c.context().and_then(|ctx| {
            let r = commands::cmd_study(&ctx)?;
            for (k, level) in r.levels.iter().enumerate() {
                let order = k.checked_sub(1).map(|i| r.sup_orders[i]);
                eprintln!(
                    "{:?}  h = {:.4e}  sup error = {:.4e}  order = {}",
                    level.resolution,
                    level.spacing,
                    level.sup_error,
                    order.map_or("-".to_string(), |o| format!("{o:.3}"))
                );
            }
            print_json(&r);
            Ok(())
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if let CliError::Barrier {
                report: Some(report),
                ..
            } = &e
            {
                print_json(report);
            }
            if let CliError::Config(ConfigError::Invalid(fields)) = &e {
                for f in fields {
                    eprintln!("error: {}: {}", f.field, f.message);
                }
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}

/// Size the global rayon pool from `PMC_THREADS`.
pub fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("PMC_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("PMC_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

pub fn main_exit_code() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_CONFIG;
    }
    run(cli)
}
