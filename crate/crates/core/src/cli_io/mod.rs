//! Run configuration files, output writers, and the command-line entry
//! point.

mod config;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{error, info, warn};
use rayon::prelude::*;

pub use config::{normalize_units, parse_config, parse_config_str, OutputSection, RunConfig, ScenarioHeader};
pub use output::{
    format_g17, probes_csv, reaction_csv, sha256_hex, snapshot_file_name, snapshot_text, write_outputs, Manifest,
    ManifestFile,
};

use crate::error::{Error, Result};
use crate::scenarios::{build_scenario, RunResult, Scale, ScenarioKind, SCENARIO_NAMES};
use crate::verify_oracles::run_verification_suite;

/// Environment variable overriding the root of relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "PERIPORO_OUTPUT_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

/// Process exit code for an error class.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::InvalidGrid(_)
        | Error::InvalidParameter(_)
        | Error::UnknownScenario(_)
        | Error::Config { .. }
        | Error::ConfigParse(_)
        | Error::UnitMismatch { .. } => EXIT_CONFIG,
        Error::SingularShapeTensor { .. }
        | Error::InvertedElement { .. }
        | Error::ReturnMapFailure { .. }
        | Error::NonFiniteResidual { .. }
        | Error::SolveFailure { .. }
        | Error::NonConvergence { .. } => EXIT_SOLVER,
    }
}

#[derive(Debug, Parser)]
#[command(name = "periporo", version, about = "Nonlocal two-phase poromechanics simulator")]
pub struct Cli {
    /// Serial factorization; repeated runs give bit-identical outputs.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Worker threads for assembly and factorization.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Force the desk-scale geometry.
    #[arg(long)]
    pub desk_scale: bool,
    /// Allow full-scale geometry.
    #[arg(long)]
    pub long_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario described by a configuration file.
    Run {
        /// Configuration file (alternative to --config).
        path: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        desk_scale: bool,
        #[arg(long)]
        long_run: bool,
    },
    /// Run the oracle suite: FD tangents, patch tests, quadrature ratios.
    Verify,
    /// Run one configuration for several values of a parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// One of G, dt, rate, dx, amplitude.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Print the packaged scenarios.
    ListScenarios,
}

/// Apply thread and determinism settings to the global pools.
pub fn configure_parallelism(threads: Option<usize>, deterministic: bool) {
    if let Some(n) = threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            warn!("thread pool already initialised; --threads ignored");
        }
    }
    let par = if deterministic {
        faer::Parallelism::None
    } else {
        faer::Parallelism::Rayon(threads.unwrap_or(0))
    };
    faer::set_global_parallelism(par);
}

/// Run directory for `config`: relative directories are placed under the
/// output root from the environment, if set.
pub fn output_dir(config: &RunConfig) -> PathBuf {
    let dir = config
        .output
        .directory
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.scenario.name));
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => Path::new(&root).join(dir),
        _ => dir,
    }
}

fn apply_scale(mut cfg: RunConfig, desk_scale: bool, long_run: bool) -> Result<RunConfig> {
    if desk_scale && cfg.scenario.scale != Scale::Desk {
        info!("--desk-scale: scenario.scale set to desk");
        cfg.scenario.scale = Scale::Desk;
    }
    if cfg.scenario.scale == Scale::Full && !long_run {
        return Err(Error::config("scenario.scale", "full scale requires --long-run"));
    }
    Ok(cfg)
}

/// Load, scale-adjust, and resolve a configuration file.
pub fn load_config(path: &Path, desk_scale: bool, long_run: bool) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    apply_scale(parse_config_str(&text)?, desk_scale, long_run)?.resolve()
}

/// Build and run a resolved configuration.
pub fn execute(config: &RunConfig) -> Result<RunResult> {
    let scenario = build_scenario(&config.scenario.name, &config.options())?;
    Ok(scenario.run())
}

/// Run and write outputs into `dir`. A solver failure still writes the
/// partial results before it is returned.
pub fn run_to_dir(config: &RunConfig, dir: &Path) -> Result<Manifest> {
    let mut result = execute(config)?;
    let manifest = write_outputs(&result, config, dir)?;
    info!("{}: {} steps, status {}, outputs in {}", manifest.scenario, manifest.steps, manifest.status, dir.display());
    match result.error.take() {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn set_param(cfg: &mut RunConfig, param: &str, value: f64) -> Result<()> {
    match param {
        "G" | "gain" => cfg.solver.gain = Some(value),
        "dt" => cfg.solver.dt = Some(value),
        "rate" => cfg.loading.rate = Some(value),
        "dx" => cfg.geometry.dx = Some(value),
        "amplitude" => cfg.loading.amplitude = Some(value),
        other => return Err(Error::config("sweep.param", format!("unknown sweep parameter '{other}'"))),
    }
    Ok(())
}

/// Run `config` once per value of `param`, each into `<dir>/<param>=<value>`.
pub fn sweep(args: &RunArgs, param: &str, values: &[String]) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let base = apply_scale(parse_config_str(&text)?, args.desk_scale, args.long_run)?;
    let root = output_dir(&base.clone().resolve()?);
    let mut jobs = Vec::new();
    for raw in values {
        let value: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Error::config("sweep.values", format!("not a number: '{raw}'")))?;
        let mut cfg = base.clone();
        set_param(&mut cfg, param, value)?;
        let dir = root.join(format!("{param}={}", raw.trim()));
        cfg.output.directory = Some(dir.clone());
        jobs.push((cfg.resolve()?, dir));
    }
    jobs.par_iter().map(|(cfg, dir)| run_to_dir(cfg, dir).map(|_| dir.clone())).collect()
}

fn report(result: Result<i32>) -> i32 {
    match result {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parse `args` and dispatch; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    configure_parallelism(cli.threads, cli.deterministic);
    match cli.command {
        Command::ListScenarios => {
            for name in SCENARIO_NAMES {
                let kind = ScenarioKind::from_name(name).expect("packaged name");
                println!("{name:<24} {}", kind.description());
            }
            EXIT_OK
        }
        Command::Verify => report(run_verification_suite().map(|reports| {
            for r in &reports {
                println!("{r}");
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            println!("{} checks, {failed} failed", reports.len());
            if failed == 0 {
                EXIT_OK
            } else {
                EXIT_VERIFY
            }
        })),
        Command::Run {
            path,
            config,
            desk_scale,
            long_run,
        } => report((|| {
            let path = config
                .or(path)
                .ok_or_else(|| Error::config("config", "no configuration file given"))?;
            let cfg = load_config(&path, desk_scale, long_run)?;
            let dir = output_dir(&cfg);
            run_to_dir(&cfg, &dir)?;
            println!("{}", dir.display());
            Ok(EXIT_OK)
        })()),
        Command::Sweep { run, param, values } => report(sweep(&run, &param, &values).map(|dirs| {
            for d in dirs {
                println!("{}", d.display());
            }
            EXIT_OK
        })),
    }
}
