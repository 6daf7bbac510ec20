//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{self, ProtocolKind, RawConfig, Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::scenario;

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "MAGNOTRANSFER_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "magnotransfer",
    version,
    about = "Two-mode bosonic state-transfer simulator"
)]
struct Cli {
    /// Worker threads for sweeps and scans.
    #[arg(long, env = THREADS_ENV, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario from a config file.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` settings applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a named preset (fig2 ... fig8, custom).
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Print the effective config instead of running.
        #[arg(long)]
        dump_config: bool,
    },
    /// Print a sampled pulse schedule as CSV.
    Schedule {
        /// pi_pulse, tqd, lr or lr_optimized.
        protocol: String,
        /// Write the CSV to stdout.
        #[arg(long)]
        dump: bool,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Numeric and analytic error sensitivities as JSON.
    Sensitivity {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check a config file and print its effective form.
    Validate { config: PathBuf },
}

fn read_raw(path: &PathBuf, set: &[String]) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ConfigMissing(format!("cannot read {}: {e}", path.display())))?;
    let mut raw = RawConfig::parse(&text)?;
    for s in set {
        raw.set(s)?;
    }
    Ok(raw)
}

fn print_summary(summary: &scenario::Summary, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, summary)?;
    writeln!(out)?;
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out: dir,
            set,
        } => {
            let cfg = ScenarioConfig::from_raw(read_raw(&config, &set)?)?;
            let dir = dir.unwrap_or_else(|| cfg.output.clone());
            let summary = scenario::run_scenario_in(&cfg, &dir)?;
            print_summary(&summary, out)
        }
        Command::Preset {
            name,
            out: dir,
            set,
            dump_config,
        } => {
            let sc: Scenario = name.parse().map_err(|m| Error::Config {
                line: 0,
                message: m,
            })?;
            let mut raw = RawConfig::parse(config::preset_text(sc))?;
            if sc == Scenario::Custom {
                raw.set("protocol.kind=pi_pulse")?;
                raw.set("initial=fock 1")?;
            }
            for s in &set {
                raw.set(s)?;
            }
            let mut cfg = ScenarioConfig::from_raw(raw)?;
            if let Some(d) = dir {
                cfg.output = d;
            } else if !set.iter().any(|s| s.trim_start().starts_with("output")) {
                cfg.output = scenario::default_out_dir(sc);
            }
            if dump_config {
                write!(out, "{}", cfg.to_text())?;
                return Ok(());
            }
            let summary = scenario::run_scenario(&cfg)?;
            print_summary(&summary, out)
        }
        Command::Schedule {
            protocol,
            dump,
            set,
        } => {
            let kind: ProtocolKind = protocol.parse().map_err(|m| Error::Config {
                line: 0,
                message: m,
            })?;
            let mut raw = RawConfig::parse("scenario = custom\ninitial = fock 1\n")?;
            raw.set(&format!("protocol.kind={}", kind.name()))?;
            for s in &set {
                raw.set(s)?;
            }
            let cfg = ScenarioConfig::from_raw(raw)?;
            let schedule = scenario::build_schedule(&cfg.protocol, kind)?;
            if dump {
                schedule.write_csv(cfg.schedule_samples, &mut *out)?;
            } else {
                for (k, v) in schedule.metadata() {
                    writeln!(out, "{k} = {v}")?;
                }
            }
            Ok(())
        }
        Command::Sensitivity { config, set } => {
            let cfg = ScenarioConfig::from_raw(read_raw(&config, &set)?)?;
            let report = scenario::run_sensitivity(&cfg)?;
            serde_json::to_writer_pretty(&mut *out, &report)?;
            writeln!(out)?;
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::from_raw(read_raw(&config, &[])?)?;
            write!(out, "{}", cfg.to_text())?;
            if let Some(d) = &cfg.device {
                let m = crate::device::EffectiveModel::from_params(d)?;
                for diag in crate::device::validate_regime(d, &m) {
                    writeln!(
                        out,
                        "# {} {}: {} ({})",
                        if diag.pass { "ok" } else { "WARN" },
                        diag.name,
                        diag.ratio,
                        diag.condition
                    )?;
                }
            }
            Ok(())
        }
    }
}

fn configure_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config {
                line: 0,
                message: format!("{THREADS_ENV} must be positive"),
            });
        }
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Runs the CLI on `args`, writing results to `out` and errors to stderr.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads(cli.threads).and_then(|()| execute(cli, out));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                Error::Config { line: 0, message } => eprintln!("error: {message}"),
                Error::Config { line, message } => eprintln!("error: line {line}: {message}"),
                other => eprintln!("error: {other}"),
            }
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERIC
            }
        }
    }
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run(std::env::args_os(), &mut lock)
}
