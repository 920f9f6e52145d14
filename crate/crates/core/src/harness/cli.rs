//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{parse_gauge, parse_override};
use super::output;
use super::scan::linspace;
use super::{benchmark, run, scan_constant_c, SimulationConfig, StopReason};
use crate::error::{Error, Result};

// Report lines go to stdout; a closed pipe (e.g. `| head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "ifgauge", version, about = "Integrating-factor Schrödinger solver with gauge-optimised adaptive steps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set tol=1e-8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (defaults to `output_dir` from the config, else `out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one configuration and write steps.csv and summary.json.
    Run(Common),
    /// Repeat a run with C held at each given constant and write scan.csv.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Comma-separated list of constants.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "c_range")]
        c_values: Option<Vec<f64>>,
        /// `LO:HI:N`, N evenly spaced values.
        #[arg(long, allow_hyphen_values = true, default_value = "-2:4:13")]
        c_range: String,
    },
    /// Compare gauge strategies on one problem and write bench.csv.
    Bench {
        /// Configuration files; all must describe the same problem.
        #[arg(long, value_name = "PATH", required = true)]
        config: Vec<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Comma-separated strategies applied to every config
        /// (default `zero,near_optimal` when a single config is given).
        #[arg(long, value_delimiter = ',')]
        gauges: Option<Vec<String>>,
    },
    /// Parse and validate a configuration without running it.
    ValidateConfig {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn load(path: &Path, set: &[String]) -> Result<SimulationConfig> {
    let overrides = set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    SimulationConfig::load(path, &overrides)
}

fn out_dir(flag: Option<PathBuf>, config: &SimulationConfig) -> PathBuf {
    flag.or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("`--c-range {s}`: expected LO:HI:N"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok(linspace(lo, hi, n))
}

fn exit_for(stop: StopReason) -> i32 {
    match stop {
        StopReason::Completed => EXIT_OK,
        StopReason::BlowUp | StopReason::StepUnderflow => EXIT_RUNTIME,
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Run(common) => {
            let config = load(&common.config, &common.set)?;
            let out = run(&config)?;
            let dir = out_dir(common.out, &config);
            output::write_outputs(&dir, &out, config.record_every)?;
            let s = &out.summary;
            say!(
                "{:?}: t = {}, n_loops = {} ({} accepted, {} rejected), wall = {:.3} s, mass drift = {:.3e}",
                s.stop_reason,
                s.t_reached,
                s.n_loops,
                s.n_accepted,
                s.n_rejected,
                s.wall_seconds,
                s.relative_mass_drift()
            );
            say!("wrote {}", dir.display());
            Ok(exit_for(s.stop_reason))
        }
        Command::Scan {
            common,
            c_values,
            c_range,
        } => {
            let config = load(&common.config, &common.set)?;
            let values = match c_values {
                Some(v) => v,
                None => parse_range(&c_range)?,
            };
            if let Some(bad) = values.iter().find(|c| !c.is_finite()) {
                return Err(Error::Config(format!("scan value {bad} is not finite")));
            }
            let rows = scan_constant_c(&config, &values);
            let dir = out_dir(common.out, &config);
            let path = output::write_scan(&dir, &rows)?;
            say!("{:>10} {:>14} {:>8}", "C", "h_av", "n_loops");
            for r in &rows {
                say!("{:>10.4} {:>14.6e} {:>8}", r.c, r.h_av, r.n_loops);
            }
            if rows.len() < values.len() {
                say!("{} of {} runs produced no row", values.len() - rows.len(), values.len());
            }
            say!("wrote {}", path.display());
            Ok(EXIT_OK)
        }
        Command::Bench {
            config,
            set,
            out,
            gauges,
        } => {
            let base: Vec<SimulationConfig> = config
                .iter()
                .map(|p| load(p, &set))
                .collect::<Result<_>>()?;
            let gauges = match gauges {
                Some(g) => Some(g),
                None if base.len() == 1 => Some(vec!["zero".into(), "near_optimal".into()]),
                None => None,
            };
            let configs: Vec<SimulationConfig> = match gauges {
                Some(names) => {
                    let mut v = Vec::new();
                    for c in &base {
                        for name in &names {
                            let search = match c.gauge {
                                crate::gauge::GaugeStrategy::NumericOptimal(s) => s,
                                _ => Default::default(),
                            };
                            v.push(c.with_gauge(parse_gauge(name.trim(), search)?));
                        }
                    }
                    v
                }
                None => base.clone(),
            };
            let table = benchmark(&configs)?;
            let dir = out_dir(out, &base[0]);
            let path = output::write_bench(&dir, &table)?;
            say!(
                "{:>16} {:>9} {:>9} {:>9} {:>10} {:>8} {:>8} {:>11}",
                "gauge", "n_loops", "accepted", "rejected", "wall_s", "loops_x", "time_x", "max_dev"
            );
            for r in &table.rows {
                say!(
                    "{:>16} {:>9} {:>9} {:>9} {:>10.3} {:>8.3} {:>8.3} {:>11.3e}",
                    r.gauge,
                    r.n_loops,
                    r.n_accepted,
                    r.n_rejected,
                    r.wall_seconds,
                    r.loop_ratio,
                    r.time_ratio,
                    r.max_modulus_dev.max(r.max_unwound_dev)
                );
            }
            say!(
                "equivalence bound {:.3e}: {}",
                table.bound,
                if table.equivalent { "ok" } else { "VIOLATED" }
            );
            say!("wrote {}", path.display());
            Ok(if table.equivalent { EXIT_OK } else { EXIT_RUNTIME })
        }
        Command::ValidateConfig { config, set } => {
            let c = load(&config, &set)?;
            let _ = std::io::stdout().lock().write_all(c.to_text().as_bytes());
            Ok(EXIT_OK)
        }
    }
}

/// Parse arguments (including the program name) and run. Returns the process
/// exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
