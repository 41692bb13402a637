//! Command-line front end: simulate, sweep, compare, replay, validate.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 numerical
//! failure inside the filter (reported with the tick where it occurred).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use feel::{
    build_summary, compare_variants, frequency_sweep, load_scenario, preset, read_sensor_log_csv,
    replay, run_with, write_estimates_csv, write_sensor_log_csv, write_trace_csv, ConfigError,
    MetricsError, ReplayError, RunOptions, Scenario, SimError, VariantSpec, PRESET_NAMES,
};

#[derive(Parser)]
#[command(
    name = "feel",
    version,
    about = "Deterministic EKF localization simulator (IMU + UWB + radar) with adaptive sensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: paper-defaults, race-asa, or corridor-decay.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

impl ScenarioArg {
    fn load(&self) -> Result<Scenario, CliError> {
        match (&self.scenario, &self.preset) {
            (Some(path), None) => Ok(load_scenario(path)?),
            (None, Some(name)) => preset(name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown preset {name:?}; available: {}",
                    PRESET_NAMES.join(", ")
                ))
            }),
            (None, None) => Err(CliError::Config(
                "either --scenario <path> or --preset <name> is required".into(),
            )),
            (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes trace.csv and summary.json.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Output directory (created if missing).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Also write sensors.csv with the raw sensor stream for replay.
        #[arg(long)]
        dump_sensors: bool,
    },
    /// Fixed-frequency grid sweep; writes sweep.csv and sweep_summary.csv.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// UWB frequency grid in Hz, comma separated.
        #[arg(long = "f-u", value_delimiter = ',', required = true)]
        f_uwb: Vec<f64>,
        /// Radar frequency grid in Hz, comma separated.
        #[arg(long = "f-r", value_delimiter = ',', required = true)]
        f_radar: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Paired comparison of fusion variants; writes compare.csv and
    /// compare_summary.csv.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Variants: feel, imu-uwb, imu-radar, imu-only (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<String>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Re-run the filter over a recorded sensor log; writes estimates.csv
    /// and replay_summary.json.
    Replay {
        /// Sensor log CSV (as written by simulate --dump-sensors).
        #[arg(long, value_name = "PATH")]
        log: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Parse and validate a scenario, printing the resolved configuration.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
}

enum CliError {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Numerical { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Sim(sim) => sim.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ReplayError> for CliError {
    fn from(e: ReplayError) -> Self {
        match e {
            ReplayError::Filter { .. } => CliError::Numerical(e.to_string()),
            ReplayError::Log(log) => CliError::Config(log.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}

impl From<feel::LogError> for CliError {
    fn from(e: feel::LogError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            scenario,
            out,
            dump_sensors,
        } => {
            let scenario = scenario.load()?;
            ensure_dir(&out)?;
            let output = run_with(
                &scenario,
                RunOptions {
                    capture_sensor_log: dump_sensors,
                    ..Default::default()
                },
            )?;
            let trace_path = out.join("trace.csv");
            write_trace_csv(fs::File::create(&trace_path)?, &output.trace)?;
            let summary = build_summary(&scenario, &output.trace)?;
            let summary_path = out.join("summary.json");
            fs::write(&summary_path, serde_json::to_string_pretty(&summary).unwrap())?;
            if let Some(log) = &output.sensor_log {
                write_sensor_log_csv(fs::File::create(out.join("sensors.csv"))?, log)?;
            }
            println!(
                "simulate: {} ticks, rmse {:.2} cm, mean power {:.3} W, saving {:.1}%, \
                 mean step {:.4} ms",
                output.trace.rows.len(),
                summary.rmse_cm,
                summary.mean_power_w,
                summary.saving_pct,
                summary.latency.mean_ms,
            );
            println!("wrote {}", trace_path.display());
            println!("wrote {}", summary_path.display());
            Ok(())
        }
        Command::Sweep {
            scenario,
            f_uwb,
            f_radar,
            seeds,
            out,
        } => {
            let scenario = scenario.load()?;
            ensure_dir(&out)?;
            let surface = frequency_sweep(&scenario, &f_uwb, &f_radar, seeds)?;
            let mut long = csv::Writer::from_path(out.join("sweep.csv"))
                .map_err(|e| CliError::Config(e.to_string()))?;
            long.write_record(["f_uwb", "f_radar", "seed", "rmse_cm", "power_w"])
                .map_err(|e| CliError::Config(e.to_string()))?;
            for cell in &surface.cells {
                for (seed, rmse) in &cell.rmse_by_seed {
                    long.write_record([
                        cell.f_uwb.to_string(),
                        cell.f_radar.to_string(),
                        seed.to_string(),
                        rmse.to_string(),
                        cell.mean_power_w.to_string(),
                    ])
                    .map_err(|e| CliError::Config(e.to_string()))?;
                }
            }
            long.flush()?;
            let mut agg = csv::Writer::from_path(out.join("sweep_summary.csv"))
                .map_err(|e| CliError::Config(e.to_string()))?;
            agg.write_record(["f_uwb", "f_radar", "mean_rmse_cm", "std_rmse_cm", "mean_power_w"])
                .map_err(|e| CliError::Config(e.to_string()))?;
            for cell in &surface.cells {
                agg.write_record([
                    cell.f_uwb.to_string(),
                    cell.f_radar.to_string(),
                    cell.mean_rmse_cm.to_string(),
                    cell.std_rmse_cm.to_string(),
                    cell.mean_power_w.to_string(),
                ])
                .map_err(|e| CliError::Config(e.to_string()))?;
                println!(
                    "sweep ({:6.2}, {:6.2}) Hz: rmse {:.2} ± {:.2} cm, power {:.4} W",
                    cell.f_uwb, cell.f_radar, cell.mean_rmse_cm, cell.std_rmse_cm, cell.mean_power_w
                );
            }
            agg.flush()?;
            Ok(())
        }
        Command::Compare {
            scenario,
            variants,
            seeds,
            out,
        } => {
            let scenario = scenario.load()?;
            ensure_dir(&out)?;
            let specs: Vec<VariantSpec> = variants
                .iter()
                .map(|v| {
                    VariantSpec::parse(v).ok_or_else(|| {
                        CliError::Config(format!(
                            "unknown variant {v:?}; expected feel, imu-uwb, imu-radar, imu-only"
                        ))
                    })
                })
                .collect::<Result<_, _>>()?;
            let table = compare_variants(&scenario, &specs, seeds)?;
            let mut long = csv::Writer::from_path(out.join("compare.csv"))
                .map_err(|e| CliError::Config(e.to_string()))?;
            long.write_record(["variant", "seed", "rmse_cm"])
                .map_err(|e| CliError::Config(e.to_string()))?;
            for row in &table.rows {
                for (seed, rmse) in &row.rmse_by_seed {
                    long.write_record([
                        row.variant.to_string(),
                        seed.to_string(),
                        rmse.to_string(),
                    ])
                    .map_err(|e| CliError::Config(e.to_string()))?;
                }
            }
            long.flush()?;
            let mut agg = csv::Writer::from_path(out.join("compare_summary.csv"))
                .map_err(|e| CliError::Config(e.to_string()))?;
            agg.write_record(["variant", "mean_rmse_cm", "std_rmse_cm"])
                .map_err(|e| CliError::Config(e.to_string()))?;
            for row in &table.rows {
                agg.write_record([
                    row.variant.to_string(),
                    row.mean_rmse_cm.to_string(),
                    row.std_rmse_cm.to_string(),
                ])
                .map_err(|e| CliError::Config(e.to_string()))?;
                println!(
                    "{:10}  rmse {:7.2} ± {:.2} cm over {} seeds",
                    row.variant.to_string(),
                    row.mean_rmse_cm,
                    row.std_rmse_cm,
                    table.seeds.len()
                );
            }
            agg.flush()?;
            Ok(())
        }
        Command::Replay { log, scenario, out } => {
            let scenario = scenario.load()?;
            ensure_dir(&out)?;
            let records = read_sensor_log_csv(fs::File::open(&log)?)?;
            let result = replay(&records, &scenario)?;
            write_estimates_csv(fs::File::create(out.join("estimates.csv"))?, &result.estimates)?;
            let summary = serde_json::json!({
                "rows": result.estimates.len(),
                "rmse_cm": result.rmse_cm,
            });
            fs::write(
                out.join("replay_summary.json"),
                serde_json::to_string_pretty(&summary).unwrap(),
            )?;
            match result.rmse_cm {
                Some(rmse) => println!(
                    "replay: {} estimates, rmse {:.2} cm",
                    result.estimates.len(),
                    rmse
                ),
                None => println!(
                    "replay: {} estimates (no truth columns, rmse unavailable)",
                    result.estimates.len()
                ),
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            let scenario = scenario.load()?;
            println!("{}", serde_json::to_string_pretty(&scenario).unwrap());
            Ok(())
        }
    }
}
