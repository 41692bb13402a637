//! Trace and sensor-log persistence, run summaries, and log replay.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! parsed back from a file is bit-identical to the value written. Trace files
//! depend only on the scenario and seed, never on wall-clock timing, which
//! keeps repeated runs byte-identical.

use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::filter::{FeelFilter, FilterError, MeasurementNoise, PredictModel, RadarMeasurement, UwbMeasurement};
use crate::filter::ImuSample;
use crate::metrics::{latency_profile, rmse_cm, LatencyStats, MetricsError};
use crate::power::energy_report;
use crate::scenario::{LogRecord, Scenario, SimulationTrace};
use crate::track::TICK_S;
use crate::Real;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

pub const TRACE_COLUMNS: [&str; 17] = [
    "schema_version",
    "t",
    "truth_x",
    "truth_y",
    "truth_vx",
    "truth_vy",
    "est_x",
    "est_y",
    "est_vx",
    "est_vy",
    "p_xx",
    "p_yy",
    "p_vxvx",
    "p_vyvy",
    "f_uwb",
    "f_radar",
    "power_w",
];

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("sensor log contains no IMU rows")]
    Empty,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("record {index}: {source}")]
    Filter { index: usize, source: FilterError },
}

/// Writes the per-tick trace. Compute-time is intentionally not a column:
/// it varies run to run, and the trace is the determinism surface.
pub fn write_trace_csv<W: Write>(out: W, trace: &SimulationTrace) -> Result<(), LogError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in &trace.rows {
        w.write_record([
            TRACE_SCHEMA_VERSION.to_string(),
            r.t.to_string(),
            r.truth_x.to_string(),
            r.truth_y.to_string(),
            r.truth_vx.to_string(),
            r.truth_vy.to_string(),
            r.est_x.to_string(),
            r.est_y.to_string(),
            r.est_vx.to_string(),
            r.est_vy.to_string(),
            r.p_xx.to_string(),
            r.p_yy.to_string(),
            r.p_vxvx.to_string(),
            r.p_vyvy.to_string(),
            r.f_uwb.to_string(),
            r.f_radar.to_string(),
            r.power_w.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const SENSOR_LOG_COLUMNS: [&str; 9] = [
    "t", "sensor", "v1", "v2", "v3", "v4", "v5", "truth_x", "truth_y",
];

/// Sensor rows carry `(t, sensor, payload...)`. Payload arity per sensor:
/// imu `(ax, ay, theta)`, uwb `(x, y, vx, vy)`, radar `(x, y, vx, vy, d)`
/// with an empty `d` cell when no object is in range. IMU rows from the
/// simulator also carry the ground-truth position.
pub fn write_sensor_log_csv<W: Write>(out: W, records: &[LogRecord]) -> Result<(), LogError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SENSOR_LOG_COLUMNS)?;
    let blank = String::new();
    for r in records {
        let row = match r {
            LogRecord::Imu {
                t,
                ax,
                ay,
                theta,
                truth,
            } => [
                t.to_string(),
                "imu".into(),
                ax.to_string(),
                ay.to_string(),
                theta.to_string(),
                blank.clone(),
                blank.clone(),
                truth.map(|p| p.0.to_string()).unwrap_or_default(),
                truth.map(|p| p.1.to_string()).unwrap_or_default(),
            ],
            LogRecord::Uwb { t, x, y, vx, vy } => [
                t.to_string(),
                "uwb".into(),
                x.to_string(),
                y.to_string(),
                vx.to_string(),
                vy.to_string(),
                blank.clone(),
                blank.clone(),
                blank.clone(),
            ],
            LogRecord::Radar {
                t,
                x,
                y,
                vx,
                vy,
                distance,
            } => [
                t.to_string(),
                "radar".into(),
                x.to_string(),
                y.to_string(),
                vx.to_string(),
                vy.to_string(),
                distance.map(|d| d.to_string()).unwrap_or_default(),
                blank.clone(),
                blank.clone(),
            ],
        };
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_cell(record: &csv::StringRecord, idx: usize, line: u64) -> Result<Real, LogError> {
    let cell = record.get(idx).unwrap_or("");
    cell.parse::<Real>().map_err(|_| LogError::Malformed {
        line,
        msg: format!("column {} is not a number: {cell:?}", SENSOR_LOG_COLUMNS[idx]),
    })
}

fn cell_is_empty(record: &csv::StringRecord, idx: usize) -> bool {
    record.get(idx).is_none_or(|c| c.is_empty())
}

pub fn read_sensor_log_csv<R: Read>(input: R) -> Result<Vec<LogRecord>, LogError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(input);
    let mut records = Vec::new();
    let mut last_t = Real::NEG_INFINITY;
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() < 2 {
            return Err(LogError::Malformed {
                line,
                msg: "expected at least (t, sensor) columns".into(),
            });
        }
        let t = parse_cell(&row, 0, line)?;
        if t < last_t {
            return Err(LogError::Malformed {
                line,
                msg: format!("rows are not time-sorted ({t} after {last_t})"),
            });
        }
        last_t = t;
        let sensor = row.get(1).unwrap_or("");
        let arity = (2..row.len()).take_while(|i| !cell_is_empty(&row, *i)).count();
        let record = match sensor {
            "imu" => {
                if arity != 3 {
                    return Err(LogError::Malformed {
                        line,
                        msg: format!("imu rows carry 3 payload values, found {arity}"),
                    });
                }
                let truth = if row.len() >= 9 && !cell_is_empty(&row, 7) && !cell_is_empty(&row, 8)
                {
                    Some((parse_cell(&row, 7, line)?, parse_cell(&row, 8, line)?))
                } else {
                    None
                };
                LogRecord::Imu {
                    t,
                    ax: parse_cell(&row, 2, line)?,
                    ay: parse_cell(&row, 3, line)?,
                    theta: parse_cell(&row, 4, line)?,
                    truth,
                }
            }
            "uwb" => {
                if arity != 4 {
                    return Err(LogError::Malformed {
                        line,
                        msg: format!("uwb rows carry 4 payload values, found {arity}"),
                    });
                }
                LogRecord::Uwb {
                    t,
                    x: parse_cell(&row, 2, line)?,
                    y: parse_cell(&row, 3, line)?,
                    vx: parse_cell(&row, 4, line)?,
                    vy: parse_cell(&row, 5, line)?,
                }
            }
            "radar" => {
                if arity != 4 && arity != 5 {
                    return Err(LogError::Malformed {
                        line,
                        msg: format!("radar rows carry 4 or 5 payload values, found {arity}"),
                    });
                }
                LogRecord::Radar {
                    t,
                    x: parse_cell(&row, 2, line)?,
                    y: parse_cell(&row, 3, line)?,
                    vx: parse_cell(&row, 4, line)?,
                    vy: parse_cell(&row, 5, line)?,
                    distance: if arity == 5 {
                        Some(parse_cell(&row, 6, line)?)
                    } else {
                        None
                    },
                }
            }
            other => {
                return Err(LogError::Malformed {
                    line,
                    msg: format!("unknown sensor {other:?}"),
                })
            }
        };
        records.push(record);
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateRow {
    pub t: Real,
    pub est_x: Real,
    pub est_y: Real,
    pub est_vx: Real,
    pub est_vy: Real,
    pub p_xx: Real,
    pub p_yy: Real,
    pub p_vxvx: Real,
    pub p_vyvy: Real,
}

#[derive(Clone, Debug)]
pub struct ReplayResult {
    pub estimates: Vec<EstimateRow>,
    /// Present when the log carried ground-truth columns.
    pub rmse_cm: Option<f64>,
}

/// Runs the filter over a recorded sensor stream: every IMU row drives one
/// filter step, UWB/radar rows are staged for the following step. Filter
/// parameters and the initial pose come from the scenario.
pub fn replay(records: &[LogRecord], scenario: &Scenario) -> Result<ReplayResult, ReplayError> {
    if !records
        .iter()
        .any(|r| matches!(r, LogRecord::Imu { .. }))
    {
        return Err(LogError::Empty.into());
    }
    let model = PredictModel::new(TICK_S, scenario.noise.imu);
    let noise = MeasurementNoise {
        uwb: scenario.noise.uwb,
        radar: scenario.noise.radar,
    };
    let start_pose = scenario.track.pose_at(0.0);
    let mut filter = FeelFilter::new(
        model,
        scenario.weights,
        noise,
        scenario.initial_estimate((start_pose.x, start_pose.y)),
    );

    let mut estimates = Vec::new();
    let mut err_sum = 0.0;
    let mut err_count = 0usize;
    for (index, record) in records.iter().enumerate() {
        match *record {
            LogRecord::Imu {
                t,
                ax,
                ay,
                theta,
                truth,
            } => {
                let est = filter
                    .step(&ImuSample { ax, ay, theta, t })
                    .map_err(|source| ReplayError::Filter { index, source })?;
                estimates.push(EstimateRow {
                    t,
                    est_x: est.x(),
                    est_y: est.y(),
                    est_vx: est.vx(),
                    est_vy: est.vy(),
                    p_xx: est.covariance.0[0][0],
                    p_yy: est.covariance.0[1][1],
                    p_vxvx: est.covariance.0[2][2],
                    p_vyvy: est.covariance.0[3][3],
                });
                if let Some((tx, ty)) = truth {
                    err_sum += (est.x() - tx).powi(2) + (est.y() - ty).powi(2);
                    err_count += 1;
                }
            }
            LogRecord::Uwb { t, x, y, vx, vy } => {
                filter.stage_uwb(UwbMeasurement { x, y, vx, vy, t });
            }
            LogRecord::Radar {
                t,
                x,
                y,
                vx,
                vy,
                distance,
            } => {
                filter.stage_radar(RadarMeasurement {
                    x,
                    y,
                    vx,
                    vy,
                    distance,
                    t,
                });
            }
        }
    }
    let rmse_cm = (err_count > 0).then(|| 100.0 * (err_sum / err_count as f64).sqrt());
    Ok(ReplayResult { estimates, rmse_cm })
}

pub fn write_estimates_csv<W: Write>(out: W, rows: &[EstimateRow]) -> Result<(), LogError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t", "est_x", "est_y", "est_vx", "est_vy", "p_xx", "p_yy", "p_vxvx", "p_vyvy",
    ])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.est_x.to_string(),
            r.est_y.to_string(),
            r.est_vx.to_string(),
            r.est_vy.to_string(),
            r.p_xx.to_string(),
            r.p_yy.to_string(),
            r.p_vxvx.to_string(),
            r.p_vyvy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary emitted next to every trace; embeds the resolved scenario so the
/// run is reproducible from this file alone.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub variant: String,
    pub rmse_cm: f64,
    pub mean_power_w: f64,
    pub energy_j: f64,
    pub saving_pct: f64,
    pub latency: LatencyStats,
    pub config: Scenario,
}

pub fn build_summary(
    scenario: &Scenario,
    trace: &SimulationTrace,
) -> Result<RunSummary, MetricsError> {
    let freqs: Vec<(f64, f64)> = trace.rows.iter().map(|r| (r.f_uwb, r.f_radar)).collect();
    let energy = energy_report(&freqs, trace.dt_s, &scenario.power)
        .map_err(|e| MetricsError::Invalid(e.to_string()))?;
    Ok(RunSummary {
        schema_version: TRACE_SCHEMA_VERSION,
        seed: trace.seed,
        variant: trace.variant.to_string(),
        rmse_cm: rmse_cm(trace)?,
        mean_power_w: energy.mean_power_w,
        energy_j: energy.total_energy_j,
        saving_pct: energy.saving_pct,
        latency: latency_profile(trace)?,
        config: scenario.clone(),
    })
}
