//! feel — deterministic simulation and benchmarking suite for an EKF-based
//! indoor localization stack fusing IMU, UWB, and radar, with an adaptive
//! sensing scheduler that trades localization accuracy against sensing energy.
//!
//! The numeric core (filter, scheduler, power model) is generic over the
//! scalar type; the simulator and CLI run on [`Real`].

pub mod asa;
pub mod config;
pub mod env;
pub mod filter;
pub mod io;
pub mod math;
pub mod metrics;
pub mod power;
pub mod scenario;
pub mod sensors;
pub mod track;

/// Scalar type used by the simulator, the metrics, and the CLI.
pub type Real = f64;

pub use asa::{asa_step, AsaConfig, SamplingState, SensorBand};
pub use config::{load_scenario, preset, ConfigError, ScenarioFile, PRESET_NAMES};
pub use env::{Environment, EnvironmentId, Obstacle, RADAR_RANGE_M};
pub use filter::{
    fuse_measurements, predict, update, ControlInput, FeelFilter, FilterError, FusionWeights,
    ImuSample, KalmanIntermediates, MeasurementBundle, MeasurementNoise, PredictModel,
    RadarMeasurement, StateEstimate, UwbMeasurement,
};
pub use io::{
    build_summary, read_sensor_log_csv, replay, write_estimates_csv, write_sensor_log_csv,
    write_trace_csv, EstimateRow, LogError, ReplayError, ReplayResult, RunSummary,
    SENSOR_LOG_COLUMNS, TRACE_COLUMNS, TRACE_SCHEMA_VERSION,
};
pub use math::{Mat4, Scalar, Vec4};
pub use metrics::{
    compare_variants, frequency_sweep, latency_profile, nees_series, nees_windows, rmse_cm,
    ComparisonTable, LatencyStats, MetricsError, SweepCell, SweepSurface, VariantRow,
    CHI2_4_LOWER_95, CHI2_4_UPPER_95,
};
pub use power::{energy_report, EnergySummary, PowerAnchors, PowerError, PowerModel};
pub use scenario::{
    run_scenario, run_with, AsaSettings, LogRecord, RunOptions, RunOutput, Scenario, SimError,
    SimulationTrace, TraceRow, VariantSpec,
};
pub use sensors::{EmissionSchedule, NoiseConfig, SensorSim};
pub use track::{gen_trajectory, GroundTruth, SpeedProfile, TrackProfile, TruthTick, TICK_S};
