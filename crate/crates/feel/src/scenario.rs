//! Scenario description and the 1 kHz simulation loop.
//!
//! One tick: sample the IMU and step the filter (consuming measurements
//! staged on earlier ticks), then emit any UWB/radar samples that fall due at
//! this tick (they become visible to the filter on the next tick), then let
//! the sampling scheduler adapt once per period, and finally record the trace
//! row with the frequencies and power in effect after adaptation.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asa::{asa_step, AsaConfig, SamplingState};
use crate::env::{Environment, EnvironmentId};
use crate::filter::{
    FeelFilter, FilterError, FusionWeights, MeasurementNoise, PredictModel, StateEstimate,
};
use crate::math::{Mat4, Vec4};
use crate::power::{PowerError, PowerModel};
use crate::sensors::{EmissionSchedule, NoiseConfig, SensorSim};
use crate::track::{gen_trajectory, SpeedProfile, TrackProfile, TICK_S};
use crate::Real;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("numerical failure at tick {tick} (t = {t_s} s): {source}")]
    Numerical {
        tick: usize,
        t_s: Real,
        source: FilterError,
    },
    #[error(transparent)]
    Power(#[from] PowerError),
}

/// Which sensor streams reach the filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantSpec {
    /// Full fusion of IMU, UWB, and radar.
    Feel,
    ImuUwb,
    ImuRadar,
    /// Dead reckoning: prediction only, no measurement updates.
    ImuOnly,
}

impl VariantSpec {
    pub fn uses_uwb(&self) -> bool {
        matches!(self, VariantSpec::Feel | VariantSpec::ImuUwb)
    }

    pub fn uses_radar(&self) -> bool {
        matches!(self, VariantSpec::Feel | VariantSpec::ImuRadar)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "feel" => Some(Self::Feel),
            "imu-uwb" => Some(Self::ImuUwb),
            "imu-radar" => Some(Self::ImuRadar),
            "imu-only" => Some(Self::ImuOnly),
            _ => None,
        }
    }

    pub const ALL: [VariantSpec; 4] = [
        VariantSpec::Feel,
        VariantSpec::ImuUwb,
        VariantSpec::ImuRadar,
        VariantSpec::ImuOnly,
    ];
}

impl std::fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            VariantSpec::Feel => "feel",
            VariantSpec::ImuUwb => "imu-uwb",
            VariantSpec::ImuRadar => "imu-radar",
            VariantSpec::ImuOnly => "imu-only",
        };
        write!(f, "{s}")
    }
}

/// Sampling-rate control for a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AsaSettings {
    /// When false, both sensors stay at their maximum frequencies.
    pub enabled: bool,
    pub config: AsaConfig<Real>,
}

/// Fully resolved description of one experiment, SI units throughout.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub duration_s: Real,
    pub track: TrackProfile,
    pub speed: SpeedProfile,
    pub environment: Environment,
    pub noise: NoiseConfig,
    pub weights: FusionWeights<Real>,
    pub asa: AsaSettings,
    pub power: PowerModel<Real>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let cfg = |msg: String| SimError::Config(msg);
        self.track.validate().map_err(cfg)?;
        self.speed.validate().map_err(cfg)?;
        self.environment.validate().map_err(cfg)?;
        self.noise.validate().map_err(cfg)?;
        self.weights.validate().map_err(cfg)?;
        self.asa.config.validate().map_err(cfg)?;
        self.power.validate().map_err(cfg)?;

        if matches!(self.track, TrackProfile::Race { .. })
            && self.environment.id == EnvironmentId::E3
        {
            return Err(SimError::Config(
                "race track is excluded in E3: the narrow corridor has no room for turns"
                    .into(),
            ));
        }

        // The adaptive bounds must be inside the power model's supported range.
        let bands = [
            (&self.asa.config.uwb, &self.power.uwb_range, "uwb"),
            (&self.asa.config.radar, &self.power.radar_range, "radar"),
        ];
        for (band, range, name) in bands {
            if band.f_min < range[0] || band.f_max > range[1] {
                return Err(SimError::Config(format!(
                    "{name} band [{}, {}] Hz outside the power model range [{}, {}] Hz",
                    band.f_min, band.f_max, range[0], range[1]
                )));
            }
        }

        // Objects may not intersect the driven path.
        let length = self.track.path_length();
        let steps = (length / 0.01).ceil() as usize;
        for i in 0..=steps {
            let s = (i as Real) * length / steps as Real;
            let pose = self.track.pose_at(s);
            for o in &self.environment.objects {
                if (pose.x - o.x).hypot(pose.y - o.y) <= o.radius {
                    return Err(SimError::Config(format!(
                        "object at ({}, {}) with radius {} intersects the track",
                        o.x, o.y, o.radius
                    )));
                }
            }
        }
        Ok(())
    }

    /// Filter initial state: ground-truth start pose, zero velocity, small
    /// nonzero covariance.
    pub fn initial_estimate(&self, start: (Real, Real)) -> StateEstimate<Real> {
        StateEstimate::new(
            Vec4([start.0, start.1, 0.0, 0.0]),
            Mat4::from_diag([0.01; 4]),
        )
    }
}

/// Per-tick record of truth, estimate, sampling state, and cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: Real,
    pub truth_x: Real,
    pub truth_y: Real,
    pub truth_vx: Real,
    pub truth_vy: Real,
    pub est_x: Real,
    pub est_y: Real,
    pub est_vx: Real,
    pub est_vy: Real,
    pub p_xx: Real,
    pub p_yy: Real,
    pub p_vxvx: Real,
    pub p_vyvy: Real,
    pub f_uwb: Real,
    pub f_radar: Real,
    pub power_w: Real,
    /// Filter compute time for this tick (s). Kept in memory for latency
    /// statistics; not part of the persisted trace so runs stay byte-identical.
    pub step_time_s: Real,
}

#[derive(Clone, Debug)]
pub struct SimulationTrace {
    pub dt_s: Real,
    pub seed: u64,
    pub variant: VariantSpec,
    pub rows: Vec<TraceRow>,
}

/// Raw sensor records in emission order, for log dumps and replay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogRecord {
    Imu {
        t: Real,
        ax: Real,
        ay: Real,
        theta: Real,
        /// Ground-truth position, present in simulator-dumped logs.
        truth: Option<(Real, Real)>,
    },
    Uwb {
        t: Real,
        x: Real,
        y: Real,
        vx: Real,
        vy: Real,
    },
    Radar {
        t: Real,
        x: Real,
        y: Real,
        vx: Real,
        vy: Real,
        distance: Option<Real>,
    },
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub variant: Option<VariantSpec>,
    /// Fixed `(f_uwb, f_radar)` override; disables adaptation (sweep cells).
    pub rate_override: Option<(Real, Real)>,
    pub seed_override: Option<u64>,
    pub capture_sensor_log: bool,
}

pub struct RunOutput {
    pub trace: SimulationTrace,
    pub sensor_log: Option<Vec<LogRecord>>,
}

pub fn run_scenario(scenario: &Scenario) -> Result<SimulationTrace, SimError> {
    Ok(run_with(scenario, RunOptions::default())?.trace)
}

/// Wraps an angle difference into (-pi, pi].
fn wrap_angle(a: Real) -> Real {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = (a + std::f64::consts::PI).rem_euclid(two_pi);
    w - std::f64::consts::PI
}

pub fn run_with(scenario: &Scenario, opts: RunOptions) -> Result<RunOutput, SimError> {
    scenario.validate()?;
    let variant = opts.variant.unwrap_or(VariantSpec::Feel);
    let seed = opts.seed_override.unwrap_or(scenario.seed);

    let truth = gen_trajectory(&scenario.track, &scenario.speed, scenario.duration_s)
        .map_err(SimError::Config)?;
    let n_ticks = truth.ticks.len() - 1;

    let mut sensors = SensorSim::new(seed, scenario.noise);
    let asa_cfg = &scenario.asa.config;

    let (mut sampling, adaptive) = match opts.rate_override {
        Some((f_u, f_r)) => {
            scenario.power.sensing_power(f_u, f_r)?; // bounds check up front
            (
                SamplingState {
                    f_uwb: f_u,
                    f_radar: f_r,
                    last_adapt_t: 0.0,
                },
                false,
            )
        }
        None => (SamplingState::at_max(asa_cfg), scenario.asa.enabled),
    };
    let period_ticks = (asa_cfg.period / TICK_S).round().max(1.0) as usize;

    let mut uwb_sched = EmissionSchedule::new(sampling.f_uwb);
    let mut radar_sched = EmissionSchedule::new(sampling.f_radar);

    let model = PredictModel::new(TICK_S, scenario.noise.imu);
    let meas_noise = MeasurementNoise {
        uwb: scenario.noise.uwb,
        radar: scenario.noise.radar,
    };
    let start = (truth.ticks[0].x, truth.ticks[0].y);
    let mut filter = FeelFilter::new(
        model,
        scenario.weights,
        meas_noise,
        scenario.initial_estimate(start),
    );

    // Noisy IMU orientation history drives the adaptation trigger.
    let mut theta_history: Vec<Real> = Vec::with_capacity(n_ticks + 1);
    theta_history.push(sensors.sample_imu(&truth.ticks[0], 0.0).theta);
    let mut latest_radar_distance: Option<Real> = None;

    let mut rows = Vec::with_capacity(n_ticks);
    let mut sensor_log = opts.capture_sensor_log.then(Vec::new);

    for k in 1..=n_ticks {
        let t = k as Real * TICK_S;
        let tick_truth = &truth.ticks[k];

        let imu = sensors.sample_imu(tick_truth, t);
        theta_history.push(imu.theta);
        if let Some(log) = sensor_log.as_mut() {
            log.push(LogRecord::Imu {
                t,
                ax: imu.ax,
                ay: imu.ay,
                theta: imu.theta,
                truth: Some((tick_truth.x, tick_truth.y)),
            });
        }

        let started = Instant::now();
        let estimate = filter
            .step(&imu)
            .map_err(|source| SimError::Numerical { tick: k, t_s: t, source })?;
        let step_time_s = started.elapsed().as_secs_f64();

        // Emissions at this tick become visible to the filter on the next one.
        if uwb_sched.due(t) {
            let m = sensors.sample_uwb(tick_truth, t);
            if let Some(log) = sensor_log.as_mut() {
                log.push(LogRecord::Uwb {
                    t,
                    x: m.x,
                    y: m.y,
                    vx: m.vx,
                    vy: m.vy,
                });
            }
            if variant.uses_uwb() {
                filter.stage_uwb(m);
            }
        }
        if radar_sched.due(t) {
            let m = sensors.sample_radar(tick_truth, &scenario.environment, t);
            latest_radar_distance = m.distance;
            if let Some(log) = sensor_log.as_mut() {
                log.push(LogRecord::Radar {
                    t,
                    x: m.x,
                    y: m.y,
                    vx: m.vx,
                    vy: m.vy,
                    distance: m.distance,
                });
            }
            if variant.uses_radar() {
                filter.stage_radar(m);
            }
        }

        if adaptive && k % period_ticks == 0 {
            let prev_theta = theta_history[k - period_ticks];
            let delta_theta = wrap_angle(theta_history[k] - prev_theta).abs();
            sampling = asa_step(&sampling, asa_cfg, delta_theta, latest_radar_distance, t);
            uwb_sched.set_rate(sampling.f_uwb, t);
            radar_sched.set_rate(sampling.f_radar, t);
        }

        let power_w = scenario
            .power
            .sensing_power(sampling.f_uwb, sampling.f_radar)?;

        rows.push(TraceRow {
            t,
            truth_x: tick_truth.x,
            truth_y: tick_truth.y,
            truth_vx: tick_truth.vx,
            truth_vy: tick_truth.vy,
            est_x: estimate.x(),
            est_y: estimate.y(),
            est_vx: estimate.vx(),
            est_vy: estimate.vy(),
            p_xx: estimate.covariance.0[0][0],
            p_yy: estimate.covariance.0[1][1],
            p_vxvx: estimate.covariance.0[2][2],
            p_vyvy: estimate.covariance.0[3][3],
            f_uwb: sampling.f_uwb,
            f_radar: sampling.f_radar,
            power_w,
            step_time_s,
        });
    }

    Ok(RunOutput {
        trace: SimulationTrace {
            dt_s: TICK_S,
            seed,
            variant,
            rows,
        },
        sensor_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn base_scenario() -> Scenario {
        Scenario {
            seed: 1,
            duration_s: 7.0,
            track: TrackProfile::Straight { length_m: 4.0 },
            speed: SpeedProfile::from_kmph(4.0),
            environment: Environment::preset(
                EnvironmentId::E1,
                &TrackProfile::Straight { length_m: 4.0 },
            ),
            noise: NoiseConfig::default(),
            weights: FusionWeights {
                alpha_x: 0.7,
                alpha_y: 0.7,
                beta_x: 0.4,
                beta_y: 0.4,
            },
            asa: AsaSettings::default(),
            power: PowerModel::default(),
        }
    }

    #[test]
    fn trace_has_one_row_per_tick() {
        let trace = run_scenario(&base_scenario()).unwrap();
        assert_eq!(trace.rows.len(), 7000);
        assert!((trace.rows[0].t - 1e-3).abs() < 1e-12);
        assert!((trace.rows.last().unwrap().t - 7.0).abs() < 1e-9);
        for (k, w) in trace.rows.windows(2).enumerate() {
            assert!(w[1].t > w[0].t);
            assert!(
                (w[1].t - w[0].t - TICK_S).abs() < 1e-9,
                "uneven spacing at row {k}"
            );
        }
    }

    // Variants share the sensor streams: gating what reaches the filter must
    // not change what the sensors produced.
    #[test]
    fn variants_see_identical_sensor_streams() {
        let s = base_scenario();
        let capture = |variant| {
            run_with(
                &s,
                RunOptions {
                    variant: Some(variant),
                    capture_sensor_log: true,
                    ..Default::default()
                },
            )
            .unwrap()
            .sensor_log
            .unwrap()
        };
        let feel_log = capture(VariantSpec::Feel);
        let imu_only_log = capture(VariantSpec::ImuOnly);
        assert_eq!(feel_log, imu_only_log);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let s = base_scenario();
        let a = run_scenario(&s).unwrap();
        let b = run_scenario(&s).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.est_x.to_bits(), rb.est_x.to_bits());
            assert_eq!(ra.est_y.to_bits(), rb.est_y.to_bits());
            assert_eq!(ra.power_w.to_bits(), rb.power_w.to_bits());
        }
    }

    #[test]
    fn race_in_e3_is_rejected() {
        let mut s = base_scenario();
        s.track = TrackProfile::Race {
            perimeter_m: 14.0,
            turn_radius_m: 0.7,
        };
        s.duration_s = 20.0;
        s.environment = Environment::preset(EnvironmentId::E3, &s.track);
        let err = run_scenario(&s).unwrap_err();
        assert!(matches!(err, SimError::Config(msg) if msg.contains("E3")));
    }

    #[test]
    fn fixed_max_run_keeps_max_frequencies() {
        let trace = run_scenario(&base_scenario()).unwrap();
        for row in &trace.rows {
            assert_eq!((row.f_uwb, row.f_radar), (10.0, 130.0));
            assert!((row.power_w - 2.60289).abs() < 1e-12);
        }
    }

    #[test]
    fn asa_decays_on_a_quiet_straight() {
        let mut s = base_scenario();
        s.environment = Environment::preset(EnvironmentId::E3, &s.track);
        s.asa.enabled = true;
        let trace = run_scenario(&s).unwrap();
        let at = |t_s: Real| {
            let row = &trace.rows[(t_s / TICK_S) as usize]; // row k-1 is tick k
            (row.f_uwb, row.f_radar)
        };
        assert_eq!(at(0.5), (10.0, 130.0));
        assert_eq!(at(1.5), (7.0, 16.0));
        assert_eq!(at(2.5), (6.0, 8.0));
        assert_eq!(at(3.5), (5.0, 4.0));
        assert_eq!(at(6.5), (5.0, 4.0));
    }

    #[test]
    fn sensor_counts_match_frequencies() {
        let s = base_scenario();
        let out = run_with(
            &s,
            RunOptions {
                capture_sensor_log: true,
                ..Default::default()
            },
        )
        .unwrap();
        let log = out.sensor_log.unwrap();
        let uwb = log.iter().filter(|r| matches!(r, LogRecord::Uwb { .. })).count();
        let radar = log
            .iter()
            .filter(|r| matches!(r, LogRecord::Radar { .. }))
            .count();
        let imu = log.iter().filter(|r| matches!(r, LogRecord::Imu { .. })).count();
        assert_eq!(imu, 7000);
        assert!((uwb as f64 - 70.0).abs() <= 1.0, "uwb count {uwb}");
        assert!((radar as f64 - 910.0).abs() <= 1.0, "radar count {radar}");
    }

    // Emission counts stay correct after decay: holding at the floor must
    // not reschedule the sensors on every adaptation.
    #[test]
    fn emission_counts_hold_at_the_floor_rate() {
        let mut s = base_scenario();
        s.environment = Environment::preset(EnvironmentId::E3, &s.track);
        s.asa.enabled = true;
        let out = run_with(
            &s,
            RunOptions {
                capture_sensor_log: true,
                ..Default::default()
            },
        )
        .unwrap();
        let log = out.sensor_log.unwrap();
        // Frequencies sit at (5, 4) from t = 3 s on; count over [4, 7].
        let in_window = |t: &Real| (4.0..7.0).contains(t);
        let uwb = log
            .iter()
            .filter(|r| matches!(r, LogRecord::Uwb { t, .. } if in_window(t)))
            .count();
        let radar = log
            .iter()
            .filter(|r| matches!(r, LogRecord::Radar { t, .. } if in_window(t)))
            .count();
        assert!((uwb as f64 - 15.0).abs() <= 1.0, "uwb count {uwb}");
        assert!((radar as f64 - 12.0).abs() <= 1.0, "radar count {radar}");
    }

    #[test]
    fn imu_only_never_updates() {
        let s = base_scenario();
        let out = run_with(
            &s,
            RunOptions {
                variant: Some(VariantSpec::ImuOnly),
                ..Default::default()
            },
        )
        .unwrap();
        // Covariance grows without measurements: monotone trace of p_xx.
        let rows = &out.trace.rows;
        for w in rows.windows(2) {
            assert!(w[1].p_xx >= w[0].p_xx);
        }
    }

    #[test]
    fn rate_override_pins_frequencies() {
        let s = base_scenario();
        let out = run_with(
            &s,
            RunOptions {
                rate_override: Some((7.0, 16.0)),
                ..Default::default()
            },
        )
        .unwrap();
        for row in &out.trace.rows {
            assert_eq!((row.f_uwb, row.f_radar), (7.0, 16.0));
        }
    }

    // Synchronization rule over 1000 ticks at fixed 10/130 Hz: exactly 10
    // ticks consume a UWB sample and at most 130 consume a radar sample.
    #[test]
    fn sync_rule_consumption_counts() {
        use crate::sensors::{EmissionSchedule, SensorSim};

        let s = base_scenario();
        let truth = gen_trajectory(&s.track, &s.speed, s.duration_s).unwrap();
        let mut sensors = SensorSim::new(s.seed, s.noise);
        let mut filter = FeelFilter::new(
            PredictModel::new(TICK_S, s.noise.imu),
            s.weights,
            MeasurementNoise {
                uwb: s.noise.uwb,
                radar: s.noise.radar,
            },
            s.initial_estimate((truth.ticks[0].x, truth.ticks[0].y)),
        );
        let mut uwb_sched = EmissionSchedule::new(10.0);
        let mut radar_sched = EmissionSchedule::new(130.0);
        let mut uwb_ticks = 0;
        let mut radar_ticks = 0;
        for k in 1..=1000usize {
            let t = k as Real * TICK_S;
            if filter.pending_uwb().is_some() {
                uwb_ticks += 1;
            }
            if filter.pending_radar().is_some() {
                radar_ticks += 1;
            }
            let imu = sensors.sample_imu(&truth.ticks[k], t);
            filter.step(&imu).unwrap();
            if uwb_sched.due(t) {
                filter.stage_uwb(sensors.sample_uwb(&truth.ticks[k], t));
            }
            if radar_sched.due(t) {
                filter.stage_radar(sensors.sample_radar(&truth.ticks[k], &s.environment, t));
            }
        }
        assert_eq!(uwb_ticks, 10);
        assert!(radar_ticks <= 130, "radar consumed {radar_ticks} ticks");
        assert!(radar_ticks >= 128);
    }

    #[test]
    fn adaptations_land_on_period_boundaries() {
        let mut s = base_scenario();
        s.track = TrackProfile::Race {
            perimeter_m: 14.0,
            turn_radius_m: 0.7,
        };
        s.environment = Environment::preset(EnvironmentId::E1, &s.track);
        s.speed = SpeedProfile::from_kmph(1.2);
        s.duration_s = 45.0;
        s.asa.enabled = true;
        let trace = run_scenario(&s).unwrap();
        let mut last = (10.0, 130.0);
        let mut last_change_t = 0.0;
        for row in &trace.rows {
            let f = (row.f_uwb, row.f_radar);
            if f != last {
                // Frequencies only change on whole adaptation periods, at
                // least one period apart.
                let phase = row.t % s.asa.config.period;
                assert!(
                    phase.min(s.asa.config.period - phase) < 1e-9,
                    "transition at t={} off the period grid",
                    row.t
                );
                assert!(row.t - last_change_t >= s.asa.config.period - 1e-9);
                last_change_t = row.t;
                last = f;
            }
        }
    }

    #[test]
    fn radar_escalates_before_each_object_passage() {
        let mut s = base_scenario();
        s.track = TrackProfile::Race {
            perimeter_m: 14.0,
            turn_radius_m: 0.7,
        };
        s.environment = Environment::preset(EnvironmentId::E1, &s.track);
        s.speed = SpeedProfile::from_kmph(1.2);
        s.duration_s = 45.0;
        s.asa.enabled = true;
        let trace = run_scenario(&s).unwrap();
        for o in &s.environment.objects {
            let closest = trace
                .rows
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let da = (a.truth_x - o.x).hypot(a.truth_y - o.y);
                    let db = (b.truth_x - o.x).hypot(b.truth_y - o.y);
                    da.partial_cmp(&db).unwrap()
                })
                .map(|(i, _)| i)
                .unwrap();
            let window = &trace.rows[closest.saturating_sub(2000)..=closest];
            assert!(
                window.iter().any(|r| r.f_radar == 130.0),
                "radar never hit max before the object at ({}, {})",
                o.x,
                o.y
            );
        }
    }

    #[test]
    fn out_of_range_override_fails() {
        let s = base_scenario();
        let err = run_with(
            &s,
            RunOptions {
                rate_override: Some((7.0, 200.0)),
                ..Default::default()
            },
        );
        assert!(err.is_err());
    }
}
