//! Noisy sensor synthesis and sample scheduling.
//!
//! Each sensor draws from its own counter-based RNG stream, so the noise a
//! sensor sees depends only on the scenario seed and on how many samples that
//! sensor has produced — not on what the other sensors or the fusion variant
//! are doing. That keeps paired comparisons paired.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::filter::{ImuSample, RadarMeasurement, UwbMeasurement};
use crate::track::TruthTick;
use crate::Real;

/// Per-channel noise variances for all three sensors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// IMU process-noise channels `[ax, ay, sin(theta), cos(theta)]`.
    pub imu: [Real; 4],
    /// UWB measurement variances `[x, y, vx, vy]`.
    pub uwb: [Real; 4],
    /// Radar measurement variances `[x, y, vx, vy]`.
    pub radar: [Real; 4],
    /// Optional linear reduction of the injected radar variance with speed:
    /// the variance is scaled by `1 - factor * |v|`, floored at 0.05. Models
    /// radar hardware whose accuracy improves when moving; off by default.
    /// The filter's assumed variances are unaffected.
    pub radar_speed_factor: Option<Real>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        // Calibrated IMU channel variances, and the combined measurement
        // variances split equally between UWB and radar so the weighted
        // composition reproduces them for any weight choice.
        Self {
            imu: [2.31e-3, 0.60e-3, 0.32e-3, 0.65e-3],
            uwb: [0.14, 0.06, 0.13, 0.11],
            radar: [0.14, 0.06, 0.13, 0.11],
            radar_speed_factor: None,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self
            .imu
            .iter()
            .chain(self.uwb.iter())
            .chain(self.radar.iter())
            .any(|v| *v < 0.0 || !v.is_finite())
        {
            return Err("noise variances must be finite and non-negative".into());
        }
        if let Some(f) = self.radar_speed_factor {
            if f < 0.0 || !f.is_finite() {
                return Err("radar_speed_factor must be finite and non-negative".into());
            }
        }
        Ok(())
    }
}

const IMU_STREAM: u64 = 1;
const UWB_STREAM: u64 = 2;
const RADAR_STREAM: u64 = 3;

/// Draws noisy sensor readings from per-sensor RNG streams.
pub struct SensorSim {
    noise: NoiseConfig,
    imu_rng: ChaCha8Rng,
    uwb_rng: ChaCha8Rng,
    radar_rng: ChaCha8Rng,
}

impl SensorSim {
    pub fn new(seed: u64, noise: NoiseConfig) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            noise,
            imu_rng: stream(IMU_STREAM),
            uwb_rng: stream(UWB_STREAM),
            radar_rng: stream(RADAR_STREAM),
        }
    }

    /// IMU reading: noisy planar acceleration plus an orientation whose
    /// sin/cos channels carry independent noise. The reported angle is the
    /// atan2 of the perturbed pair, wrapped to (-pi, pi].
    pub fn sample_imu(&mut self, truth: &TruthTick, t: Real) -> ImuSample<Real> {
        let n: [Real; 4] = std::array::from_fn(|_| self.imu_rng.sample(StandardNormal));
        let ax = truth.ax + self.noise.imu[0].sqrt() * n[0];
        let ay = truth.ay + self.noise.imu[1].sqrt() * n[1];
        let sin_t = truth.theta.sin() + self.noise.imu[2].sqrt() * n[2];
        let cos_t = truth.theta.cos() + self.noise.imu[3].sqrt() * n[3];
        ImuSample {
            ax,
            ay,
            theta: sin_t.atan2(cos_t),
            t,
        }
    }

    pub fn sample_uwb(&mut self, truth: &TruthTick, t: Real) -> UwbMeasurement<Real> {
        let n: [Real; 4] = std::array::from_fn(|_| self.uwb_rng.sample(StandardNormal));
        UwbMeasurement {
            x: truth.x + self.noise.uwb[0].sqrt() * n[0],
            y: truth.y + self.noise.uwb[1].sqrt() * n[1],
            vx: truth.vx + self.noise.uwb[2].sqrt() * n[2],
            vy: truth.vy + self.noise.uwb[3].sqrt() * n[3],
            t,
        }
    }

    pub fn sample_radar(
        &mut self,
        truth: &TruthTick,
        env: &Environment,
        t: Real,
    ) -> RadarMeasurement<Real> {
        let n: [Real; 4] = std::array::from_fn(|_| self.radar_rng.sample(StandardNormal));
        let scale = match self.noise.radar_speed_factor {
            Some(f) => (1.0 - f * truth.vx.hypot(truth.vy)).max(0.05),
            None => 1.0,
        };
        RadarMeasurement {
            x: truth.x + (scale * self.noise.radar[0]).sqrt() * n[0],
            y: truth.y + (scale * self.noise.radar[1]).sqrt() * n[1],
            vx: truth.vx + (scale * self.noise.radar[2]).sqrt() * n[2],
            vy: truth.vy + (scale * self.noise.radar[3]).sqrt() * n[3],
            distance: env.nearest_object_distance(truth.x, truth.y),
            t,
        }
    }
}

/// Emission scheduler: a sensor emits at the first tick at or after each due
/// time, and due times advance by the exact sampling period, so the emission
/// count over a window tracks `f * window` within one sample.
#[derive(Clone, Copy, Debug)]
pub struct EmissionSchedule {
    f_hz: Real,
    next_due_s: Real,
}

impl EmissionSchedule {
    pub fn new(f_hz: Real) -> Self {
        Self {
            f_hz,
            next_due_s: 0.0,
        }
    }

    pub fn rate(&self) -> Real {
        self.f_hz
    }

    /// True when a sample is due at time `t`; advances the schedule.
    pub fn due(&mut self, t: Real) -> bool {
        if t >= self.next_due_s {
            self.next_due_s += 1.0 / self.f_hz;
            // After long gaps (rate changes) never emit twice in one tick.
            if self.next_due_s <= t {
                self.next_due_s = t + 1.0 / self.f_hz;
            }
            true
        } else {
            false
        }
    }

    /// Applies a new rate; the next sample is due one new period from now.
    pub fn set_rate(&mut self, f_hz: Real, now: Real) {
        if f_hz != self.f_hz {
            self.f_hz = f_hz;
            self.next_due_s = now + 1.0 / f_hz;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::GroundTruth;

    #[test]
    fn zero_noise_is_exact_passthrough() {
        let noise = NoiseConfig {
            imu: [0.0; 4],
            uwb: [0.0; 4],
            radar: [0.0; 4],
            radar_speed_factor: None,
        };
        let truth = GroundTruth::stationary(1.0, 2.0, 0.25, 0.01);
        let env = Environment {
            id: crate::env::EnvironmentId::E1,
            objects: vec![],
            corridor_halfwidth_m: None,
        };
        let mut sim = SensorSim::new(7, noise);
        let imu = sim.sample_imu(&truth.ticks[0], 0.0);
        assert_eq!((imu.ax, imu.ay), (0.0, 0.0));
        assert!((imu.theta - 0.25).abs() < 1e-15);
        let uwb = sim.sample_uwb(&truth.ticks[0], 0.0);
        assert_eq!((uwb.x, uwb.y, uwb.vx, uwb.vy), (1.0, 2.0, 0.0, 0.0));
        let radar = sim.sample_radar(&truth.ticks[0], &env, 0.0);
        assert_eq!((radar.x, radar.y), (1.0, 2.0));
        assert_eq!(radar.distance, None);
    }

    #[test]
    fn fixed_seed_reproduces_samples() {
        let truth = GroundTruth::stationary(0.0, 0.0, 0.0, 0.01);
        let mut a = SensorSim::new(42, NoiseConfig::default());
        let mut b = SensorSim::new(42, NoiseConfig::default());
        for _ in 0..100 {
            assert_eq!(
                a.sample_imu(&truth.ticks[0], 0.0),
                b.sample_imu(&truth.ticks[0], 0.0)
            );
            assert_eq!(
                a.sample_uwb(&truth.ticks[0], 0.0),
                b.sample_uwb(&truth.ticks[0], 0.0)
            );
        }
    }

    #[test]
    fn sensor_streams_are_independent_of_each_other() {
        let truth = GroundTruth::stationary(0.0, 0.0, 0.0, 0.01);
        let mut a = SensorSim::new(42, NoiseConfig::default());
        let mut b = SensorSim::new(42, NoiseConfig::default());
        // Interleave extra IMU draws in `a` only; UWB draws must not shift.
        for _ in 0..10 {
            a.sample_imu(&truth.ticks[0], 0.0);
        }
        assert_eq!(
            a.sample_uwb(&truth.ticks[0], 0.0),
            b.sample_uwb(&truth.ticks[0], 0.0)
        );
    }

    #[test]
    fn imu_noise_variance_converges() {
        let truth = GroundTruth::stationary(0.0, 0.0, 0.0, 0.01);
        let mut sim = SensorSim::new(1, NoiseConfig::default());
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let s = sim.sample_imu(&truth.ticks[0], 0.0);
            sum += s.ax;
            sum_sq += s.ax * s.ax;
        }
        let mean = sum / n as Real;
        let var = sum_sq / n as Real - mean * mean;
        assert!(
            (var - 2.31e-3).abs() < 0.05 * 2.31e-3,
            "ax variance {var} off target"
        );
    }

    #[test]
    fn uwb_noise_variance_converges() {
        let truth = GroundTruth::stationary(0.0, 0.0, 0.0, 0.01);
        let mut sim = SensorSim::new(1, NoiseConfig::default());
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let s = sim.sample_uwb(&truth.ticks[0], 0.0);
            sum += s.x;
            sum_sq += s.x * s.x;
        }
        let mean = sum / n as Real;
        let var = sum_sq / n as Real - mean * mean;
        assert!((var - 0.14).abs() < 0.05 * 0.14, "x variance {var} off target");
    }

    #[test]
    fn radar_speed_factor_shrinks_injected_noise() {
        let noise = NoiseConfig {
            radar_speed_factor: Some(0.5),
            ..Default::default()
        };
        let env = Environment {
            id: crate::env::EnvironmentId::E1,
            objects: vec![],
            corridor_halfwidth_m: None,
        };
        let moving = crate::track::TruthTick {
            x: 0.0,
            y: 0.0,
            vx: 1.0,
            vy: 0.0,
            ax: 0.0,
            ay: 0.0,
            theta: 0.0,
        };
        let still = crate::track::TruthTick { vx: 0.0, ..moving };
        let var_of = |truth: &crate::track::TruthTick, n: usize| {
            let mut sim = SensorSim::new(5, noise);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..n {
                let s = sim.sample_radar(truth, &env, 0.0);
                sum += s.x;
                sq += s.x * s.x;
            }
            sq / n as Real - (sum / n as Real).powi(2)
        };
        let v_still = var_of(&still, 50_000);
        let v_moving = var_of(&moving, 50_000);
        assert!((v_still - 0.14).abs() < 0.01);
        assert!((v_moving - 0.07).abs() < 0.01, "moving variance {v_moving}");
    }

    #[test]
    fn schedule_counts_track_frequency() {
        for f in [10.0, 130.0, 7.0, 16.0, 4.0] {
            let mut sched = EmissionSchedule::new(f);
            let mut count = 0;
            for k in 1..=10_000 {
                if sched.due(k as Real * 1e-3) {
                    count += 1;
                }
            }
            let expected = f * 10.0;
            assert!(
                (count as Real - expected).abs() <= 1.0,
                "f={f}: {count} emissions vs {expected}"
            );
        }
    }

    #[test]
    fn schedule_rate_change_reschedules_one_period_out() {
        let mut sched = EmissionSchedule::new(10.0);
        assert!(sched.due(0.001));
        sched.set_rate(4.0, 0.001);
        let mut first = None;
        for k in 2..=1000 {
            let t = k as Real * 1e-3;
            if sched.due(t) {
                first = Some(t);
                break;
            }
        }
        assert_eq!(first, Some(0.251));
    }
}
