//! EKF core: IMU-driven prediction, weighted UWB/radar fusion, identity-H update.
//!
//! The filter runs in lockstep with the IMU (one `step` per IMU sample).
//! UWB and radar samples that arrive between IMU samples are staged and
//! consumed by the next `step`, which performs fuse + update in the same tick.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Mat4, Scalar, Vec4};

#[derive(Debug, Error)]
pub enum FilterError {
    /// Innovation covariance S = P̂ + R could not be inverted.
    #[error("singular innovation covariance (S = P + R not invertible)")]
    SingularInnovation,
    /// A staged measurement is timestamped after the IMU sample consuming it.
    #[error("{sensor} measurement at t={measurement_t} is ahead of IMU sample at t={imu_t}")]
    ClockViolation {
        sensor: &'static str,
        measurement_t: f64,
        imu_t: f64,
    },
}

/// Filter state: mean `[x, y, vx, vy]` and its covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateEstimate<T> {
    pub state: Vec4<T>,
    pub covariance: Mat4<T>,
}

impl<T: Scalar> StateEstimate<T> {
    pub fn new(state: Vec4<T>, covariance: Mat4<T>) -> Self {
        Self {
            state,
            covariance: covariance.symmetrized(),
        }
    }

    pub fn x(&self) -> T {
        self.state[0]
    }
    pub fn y(&self) -> T {
        self.state[1]
    }
    pub fn vx(&self) -> T {
        self.state[2]
    }
    pub fn vy(&self) -> T {
        self.state[3]
    }
}

/// Constant-rate prediction model: F, B and the process noise Q for one IMU period.
#[derive(Clone, Copy, Debug)]
pub struct PredictModel<T> {
    pub dt: T,
    pub transition: Mat4<T>,
    pub control: Mat4<T>,
    pub process_noise: Mat4<T>,
}

impl<T: Scalar> PredictModel<T> {
    /// Builds the model for an IMU period `dt` and a diagonal process noise
    /// `[var_ax, var_ay, var_sin_theta, var_cos_theta]`.
    pub fn new(dt: T, process_variances: [T; 4]) -> Self {
        assert!(dt > T::zero(), "IMU period must be positive");
        assert!(
            process_variances.iter().all(|v| *v >= T::zero()),
            "process variances must be non-negative"
        );
        let mut f = Mat4::identity();
        f.0[0][2] = dt;
        f.0[1][3] = dt;
        let mut b = Mat4::zeros();
        let half_dt2 = T::from_f64(0.5).unwrap() * dt * dt;
        b.0[0][0] = half_dt2;
        b.0[1][1] = half_dt2;
        b.0[2][2] = dt;
        b.0[3][3] = dt;
        Self {
            dt,
            transition: f,
            control: b,
            process_noise: Mat4::from_diag(process_variances),
        }
    }
}

/// One IMU reading: planar acceleration plus orientation relative to the
/// initial pose, wrapped to (-pi, pi].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample<T> {
    pub ax: T,
    pub ay: T,
    pub theta: T,
    pub t: T,
}

/// Control input `u = [ax, ay, a·sin(theta), a·cos(theta)]` with `a = |(ax, ay)|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlInput<T>(pub Vec4<T>);

impl<T: Scalar> ControlInput<T> {
    pub fn from_imu(s: &ImuSample<T>) -> Self {
        let a = s.ax.hypot(s.ay);
        ControlInput(Vec4([s.ax, s.ay, a * s.theta.sin(), a * s.theta.cos()]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UwbMeasurement<T> {
    pub x: T,
    pub y: T,
    pub vx: T,
    pub vy: T,
    pub t: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadarMeasurement<T> {
    pub x: T,
    pub y: T,
    pub vx: T,
    pub vy: T,
    /// Distance to the nearest detected object, `None` when nothing is in range.
    pub distance: Option<T>,
    pub t: T,
}

/// UWB weights of the measurement average; radar implicitly carries `1 - w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights<T> {
    pub alpha_x: T,
    pub alpha_y: T,
    pub beta_x: T,
    pub beta_y: T,
}

impl<T: Scalar> FusionWeights<T> {
    pub fn validate(&self) -> Result<(), String> {
        for (name, w) in [
            ("alpha_x", self.alpha_x),
            ("alpha_y", self.alpha_y),
            ("beta_x", self.beta_x),
            ("beta_y", self.beta_y),
        ] {
            if w < T::zero() || w > T::one() {
                return Err(format!("fusion weight {name}={w} outside [0, 1]"));
            }
        }
        Ok(())
    }

    fn as_array(&self) -> [T; 4] {
        [self.alpha_x, self.alpha_y, self.beta_x, self.beta_y]
    }
}

/// Per-sensor measurement variances, ordered `[x, y, vx, vy]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementNoise<T> {
    pub uwb: [T; 4],
    pub radar: [T; 4],
}

impl<T: Scalar> MeasurementNoise<T> {
    pub fn validate(&self) -> Result<(), String> {
        if self.uwb.iter().chain(self.radar.iter()).any(|v| *v < T::zero()) {
            return Err("measurement variances must be non-negative".into());
        }
        Ok(())
    }
}

/// Effective measurement `z` and its diagonal covariance `R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementBundle<T> {
    pub z: Vec4<T>,
    pub r: Mat4<T>,
}

/// Innovation, innovation covariance, and gain of one update, kept for inspection.
#[derive(Clone, Copy, Debug)]
pub struct KalmanIntermediates<T> {
    pub innovation: Vec4<T>,
    pub innovation_cov: Mat4<T>,
    pub gain: Mat4<T>,
}

/// Prediction step: `x̂ = F·x + B·u`, `P̂ = F·P·Fᵀ + Q`.
pub fn predict<T: Scalar>(
    est: &StateEstimate<T>,
    model: &PredictModel<T>,
    u: &ControlInput<T>,
) -> StateEstimate<T> {
    let f = model.transition;
    let state = f.mul_vec(&est.state) + model.control.mul_vec(&u.0);
    let covariance = (f * est.covariance * f.transpose() + model.process_noise).symmetrized();
    StateEstimate { state, covariance }
}

/// Weighted averaging of whatever sensors are present.
///
/// With both sensors the effective variance follows the same convex weights as
/// the values themselves (not squared weights); with one sensor the weights
/// collapse to 1 for it. Returns `None` when neither sensor has a sample.
pub fn fuse_measurements<T: Scalar>(
    uwb: Option<&UwbMeasurement<T>>,
    radar: Option<&RadarMeasurement<T>>,
    weights: &FusionWeights<T>,
    noise: &MeasurementNoise<T>,
) -> Option<MeasurementBundle<T>> {
    match (uwb, radar) {
        (Some(u), Some(r)) => {
            let uv = [u.x, u.y, u.vx, u.vy];
            let rv = [r.x, r.y, r.vx, r.vy];
            let w = weights.as_array();
            let mut z = Vec4::zeros();
            let mut var = [T::zero(); 4];
            for i in 0..4 {
                let cw = T::one() - w[i];
                z[i] = uv[i] * w[i] + rv[i] * cw;
                var[i] = w[i] * noise.uwb[i] + cw * noise.radar[i];
            }
            Some(MeasurementBundle {
                z,
                r: Mat4::from_diag(var),
            })
        }
        (Some(u), None) => Some(MeasurementBundle {
            z: Vec4([u.x, u.y, u.vx, u.vy]),
            r: Mat4::from_diag(noise.uwb),
        }),
        (None, Some(r)) => Some(MeasurementBundle {
            z: Vec4([r.x, r.y, r.vx, r.vy]),
            r: Mat4::from_diag(noise.radar),
        }),
        (None, None) => None,
    }
}

/// Update step: `Y = z - x̂`, `S = P̂ + R`, `K = P̂·S⁻¹`, `x = x̂ + K·Y`,
/// `P = (I - K)·P̂`.
pub fn update<T: Scalar>(
    pred: &StateEstimate<T>,
    m: &MeasurementBundle<T>,
) -> Result<(StateEstimate<T>, KalmanIntermediates<T>), FilterError> {
    let innovation = m.z - pred.state;
    let innovation_cov = pred.covariance + m.r;
    let s_inv = innovation_cov
        .inverse()
        .ok_or(FilterError::SingularInnovation)?;
    let gain = pred.covariance * s_inv;
    let state = pred.state + gain.mul_vec(&innovation);
    let covariance = ((Mat4::identity() - gain) * pred.covariance).symmetrized();
    Ok((
        StateEstimate { state, covariance },
        KalmanIntermediates {
            innovation,
            innovation_cov,
            gain,
        },
    ))
}

/// Stateful filter driven by the IMU stream; owns the staging of pending
/// UWB/radar samples (latest sample per sensor wins).
#[derive(Clone, Debug)]
pub struct FeelFilter<T> {
    pub model: PredictModel<T>,
    pub weights: FusionWeights<T>,
    pub noise: MeasurementNoise<T>,
    estimate: StateEstimate<T>,
    pending_uwb: Option<UwbMeasurement<T>>,
    pending_radar: Option<RadarMeasurement<T>>,
}

impl<T: Scalar> FeelFilter<T> {
    pub fn new(
        model: PredictModel<T>,
        weights: FusionWeights<T>,
        noise: MeasurementNoise<T>,
        initial: StateEstimate<T>,
    ) -> Self {
        Self {
            model,
            weights,
            noise,
            estimate: initial,
            pending_uwb: None,
            pending_radar: None,
        }
    }

    pub fn estimate(&self) -> &StateEstimate<T> {
        &self.estimate
    }

    pub fn has_pending(&self) -> bool {
        self.pending_uwb.is_some() || self.pending_radar.is_some()
    }

    pub fn pending_uwb(&self) -> Option<&UwbMeasurement<T>> {
        self.pending_uwb.as_ref()
    }

    pub fn pending_radar(&self) -> Option<&RadarMeasurement<T>> {
        self.pending_radar.as_ref()
    }

    pub fn stage_uwb(&mut self, m: UwbMeasurement<T>) {
        self.pending_uwb = Some(m);
    }

    pub fn stage_radar(&mut self, m: RadarMeasurement<T>) {
        self.pending_radar = Some(m);
    }

    /// Advances the filter by one IMU tick: predict, then fuse + update if any
    /// measurement is pending. Returns the posterior estimate for this tick.
    pub fn step(&mut self, imu: &ImuSample<T>) -> Result<StateEstimate<T>, FilterError> {
        if let Some(u) = &self.pending_uwb {
            if u.t > imu.t {
                return Err(FilterError::ClockViolation {
                    sensor: "uwb",
                    measurement_t: u.t.to_f64().unwrap_or(f64::NAN),
                    imu_t: imu.t.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if let Some(r) = &self.pending_radar {
            if r.t > imu.t {
                return Err(FilterError::ClockViolation {
                    sensor: "radar",
                    measurement_t: r.t.to_f64().unwrap_or(f64::NAN),
                    imu_t: imu.t.to_f64().unwrap_or(f64::NAN),
                });
            }
        }

        let u = ControlInput::from_imu(imu);
        let predicted = predict(&self.estimate, &self.model, &u);

        let bundle = fuse_measurements(
            self.pending_uwb.as_ref(),
            self.pending_radar.as_ref(),
            &self.weights,
            &self.noise,
        );
        self.estimate = match bundle {
            Some(b) => {
                let (posterior, _) = update(&predicted, &b)?;
                posterior
            }
            None => predicted,
        };
        self.pending_uwb = None;
        self.pending_radar = None;
        Ok(self.estimate)
    }
}
