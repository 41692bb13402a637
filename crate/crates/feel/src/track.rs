//! Ground-truth trajectory generation.
//!
//! Tracks are laid out so the vehicle starts heading along +y; orientation is
//! measured from the +y axis toward +x, which makes the heading unit vector
//! `(sin theta, cos theta)`. The race track is a stadium oval (two straights
//! joined by semicircular turns) traversed as one full lap, starting and
//! stopping at the same corner.

use serde::{Deserialize, Serialize};

use crate::Real;

/// Simulator tick length: the IMU period (1 kHz).
pub const TICK_S: Real = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrackProfile {
    /// Straight segment between two points.
    Straight { length_m: Real },
    /// Stadium oval of the given perimeter; `turn_radius_m` sets the
    /// semicircular turns at both ends.
    Race {
        perimeter_m: Real,
        turn_radius_m: Real,
    },
}

impl TrackProfile {
    /// Total path length driven in one traversal.
    pub fn path_length(&self) -> Real {
        match self {
            TrackProfile::Straight { length_m } => *length_m,
            TrackProfile::Race { perimeter_m, .. } => *perimeter_m,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            TrackProfile::Straight { length_m } => {
                if *length_m <= 0.0 {
                    return Err("straight track length must be positive".into());
                }
            }
            TrackProfile::Race {
                perimeter_m,
                turn_radius_m,
            } => {
                if *turn_radius_m <= 0.0 {
                    return Err("race track turn radius must be positive".into());
                }
                let arcs = 2.0 * std::f64::consts::PI * turn_radius_m;
                if *perimeter_m <= arcs {
                    return Err(format!(
                        "race track perimeter {perimeter_m} m leaves no room for straights \
                         (turn arcs alone are {arcs:.3} m)"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Pose at arc length `s`: position, unwrapped heading, signed curvature.
    pub fn pose_at(&self, s: Real) -> Pose {
        match *self {
            TrackProfile::Straight { .. } => Pose {
                x: 0.0,
                y: s,
                theta: 0.0,
                curvature: 0.0,
            },
            TrackProfile::Race {
                perimeter_m,
                turn_radius_m: r,
            } => {
                let straight = (perimeter_m - 2.0 * std::f64::consts::PI * r) / 2.0;
                let arc = std::f64::consts::PI * r;
                if s < straight {
                    Pose {
                        x: 0.0,
                        y: s,
                        theta: 0.0,
                        curvature: 0.0,
                    }
                } else if s < straight + arc {
                    let phi = (s - straight) / r;
                    Pose {
                        x: r - r * phi.cos(),
                        y: straight + r * phi.sin(),
                        theta: phi,
                        curvature: 1.0 / r,
                    }
                } else if s < 2.0 * straight + arc {
                    let along = s - straight - arc;
                    Pose {
                        x: 2.0 * r,
                        y: straight - along,
                        theta: std::f64::consts::PI,
                        curvature: 0.0,
                    }
                } else {
                    let phi = (s - 2.0 * straight - arc) / r;
                    Pose {
                        x: r + r * phi.cos(),
                        y: -r * phi.sin(),
                        theta: std::f64::consts::PI + phi,
                        curvature: 1.0 / r,
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Pose {
    pub x: Real,
    pub y: Real,
    pub theta: Real,
    pub curvature: Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub cruise_mps: Real,
    pub accel_limit_mps2: Real,
}

impl SpeedProfile {
    pub fn from_kmph(kmph: Real) -> Self {
        Self {
            cruise_mps: kmph / 3.6,
            accel_limit_mps2: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cruise_mps <= 0.0 {
            return Err("cruise speed must be positive".into());
        }
        if self.accel_limit_mps2 <= 0.0 {
            return Err("acceleration limit must be positive".into());
        }
        Ok(())
    }
}

/// Trapezoidal (or triangular, for short tracks) speed ramp along a path of
/// length `distance`.
#[derive(Clone, Copy, Debug)]
struct SpeedRamp {
    accel: Real,
    peak: Real,
    t_ramp: Real,
    t_cruise: Real,
}

impl SpeedRamp {
    fn new(distance: Real, speed: &SpeedProfile) -> Self {
        let a = speed.accel_limit_mps2;
        let v = speed.cruise_mps;
        let ramp_dist = v * v / a; // both ramps together
        if ramp_dist <= distance {
            SpeedRamp {
                accel: a,
                peak: v,
                t_ramp: v / a,
                t_cruise: (distance - ramp_dist) / v,
            }
        } else {
            let peak = (a * distance).sqrt();
            SpeedRamp {
                accel: a,
                peak,
                t_ramp: peak / a,
                t_cruise: 0.0,
            }
        }
    }

    fn total_time(&self) -> Real {
        2.0 * self.t_ramp + self.t_cruise
    }

    /// (arc length, speed, tangential acceleration) at time `t`.
    fn sample(&self, t: Real) -> (Real, Real, Real) {
        let t1 = self.t_ramp;
        let t2 = self.t_ramp + self.t_cruise;
        let t3 = self.total_time();
        let ramp_s = 0.5 * self.accel * t1 * t1;
        if t < t1 {
            (0.5 * self.accel * t * t, self.accel * t, self.accel)
        } else if t < t2 {
            (ramp_s + self.peak * (t - t1), self.peak, 0.0)
        } else if t < t3 {
            let td = t - t2;
            (
                ramp_s + self.peak * self.t_cruise + self.peak * td - 0.5 * self.accel * td * td,
                self.peak - self.accel * td,
                -self.accel,
            )
        } else {
            (
                2.0 * ramp_s + self.peak * self.t_cruise,
                0.0,
                0.0,
            )
        }
    }
}

/// One tick of ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthTick {
    pub x: Real,
    pub y: Real,
    pub vx: Real,
    pub vy: Real,
    pub ax: Real,
    pub ay: Real,
    /// Unwrapped heading relative to the initial pose (rad).
    pub theta: Real,
}

/// Ground-truth series at the simulator tick rate; `ticks[k]` is the state at
/// `t = k * TICK_S`, including `k = 0`.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub dt_s: Real,
    pub ticks: Vec<TruthTick>,
    /// Time at which the vehicle has come to rest at the end of the path.
    pub traversal_time_s: Real,
}

impl GroundTruth {
    pub fn stationary(x: Real, y: Real, theta: Real, duration_s: Real) -> Self {
        let n = (duration_s / TICK_S).round() as usize;
        let tick = TruthTick {
            x,
            y,
            vx: 0.0,
            vy: 0.0,
            ax: 0.0,
            ay: 0.0,
            theta,
        };
        GroundTruth {
            dt_s: TICK_S,
            ticks: vec![tick; n + 1],
            traversal_time_s: 0.0,
        }
    }

    pub fn path_length(&self) -> Real {
        self.ticks
            .windows(2)
            .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
            .sum()
    }
}

/// Generates the 1 kHz ground-truth series for one traversal of the track,
/// ramping up to cruise speed and back down to rest at the end of the path.
/// The vehicle then holds its final pose until `duration_s`.
pub fn gen_trajectory(
    track: &TrackProfile,
    speed: &SpeedProfile,
    duration_s: Real,
) -> Result<GroundTruth, String> {
    track.validate()?;
    speed.validate()?;
    if duration_s <= 0.0 {
        return Err("duration must be positive".into());
    }
    let distance = track.path_length();
    let ramp = SpeedRamp::new(distance, speed);
    let traversal = ramp.total_time();
    if duration_s < traversal {
        return Err(format!(
            "duration {duration_s:.3} s is shorter than the traversal time {traversal:.3} s"
        ));
    }

    let n = (duration_s / TICK_S).round() as usize;
    let mut ticks = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as Real * TICK_S;
        let (s, v, a_t) = ramp.sample(t);
        let s = s.min(distance);
        let pose = track.pose_at(s);
        let (sin_t, cos_t) = (pose.theta.sin(), pose.theta.cos());
        ticks.push(TruthTick {
            x: pose.x,
            y: pose.y,
            vx: v * sin_t,
            vy: v * cos_t,
            ax: a_t * sin_t + v * v * pose.curvature * cos_t,
            ay: a_t * cos_t - v * v * pose.curvature * sin_t,
            theta: pose.theta,
        });
    }
    Ok(GroundTruth {
        dt_s: TICK_S,
        ticks,
        traversal_time_s: traversal,
    })
}
