//! Adaptive sensing: event-driven adaptation of the UWB and radar sampling
//! frequencies.
//!
//! Every adaptation period each sensor moves one step through its frequency
//! ladder. A significant orientation change escalates in two stages (to the
//! threshold frequency, then to the maximum); otherwise frequencies decay —
//! linearly for UWB, multiplicatively for radar. A nearby object detected by
//! radar overrides whatever the orientation branch decided and pins the radar
//! at its maximum.

use serde::{Deserialize, Serialize};

use crate::math::Scalar;

/// Frequency ladder of one sensor: hard bounds, the threshold frequency, and
/// the decay map `f -> slope·f + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorBand<T> {
    pub f_min: T,
    pub f_max: T,
    pub gamma: T,
    pub decay_slope: T,
    pub decay_offset: T,
}

impl<T: Scalar> SensorBand<T> {
    pub fn validate(&self, name: &str) -> Result<(), String> {
        let positive = self.f_min > T::zero();
        if !positive {
            return Err(format!("{name}: f_min must be positive"));
        }
        let ordered = self.f_min < self.gamma && self.gamma < self.f_max;
        if !ordered {
            return Err(format!(
                "{name}: need f_min < gamma < f_max, got {} / {} / {}",
                self.f_min, self.gamma, self.f_max
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsaConfig<T> {
    /// Orientation-change threshold (rad) over one adaptation period.
    pub theta_threshold: T,
    /// Proximity threshold (m) below which the radar is forced to maximum.
    pub distance_threshold: T,
    /// Adaptation period (s).
    pub period: T,
    pub uwb: SensorBand<T>,
    pub radar: SensorBand<T>,
}

impl<T: Scalar> Default for AsaConfig<T> {
    fn default() -> Self {
        let c = |v: f64| T::from_f64(v).unwrap();
        Self {
            theta_threshold: c(10.0_f64.to_radians()),
            distance_threshold: c(1.0),
            period: c(1.0),
            uwb: SensorBand {
                f_min: c(5.0),
                f_max: c(10.0),
                gamma: c(7.0),
                decay_slope: c(1.0),
                decay_offset: c(-1.0),
            },
            radar: SensorBand {
                f_min: c(4.0),
                f_max: c(130.0),
                gamma: c(16.0),
                decay_slope: c(0.5),
                decay_offset: c(0.0),
            },
        }
    }
}

impl<T: Scalar> AsaConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        let period_ok = self.period > T::zero();
        if !period_ok {
            return Err("adaptation period must be positive".into());
        }
        if self.theta_threshold < T::zero() {
            return Err("orientation threshold must be non-negative".into());
        }
        let distance_ok = self.distance_threshold > T::zero();
        if !distance_ok {
            return Err("distance threshold must be positive".into());
        }
        self.uwb.validate("uwb")?;
        self.radar.validate("radar")
    }
}

/// Current sampling frequencies and the time of the last adaptation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingState<T> {
    pub f_uwb: T,
    pub f_radar: T,
    pub last_adapt_t: T,
}

impl<T: Scalar> SamplingState<T> {
    /// Both sensors at maximum frequency, the scheduler's initial state.
    pub fn at_max(cfg: &AsaConfig<T>) -> Self {
        Self {
            f_uwb: cfg.uwb.f_max,
            f_radar: cfg.radar.f_max,
            last_adapt_t: T::zero(),
        }
    }
}

fn adapt_band<T: Scalar>(f: T, band: &SensorBand<T>, orientation_change: bool) -> T {
    if orientation_change {
        if f < band.gamma {
            band.gamma
        } else {
            band.f_max
        }
    } else if f > band.f_min && f <= band.gamma {
        (band.decay_slope * f + band.decay_offset).max(band.f_min)
    } else if f >= band.f_max {
        band.gamma
    } else {
        // f strictly between gamma and f_max is unreachable under the
        // transition rules; hold for exotic hand-written configs.
        debug_assert!(
            f <= band.f_min,
            "frequency {f} in the dead zone ({}, {})",
            band.gamma,
            band.f_max
        );
        f
    }
}

/// One adaptation step. The caller is responsible for invoking it only once
/// per period; `now` is stamped into the returned state.
pub fn asa_step<T: Scalar>(
    state: &SamplingState<T>,
    cfg: &AsaConfig<T>,
    delta_theta: T,
    distance: Option<T>,
    now: T,
) -> SamplingState<T> {
    let orientation_change = delta_theta >= cfg.theta_threshold;
    let f_uwb = adapt_band(state.f_uwb, &cfg.uwb, orientation_change);
    let mut f_radar = adapt_band(state.f_radar, &cfg.radar, orientation_change);
    if let Some(d) = distance {
        if d < cfg.distance_threshold {
            f_radar = cfg.radar.f_max;
        }
    }
    SamplingState {
        f_uwb,
        f_radar,
        last_adapt_t: now,
    }
}
