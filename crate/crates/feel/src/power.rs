//! Sensing power model and energy accounting.
//!
//! UWB power is affine in its sampling frequency, radar power is affine in
//! log2 of its frequency, and the IMU draws a constant amount. Each curve is
//! pinned by two anchor points; the default low anchors are calibrated so
//! that running at the threshold frequencies (7 Hz, 16 Hz) consumes 82% of
//! the power at maximum frequencies (10 Hz, 130 Hz).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Scalar;

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("{sensor} frequency {f} Hz outside supported range [{lo}, {hi}] Hz")]
    FrequencyOutOfRange {
        sensor: &'static str,
        f: f64,
        lo: f64,
        hi: f64,
    },
    #[error("empty trace has no energy to report")]
    EmptyTrace,
}

/// Two anchor points of one sensor's power curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAnchors<T> {
    pub f_lo: T,
    pub p_lo: T,
    pub f_hi: T,
    pub p_hi: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerModel<T> {
    /// Constant IMU draw (W).
    pub imu_w: T,
    /// Non-sensing system draw (W); zero keeps the accounting sensing-only.
    pub base_w: T,
    /// UWB anchors; power interpolates linearly in f.
    pub uwb: PowerAnchors<T>,
    /// Radar anchors; power interpolates linearly in log2(f).
    pub radar: PowerAnchors<T>,
    /// Supported frequency ranges (hardware limits, not the adaptive bounds).
    pub uwb_range: [T; 2],
    pub radar_range: [T; 2],
}

impl<T: Scalar> Default for PowerModel<T> {
    fn default() -> Self {
        Self::calibrated(
            T::from_f64(0.18).unwrap(),
            T::from_f64(7.0).unwrap(),
            T::from_f64(16.0).unwrap(),
        )
    }
}

impl<T: Scalar> PowerModel<T> {
    /// Builds the model from the measured maximum-frequency draws (0.67 W UWB
    /// at 10 Hz, 1.92 W radar at 130 Hz, 12.89 mW IMU), choosing the low
    /// anchors at `(f_u_anchor, f_r_anchor)` such that total sensing power
    /// there is `1 - saving` of the maximum. Both sensors keep the same
    /// relative saving.
    pub fn calibrated(saving: T, f_u_anchor: T, f_r_anchor: T) -> Self {
        let c = |v: f64| T::from_f64(v).unwrap();
        let imu_w = c(0.01289);
        let uwb_hi = c(0.67);
        let radar_hi = c(1.92);
        let total_hi = imu_w + uwb_hi + radar_hi;
        let target = (T::one() - saving) * total_hi;
        let scale = (target - imu_w) / (uwb_hi + radar_hi);
        Self {
            imu_w,
            base_w: T::zero(),
            uwb: PowerAnchors {
                f_lo: f_u_anchor,
                p_lo: scale * uwb_hi,
                f_hi: c(10.0),
                p_hi: uwb_hi,
            },
            radar: PowerAnchors {
                f_lo: f_r_anchor,
                p_lo: scale * radar_hi,
                f_hi: c(130.0),
                p_hi: radar_hi,
            },
            uwb_range: [c(1.0), c(10.0)],
            radar_range: [c(1.0), c(130.0)],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, a, range) in [
            ("uwb", &self.uwb, &self.uwb_range),
            ("radar", &self.radar, &self.radar_range),
        ] {
            if !(a.f_lo > T::zero() && a.f_lo < a.f_hi) {
                return Err(format!("{name}: anchor frequencies must satisfy 0 < f_lo < f_hi"));
            }
            if a.p_lo > a.p_hi {
                return Err(format!("{name}: power must be non-decreasing in frequency"));
            }
            if a.p_lo < T::zero() {
                return Err(format!("{name}: power must be non-negative"));
            }
            if !(range[0] > T::zero() && range[0] <= range[1]) {
                return Err(format!("{name}: invalid frequency range"));
            }
        }
        if self.imu_w < T::zero() || self.base_w < T::zero() {
            return Err("imu_w and base_w must be non-negative".into());
        }
        Ok(())
    }

    pub fn uwb_power(&self, f: T) -> T {
        let a = &self.uwb;
        let w = (f - a.f_lo) / (a.f_hi - a.f_lo);
        a.p_lo * (T::one() - w) + a.p_hi * w
    }

    pub fn radar_power(&self, f: T) -> T {
        let a = &self.radar;
        let w = (f.log2() - a.f_lo.log2()) / (a.f_hi.log2() - a.f_lo.log2());
        a.p_lo * (T::one() - w) + a.p_hi * w
    }

    /// Instantaneous draw at the given sampling frequencies:
    /// `base + imu + uwb(f_u) + radar(f_r)`.
    pub fn sensing_power(&self, f_uwb: T, f_radar: T) -> Result<T, PowerError> {
        let check = |sensor: &'static str, f: T, range: &[T; 2]| -> Result<(), PowerError> {
            if f < range[0] || f > range[1] {
                Err(PowerError::FrequencyOutOfRange {
                    sensor,
                    f: f.to_f64().unwrap_or(f64::NAN),
                    lo: range[0].to_f64().unwrap_or(f64::NAN),
                    hi: range[1].to_f64().unwrap_or(f64::NAN),
                })
            } else {
                Ok(())
            }
        };
        check("uwb", f_uwb, &self.uwb_range)?;
        check("radar", f_radar, &self.radar_range)?;
        Ok(self.base_w + self.imu_w + self.uwb_power(f_uwb) + self.radar_power(f_radar))
    }

    /// Draw with both sensors at the top of their supported anchors.
    pub fn max_power(&self) -> T {
        self.base_w + self.imu_w + self.uwb.p_hi + self.radar.p_hi
    }
}

/// Energy accounting of one run against a constant-maximum-frequency baseline
/// of the same duration.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergySummary {
    pub total_energy_j: f64,
    pub mean_power_w: f64,
    pub baseline_energy_j: f64,
    pub saving_pct: f64,
}

/// Integrates the power of a per-tick frequency series sampled every `dt_s`.
pub fn energy_report(
    frequencies: &[(f64, f64)],
    dt_s: f64,
    model: &PowerModel<f64>,
) -> Result<EnergySummary, PowerError> {
    if frequencies.is_empty() {
        return Err(PowerError::EmptyTrace);
    }
    let mut total = 0.0;
    for &(f_u, f_r) in frequencies {
        total += model.sensing_power(f_u, f_r)? * dt_s;
    }
    let duration = frequencies.len() as f64 * dt_s;
    let baseline = model.max_power() * duration;
    // Power is monotone and bounded by the maximum-frequency draw, so the
    // saving is non-negative up to accumulation roundoff.
    let saving_pct = (100.0 * (1.0 - total / baseline)).max(0.0);
    Ok(EnergySummary {
        total_energy_j: total,
        mean_power_w: total / duration,
        baseline_energy_j: baseline,
        saving_pct,
    })
}
