//! Scenario files (TOML) and named presets.
//!
//! Files are human units at the boundary (km/h, degrees); the resolved
//! [`Scenario`] is SI throughout. Unknown keys are rejected, and the seed is
//! mandatory so every run is reproducible by construction.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::asa::AsaConfig;
use crate::env::{Environment, EnvironmentId, Obstacle};
use crate::filter::FusionWeights;
use crate::power::{PowerAnchors, PowerModel};
use crate::scenario::{AsaSettings, Scenario};
use crate::sensors::NoiseConfig;
use crate::track::{SpeedProfile, TrackProfile};
use crate::Real;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Mandatory; there is deliberately no wall-clock fallback.
    pub seed: Option<u64>,
    pub duration_s: f64,
    pub track: TrackSection,
    pub speed: SpeedSection,
    pub environment: EnvSection,
    pub noise: Option<NoiseSection>,
    pub weights: Option<WeightsSection>,
    pub asa: Option<AsaSection>,
    pub power_model: Option<PowerSection>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrackSection {
    Straight { length_m: Option<f64> },
    Race {
        perimeter_m: Option<f64>,
        turn_radius_m: Option<f64>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedSection {
    pub cruise_kmph: f64,
    pub accel_limit_mps2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub id: String,
    /// Overrides the preset object layout when present.
    pub objects: Option<Vec<Obstacle>>,
    pub corridor_halfwidth_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub imu: Option<[f64; 4]>,
    pub uwb: Option<[f64; 4]>,
    pub radar: Option<[f64; 4]>,
    pub radar_speed_factor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub alpha_x: Option<f64>,
    pub alpha_y: Option<f64>,
    pub beta_x: Option<f64>,
    pub beta_y: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsaSection {
    /// "adaptive" or "fixed-max".
    pub mode: Option<String>,
    pub theta_threshold_deg: Option<f64>,
    pub distance_threshold_m: Option<f64>,
    pub period_s: Option<f64>,
    pub uwb: Option<BandSection>,
    pub radar: Option<BandSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
    pub gamma: Option<f64>,
    pub decay_slope: Option<f64>,
    pub decay_offset: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub imu_w: Option<f64>,
    pub base_w: Option<f64>,
    pub uwb: Option<AnchorSection>,
    pub radar: Option<AnchorSection>,
    pub uwb_range: Option<[f64; 2]>,
    pub radar_range: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSection {
    pub f_lo: Option<f64>,
    pub p_lo: Option<f64>,
    pub f_hi: Option<f64>,
    pub p_hi: Option<f64>,
}

impl ScenarioFile {
    pub fn resolve(self) -> Result<Scenario, ConfigError> {
        let seed = self
            .seed
            .ok_or_else(|| ConfigError::Invalid("seed is mandatory in scenario files".into()))?;

        let track = match self.track {
            TrackSection::Straight { length_m } => TrackProfile::Straight {
                length_m: length_m.unwrap_or(4.0),
            },
            TrackSection::Race {
                perimeter_m,
                turn_radius_m,
            } => TrackProfile::Race {
                perimeter_m: perimeter_m.unwrap_or(14.0),
                turn_radius_m: turn_radius_m.unwrap_or(0.7),
            },
        };

        let speed = SpeedProfile {
            cruise_mps: self.speed.cruise_kmph / 3.6,
            accel_limit_mps2: self.speed.accel_limit_mps2.unwrap_or(0.5),
        };

        let id = EnvironmentId::parse(&self.environment.id).ok_or_else(|| {
            ConfigError::Invalid(format!(
                "unknown environment id {:?} (expected E1, E2, or E3)",
                self.environment.id
            ))
        })?;
        let mut environment = Environment::preset(id, &track);
        if let Some(objects) = self.environment.objects {
            environment.objects = objects;
        }
        if self.environment.corridor_halfwidth_m.is_some() {
            environment.corridor_halfwidth_m = self.environment.corridor_halfwidth_m;
        }

        let defaults = NoiseConfig::default();
        let noise = match self.noise {
            Some(n) => NoiseConfig {
                imu: n.imu.unwrap_or(defaults.imu),
                uwb: n.uwb.unwrap_or(defaults.uwb),
                radar: n.radar.unwrap_or(defaults.radar),
                radar_speed_factor: n.radar_speed_factor,
            },
            None => defaults,
        };

        let weights = match self.weights {
            Some(w) => FusionWeights {
                alpha_x: w.alpha_x.unwrap_or(0.7),
                alpha_y: w.alpha_y.unwrap_or(0.7),
                beta_x: w.beta_x.unwrap_or(0.4),
                beta_y: w.beta_y.unwrap_or(0.4),
            },
            None => FusionWeights {
                alpha_x: 0.7,
                alpha_y: 0.7,
                beta_x: 0.4,
                beta_y: 0.4,
            },
        };

        let asa = resolve_asa(self.asa)?;
        let power = resolve_power(self.power_model);

        let scenario = Scenario {
            seed,
            duration_s: self.duration_s,
            track,
            speed,
            environment,
            noise,
            weights,
            asa,
            power,
        };
        scenario
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(scenario)
    }
}

fn resolve_asa(section: Option<AsaSection>) -> Result<AsaSettings, ConfigError> {
    let mut settings = AsaSettings::default();
    let Some(s) = section else {
        return Ok(settings);
    };
    settings.enabled = match s.mode.as_deref() {
        None | Some("fixed-max") => false,
        Some("adaptive") => true,
        Some(other) => {
            return Err(ConfigError::Invalid(format!(
                "unknown asa mode {other:?} (expected \"adaptive\" or \"fixed-max\")"
            )))
        }
    };
    let cfg: &mut AsaConfig<Real> = &mut settings.config;
    if let Some(deg) = s.theta_threshold_deg {
        cfg.theta_threshold = deg.to_radians();
    }
    if let Some(d) = s.distance_threshold_m {
        cfg.distance_threshold = d;
    }
    if let Some(t) = s.period_s {
        cfg.period = t;
    }
    for (band, file_band) in [(&mut cfg.uwb, s.uwb), (&mut cfg.radar, s.radar)] {
        if let Some(fb) = file_band {
            if let Some(v) = fb.f_min {
                band.f_min = v;
            }
            if let Some(v) = fb.f_max {
                band.f_max = v;
            }
            if let Some(v) = fb.gamma {
                band.gamma = v;
            }
            if let Some(v) = fb.decay_slope {
                band.decay_slope = v;
            }
            if let Some(v) = fb.decay_offset {
                band.decay_offset = v;
            }
        }
    }
    Ok(settings)
}

fn resolve_power(section: Option<PowerSection>) -> PowerModel<Real> {
    let mut model = PowerModel::default();
    let Some(s) = section else {
        return model;
    };
    if let Some(v) = s.imu_w {
        model.imu_w = v;
    }
    if let Some(v) = s.base_w {
        model.base_w = v;
    }
    for (anchors, file_anchors) in [(&mut model.uwb, s.uwb), (&mut model.radar, s.radar)] {
        if let Some(fa) = file_anchors {
            apply_anchors(anchors, fa);
        }
    }
    if let Some(v) = s.uwb_range {
        model.uwb_range = v;
    }
    if let Some(v) = s.radar_range {
        model.radar_range = v;
    }
    model
}

fn apply_anchors(anchors: &mut PowerAnchors<Real>, fa: AnchorSection) {
    if let Some(v) = fa.f_lo {
        anchors.f_lo = v;
    }
    if let Some(v) = fa.p_lo {
        anchors.p_lo = v;
    }
    if let Some(v) = fa.f_hi {
        anchors.f_hi = v;
    }
    if let Some(v) = fa.p_hi {
        anchors.p_hi = v;
    }
}

/// Parses and resolves a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source: Box::new(source),
    })?;
    file.resolve()
}

pub const PRESET_NAMES: [&str; 3] = ["paper-defaults", "race-asa", "corridor-decay"];

/// Built-in scenarios. `paper-defaults` is the straight-track baseline with
/// every default parameter; `race-asa` is the adaptive race-track run;
/// `corridor-decay` is a quiet corridor run that exercises the frequency
/// decay ladder.
pub fn preset(name: &str) -> Option<Scenario> {
    let weights = FusionWeights {
        alpha_x: 0.7,
        alpha_y: 0.7,
        beta_x: 0.4,
        beta_y: 0.4,
    };
    let scenario = match name {
        "paper-defaults" => {
            let track = TrackProfile::Straight { length_m: 4.0 };
            Scenario {
                seed: 42,
                duration_s: 7.0,
                track,
                speed: SpeedProfile::from_kmph(4.0),
                environment: Environment::preset(EnvironmentId::E1, &track),
                noise: NoiseConfig::default(),
                weights,
                asa: AsaSettings::default(),
                power: PowerModel::default(),
            }
        }
        "race-asa" => {
            let track = TrackProfile::Race {
                perimeter_m: 14.0,
                turn_radius_m: 0.7,
            };
            Scenario {
                seed: 42,
                duration_s: 45.0,
                track,
                speed: SpeedProfile::from_kmph(1.2),
                environment: Environment::preset(EnvironmentId::E1, &track),
                noise: NoiseConfig::default(),
                weights,
                asa: AsaSettings {
                    enabled: true,
                    config: AsaConfig::default(),
                },
                power: PowerModel::default(),
            }
        }
        "corridor-decay" => {
            let track = TrackProfile::Straight { length_m: 4.0 };
            Scenario {
                seed: 42,
                duration_s: 8.0,
                track,
                speed: SpeedProfile::from_kmph(4.0),
                environment: Environment::preset(EnvironmentId::E3, &track),
                noise: NoiseConfig::default(),
                weights,
                asa: AsaSettings {
                    enabled: true,
                    config: AsaConfig::default(),
                },
                power: PowerModel::default(),
            }
        }
        _ => return None,
    };
    Some(scenario)
}
