//! Test environments: object layouts around the track and corridor geometry.

use serde::{Deserialize, Serialize};

use crate::track::TrackProfile;
use crate::Real;

/// Radar detection range for proximity reporting (m).
pub const RADAR_RANGE_M: Real = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvironmentId {
    E1,
    E2,
    E3,
}

impl EnvironmentId {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "E1" => Some(Self::E1),
            "E2" => Some(Self::E2),
            "E3" => Some(Self::E3),
            _ => None,
        }
    }
}

impl std::fmt::Display for EnvironmentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::E1 => write!(f, "E1"),
            Self::E2 => write!(f, "E2"),
            Self::E3 => write!(f, "E3"),
        }
    }
}

/// Circular object; radar distance is measured to its boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: Real,
    pub y: Real,
    pub radius: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub id: EnvironmentId,
    pub objects: Vec<Obstacle>,
    /// Corridor half-width for E3-style narrow spaces; informational only.
    pub corridor_halfwidth_m: Option<Real>,
}

impl Environment {
    /// Default object layout for an environment id and track combination.
    ///
    /// E1 is sparse: two objects beside a straight track, three larger ones
    /// around the race oval. E2 is dense office clutter. E3 is an empty
    /// corridor.
    pub fn preset(id: EnvironmentId, track: &TrackProfile) -> Self {
        let objects = match (id, track) {
            (EnvironmentId::E3, _) => Vec::new(),
            (EnvironmentId::E1, TrackProfile::Straight { length_m }) => vec![
                Obstacle {
                    x: 1.5,
                    y: 0.3 * length_m,
                    radius: 0.3,
                },
                Obstacle {
                    x: -1.5,
                    y: 0.7 * length_m,
                    radius: 0.3,
                },
            ],
            (EnvironmentId::E1, TrackProfile::Race { perimeter_m, turn_radius_m }) => {
                race_e1_objects(*perimeter_m, *turn_radius_m)
            }
            (EnvironmentId::E2, track) => dense_objects(track),
        };
        Environment {
            id,
            objects,
            corridor_halfwidth_m: if id == EnvironmentId::E3 {
                Some(0.75)
            } else {
                None
            },
        }
    }

    /// Distance from `(x, y)` to the boundary of the nearest object within
    /// radar range, `None` when nothing is in range.
    pub fn nearest_object_distance(&self, x: Real, y: Real) -> Option<Real> {
        self.objects
            .iter()
            .map(|o| ((x - o.x).hypot(y - o.y) - o.radius).max(0.0))
            .filter(|d| *d <= RADAR_RANGE_M)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id == EnvironmentId::E3 && !self.objects.is_empty() {
            return Err("E3 is an empty corridor and cannot contain objects".into());
        }
        if self.objects.iter().any(|o| o.radius <= 0.0) {
            return Err("object radii must be positive".into());
        }
        Ok(())
    }
}

/// Three large objects around the race oval. One sits beside each straight
/// and one beyond the first turn, all close enough for the proximity
/// threshold to fire as the vehicle passes.
fn race_e1_objects(perimeter_m: Real, turn_radius_m: Real) -> Vec<Obstacle> {
    let straight = (perimeter_m - 2.0 * std::f64::consts::PI * turn_radius_m) / 2.0;
    // Lateral clearance of 1.35 m with 0.4 m radius puts the closest boundary
    // approach at 0.95 m: inside the 1 m proximity threshold, but only for a
    // short stretch of the pass.
    let clearance = 1.35;
    vec![
        // Left of the first straight (track runs along x = 0).
        Obstacle {
            x: -clearance,
            y: 0.45 * straight,
            radius: 0.4,
        },
        // Above the first turn (track apex is at y = straight + r).
        Obstacle {
            x: turn_radius_m,
            y: straight + turn_radius_m + clearance,
            radius: 0.4,
        },
        // Right of the second straight (track runs along x = 2r).
        Obstacle {
            x: 2.0 * turn_radius_m + clearance,
            y: 0.55 * straight,
            radius: 0.4,
        },
    ]
}

fn dense_objects(track: &TrackProfile) -> Vec<Obstacle> {
    let span = track.path_length() / 3.0;
    let offsets = [
        (1.2, 0.15, 0.25),
        (-1.1, 0.3, 0.2),
        (1.4, 0.45, 0.3),
        (-1.3, 0.6, 0.25),
        (1.1, 0.75, 0.2),
        (-1.2, 0.9, 0.3),
        (2.2, 0.35, 0.35),
        (-2.0, 0.7, 0.35),
    ];
    offsets
        .iter()
        .map(|&(x, frac, radius)| Obstacle {
            x,
            y: frac * span * 2.0,
            radius,
        })
        .collect()
}
