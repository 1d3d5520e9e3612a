//! Domain types, elliptical body geometry and periodic-boundary arithmetic.

use std::fmt;
use std::str::FromStr;

use glam::DVec2;
use thiserror::Error;

/// Longitudinal road axis; cars always head this way.
pub const ROAD_AXIS: DVec2 = DVec2::X;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("agents {0} and {1} have coincident centers")]
    CoincidentCenters(u32, u32),
    #[error("invalid body shape: semi-axes must be positive (got {0}, {1})")]
    InvalidShape(f64, f64),
}

/// Vehicle class. Cars keep their lane, motorcycles move in two dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeClass {
    Car,
    Motorcycle,
}

impl ModeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeClass::Car => "car",
            ModeClass::Motorcycle => "moto",
        }
    }
}

impl fmt::Display for ModeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "car" => Ok(ModeClass::Car),
            "moto" | "motorcycle" => Ok(ModeClass::Motorcycle),
            other => Err(format!("unknown mode `{other}` (expected `car` or `moto`)")),
        }
    }
}

/// Elliptical body given by its two semi-axes, measured in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyShape {
    pub semi_longitudinal: f64,
    pub semi_lateral: f64,
}

impl BodyShape {
    pub fn new(semi_longitudinal: f64, semi_lateral: f64) -> Result<Self, GeometryError> {
        if !(semi_longitudinal > 0.0 && semi_lateral > 0.0) {
            return Err(GeometryError::InvalidShape(semi_longitudinal, semi_lateral));
        }
        Ok(Self {
            semi_longitudinal,
            semi_lateral,
        })
    }

    /// 4 m x 2 m ellipse.
    pub const fn car() -> Self {
        Self {
            semi_longitudinal: 2.0,
            semi_lateral: 1.0,
        }
    }

    /// Disk of 1 m diameter.
    pub const fn motorcycle() -> Self {
        Self {
            semi_longitudinal: 0.5,
            semi_lateral: 0.5,
        }
    }

    pub fn for_mode(mode: ModeClass) -> Self {
        match mode {
            ModeClass::Car => Self::car(),
            ModeClass::Motorcycle => Self::motorcycle(),
        }
    }
}

/// Support radius of an elliptical body along `direction`.
///
/// The angle is taken between `direction` and the body's `heading`, so the
/// result is `a*b / sqrt((b cos t)^2 + (a sin t)^2)` with `a` the longitudinal
/// and `b` the lateral semi-axis. Both vectors must be unit length.
pub fn directional_radius(shape: BodyShape, heading: DVec2, direction: DVec2) -> f64 {
    let a = shape.semi_longitudinal;
    let b = shape.semi_lateral;
    if a == b {
        return a;
    }
    let cos = heading.dot(direction);
    let sin = heading.perp_dot(direction);
    a * b / ((b * cos).powi(2) + (a * sin).powi(2)).sqrt()
}

/// Straight periodic road with `n_lanes` lanes bounded by two curbs at
/// `y = 0` and `y = width()`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadGeometry {
    pub length: f64,
    pub n_lanes: usize,
    pub lane_width: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        Self {
            length: 100.0,
            n_lanes: 3,
            lane_width: 4.0,
        }
    }
}

/// One of the two road boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Curb {
    Lower,
    Upper,
}

impl Curb {
    pub const BOTH: [Curb; 2] = [Curb::Lower, Curb::Upper];

    /// Unit vector from any point on the road toward the closest point of this curb.
    pub fn direction(self) -> DVec2 {
        match self {
            Curb::Lower => DVec2::NEG_Y,
            Curb::Upper => DVec2::Y,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Curb::Lower => "lower",
            Curb::Upper => "upper",
        }
    }
}

impl RoadGeometry {
    pub fn width(&self) -> f64 {
        self.n_lanes as f64 * self.lane_width
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }

    /// Index of the lane whose center is closest to `y`, clamped to the road.
    pub fn nearest_lane(&self, y: f64) -> usize {
        let idx = (y / self.lane_width).floor();
        if idx < 0.0 {
            0
        } else {
            (idx as usize).min(self.n_lanes.saturating_sub(1))
        }
    }

    /// Lateral positions separating adjacent lanes (excludes the curbs).
    pub fn lane_boundaries(&self) -> Vec<f64> {
        (1..self.n_lanes)
            .map(|k| k as f64 * self.lane_width)
            .collect()
    }

    /// Maps a longitudinal coordinate into `[0, L)`.
    pub fn wrap_x(&self, x: f64) -> f64 {
        let w = x.rem_euclid(self.length);
        // rem_euclid may round up to exactly L for tiny negative inputs
        if w >= self.length {
            0.0
        } else {
            w
        }
    }

    /// Distance from `y` to the closest point of `curb`.
    pub fn curb_distance(&self, y: f64, curb: Curb) -> f64 {
        match curb {
            Curb::Lower => y,
            Curb::Upper => self.width() - y,
        }
    }
}

/// Minimum-image longitudinal difference, in `[-L/2, L/2)`.
pub fn wrap_dx(dx: f64, length: f64) -> f64 {
    let half = 0.5 * length;
    let w = (dx + half).rem_euclid(length) - half;
    if w >= half {
        w - length
    } else {
        w
    }
}

/// Displacement `to - from` under the minimum-image convention along the road
/// axis. The lateral component is not wrapped.
pub fn wrap_displacement(from: DVec2, to: DVec2, road: &RoadGeometry) -> DVec2 {
    DVec2::new(wrap_dx(to.x - from.x, road.length), to.y - from.y)
}

/// The simulated particle.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: u32,
    pub mode: ModeClass,
    pub position: DVec2,
    /// Unit heading vector.
    pub heading: DVec2,
    pub speed: f64,
    pub desired_speed: f64,
    /// Lateral position at initialization; motorcycles steer back toward it.
    pub y_init: f64,
    pub lane: Option<usize>,
    pub shape: BodyShape,
}

impl AgentState {
    pub fn new(id: u32, mode: ModeClass, position: DVec2, desired_speed: f64) -> Self {
        Self {
            id,
            mode,
            position,
            heading: ROAD_AXIS,
            speed: 0.0,
            desired_speed,
            y_init: position.y,
            lane: None,
            shape: BodyShape::for_mode(mode),
        }
    }

    pub fn velocity(&self) -> DVec2 {
        self.heading * self.speed
    }

    pub fn is_car(&self) -> bool {
        self.mode == ModeClass::Car
    }

    /// Support radius of this body along `direction`.
    pub fn radius_toward(&self, direction: DVec2) -> f64 {
        directional_radius(self.shape, self.heading, direction)
    }

    /// Heading angle in radians, in `(-pi, pi]`.
    pub fn theta(&self) -> f64 {
        self.heading.y.atan2(self.heading.x)
    }
}

/// Center-to-center distance between two agents under periodic wrapping.
pub fn spacing(i: &AgentState, j: &AgentState, road: &RoadGeometry) -> Result<f64, GeometryError> {
    let s = wrap_displacement(i.position, j.position, road).length();
    if s > 0.0 {
        Ok(s)
    } else {
        Err(GeometryError::CoincidentCenters(i.id, j.id))
    }
}

/// Geometry of the pair `i -> j` evaluated once and shared by the
/// perception, repulsion and leader-set computations.
#[derive(Debug, Clone, Copy)]
pub struct PairGeometry {
    /// Minimum-image displacement from `i` to `j`.
    pub displacement: DVec2,
    pub spacing: f64,
    /// Unit vector from `i` to `j`.
    pub unit: DVec2,
    pub radius_i: f64,
    pub radius_j: f64,
}

impl PairGeometry {
    pub fn between(
        i: &AgentState,
        j: &AgentState,
        road: &RoadGeometry,
    ) -> Result<Self, GeometryError> {
        let displacement = wrap_displacement(i.position, j.position, road);
        let spacing = displacement.length();
        if spacing <= 0.0 {
            return Err(GeometryError::CoincidentCenters(i.id, j.id));
        }
        let unit = displacement / spacing;
        Ok(Self {
            displacement,
            spacing,
            unit,
            radius_i: i.radius_toward(unit),
            radius_j: j.radius_toward(-unit),
        })
    }

    pub fn radius_sum(&self) -> f64 {
        self.radius_i + self.radius_j
    }

    /// `(r_i + r_j) / s_ij`, the lateral-overlap bound used by the set conditions.
    pub fn overlap_ratio(&self) -> f64 {
        self.radius_sum() / self.spacing
    }
}

/// `+1` for non-negative input. Zero resolves to `+1`.
pub fn sign_nonneg(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `v` rotated by +90 degrees.
pub fn perp(v: DVec2) -> DVec2 {
    DVec2::new(-v.y, v.x)
}
