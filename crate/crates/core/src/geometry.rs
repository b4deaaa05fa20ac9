//! Core value types: points, joint vectors and the static robot geometry.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point (or free vector) in the world frame, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Point3) -> Point3 {
        Point3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (*self - *other).norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Point3::new(v[0], v[1], v[2])
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// One of the three active joints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Joint {
    /// Revolute joint driven by M1 (rad).
    Q1,
    /// Circular-rail carriage driven by M2 (mm of arc).
    Q2,
    /// Linear insertion rail driven by M3 (mm).
    Q3,
}

impl Joint {
    pub const ALL: [Joint; 3] = [Joint::Q1, Joint::Q2, Joint::Q3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::Q1 => "q1",
            Joint::Q2 => "q2",
            Joint::Q3 => "q3",
        }
    }

    /// Name of the actuator moving this joint.
    pub fn axis_name(self) -> &'static str {
        match self {
            Joint::Q1 => "M1",
            Joint::Q2 => "M2",
            Joint::Q3 => "M3",
        }
    }

    pub fn parse(s: &str) -> Option<Joint> {
        match s.to_ascii_lowercase().as_str() {
            "q1" | "m1" => Some(Joint::Q1),
            "q2" | "m2" => Some(Joint::Q2),
            "q3" | "m3" => Some(Joint::Q3),
            _ => None,
        }
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A value for each of the three joints.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerJoint<T> {
    pub q1: T,
    pub q2: T,
    pub q3: T,
}

impl<T> PerJoint<T> {
    pub fn from_fn(mut f: impl FnMut(Joint) -> T) -> Self {
        PerJoint { q1: f(Joint::Q1), q2: f(Joint::Q2), q3: f(Joint::Q3) }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Joint, &T) -> U) -> PerJoint<U> {
        PerJoint { q1: f(Joint::Q1, &self.q1), q2: f(Joint::Q2, &self.q2), q3: f(Joint::Q3, &self.q3) }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Joint, &T)> {
        [(Joint::Q1, &self.q1), (Joint::Q2, &self.q2), (Joint::Q3, &self.q3)].into_iter()
    }
}

impl<T> Index<Joint> for PerJoint<T> {
    type Output = T;
    fn index(&self, j: Joint) -> &T {
        match j {
            Joint::Q1 => &self.q1,
            Joint::Q2 => &self.q2,
            Joint::Q3 => &self.q3,
        }
    }
}

impl<T> IndexMut<Joint> for PerJoint<T> {
    fn index_mut(&mut self, j: Joint) -> &mut T {
        match j {
            Joint::Q1 => &mut self.q1,
            Joint::Q2 => &mut self.q2,
            Joint::Q3 => &mut self.q3,
        }
    }
}

/// Active joint values: q1 in rad, q2 as arc length on the circular rail (mm),
/// q3 as linear-rail position (mm).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointVector {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl JointVector {
    pub const fn new(q1: f64, q2: f64, q3: f64) -> Self {
        Self { q1, q2, q3 }
    }

    pub fn is_finite(&self) -> bool {
        self.q1.is_finite() && self.q2.is_finite() && self.q3.is_finite()
    }

    pub fn get(&self, j: Joint) -> f64 {
        match j {
            Joint::Q1 => self.q1,
            Joint::Q2 => self.q2,
            Joint::Q3 => self.q3,
        }
    }

    pub fn set(&mut self, j: Joint, v: f64) {
        match j {
            Joint::Q1 => self.q1 = v,
            Joint::Q2 => self.q2 = v,
            Joint::Q3 => self.q3 = v,
        }
    }

    pub fn with(mut self, j: Joint, v: f64) -> Self {
        self.set(j, v);
        self
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.q1, self.q2, self.q3]
    }
}

impl From<[f64; 3]> for JointVector {
    fn from(v: [f64; 3]) -> Self {
        JointVector::new(v[0], v[1], v[2])
    }
}

/// The (θ, ψ, ins) parameterisation of a tip position relative to the RCM.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SphericalCoords {
    /// Rotation about the horizontal axis (rad).
    pub theta: f64,
    /// Elevation along the circular rail, in [−π/2, π/2] (rad).
    pub psi: f64,
    /// Insertion depth past the RCM (mm, ≥ 0).
    pub ins: f64,
}

/// Closed joint interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limit {
    pub min: f64,
    pub max: f64,
}

impl Limit {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Velocity and acceleration caps of one joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionCaps {
    pub v_max: f64,
    pub a_max: f64,
}

impl MotionCaps {
    pub const fn new(v_max: f64, a_max: f64) -> Self {
        Self { v_max, a_max }
    }
}

/// Static geometry of the spherical robot: the truth every other module depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotGeometry {
    /// Radius of the circular rail, R (mm).
    pub rail_radius: f64,
    /// Tool-holder offset along the insertion axis, m (mm).
    pub tool_offset: f64,
    /// Remote centre of motion in the world frame.
    pub rcm: Point3,
    pub limits: PerJoint<Limit>,
    pub caps: PerJoint<MotionCaps>,
}

impl Default for RobotGeometry {
    /// The reference configuration: R = 300 mm, m = 50 mm, RCM at the origin.
    fn default() -> Self {
        let r = 300.0;
        RobotGeometry {
            rail_radius: r,
            tool_offset: 50.0,
            rcm: Point3::ORIGIN,
            limits: PerJoint {
                q1: Limit::new(-PI, PI),
                q2: Limit::new(0.0, PI * r),
                q3: Limit::new(0.0, 600.0),
            },
            caps: PerJoint {
                q1: MotionCaps::new(0.5, 1.0),
                q2: MotionCaps::new(50.0, 100.0),
                q3: MotionCaps::new(30.0, 60.0),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("rail radius must be finite and positive, got {0}")]
    RailRadius(f64),
    #[error("tool offset must satisfy 0 <= m < R, got m = {0}")]
    ToolOffset(f64),
    #[error("rcm must be finite")]
    Rcm,
    #[error("invalid {joint} limits [{min}, {max}]: {reason}")]
    Limits { joint: Joint, min: f64, max: f64, reason: &'static str },
    #[error("invalid {joint} caps: v_max and a_max must be finite and positive")]
    Caps { joint: Joint },
}

impl RobotGeometry {
    /// `R − m`: the q3 value that puts the tip exactly on the RCM.
    pub fn q3_at_rcm(&self) -> f64 {
        self.rail_radius - self.tool_offset
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let r = self.rail_radius;
        if !(r.is_finite() && r > 0.0) {
            return Err(GeometryError::RailRadius(r));
        }
        let m = self.tool_offset;
        if !(m.is_finite() && m >= 0.0 && m < r) {
            return Err(GeometryError::ToolOffset(m));
        }
        if !self.rcm.is_finite() {
            return Err(GeometryError::Rcm);
        }
        for (joint, lim) in self.limits.iter() {
            let err = |reason| GeometryError::Limits { joint, min: lim.min, max: lim.max, reason };
            if !(lim.min.is_finite() && lim.max.is_finite()) {
                return Err(err("non-finite bound"));
            }
            if lim.min >= lim.max {
                return Err(err("min must be below max"));
            }
            match joint {
                Joint::Q1 => {}
                Joint::Q2 => {
                    // A tiny slack absorbs the rounding of π·R written out in config files.
                    if lim.min < 0.0 || lim.max > PI * r * (1.0 + 1e-12) {
                        return Err(err("q2 must lie within [0, πR]"));
                    }
                }
                Joint::Q3 => {
                    if lim.min < 0.0 {
                        return Err(err("q3 minimum must be non-negative"));
                    }
                }
            }
        }
        for (joint, caps) in self.caps.iter() {
            let ok = |v: f64| v.is_finite() && v > 0.0;
            if !(ok(caps.v_max) && ok(caps.a_max)) {
                return Err(GeometryError::Caps { joint });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_is_valid() {
        let g = RobotGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.q3_at_rcm(), 250.0);
        assert_eq!(g.limits.q2.max, 300.0 * PI);
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut g = RobotGeometry { tool_offset: 300.0, ..Default::default() };
        assert_eq!(g.validate(), Err(GeometryError::ToolOffset(300.0)));
        g.tool_offset = 50.0;
        g.limits.q2 = Limit::new(-1.0, 10.0);
        assert!(matches!(g.validate(), Err(GeometryError::Limits { joint: Joint::Q2, .. })));
        g.limits.q2 = Limit::new(0.0, 10.0);
        g.limits.q3 = Limit::new(-1.0, 10.0);
        assert!(matches!(g.validate(), Err(GeometryError::Limits { joint: Joint::Q3, .. })));
        g.limits.q3 = Limit::new(0.0, 10.0);
        g.caps.q1.a_max = 0.0;
        assert_eq!(g.validate(), Err(GeometryError::Caps { joint: Joint::Q1 }));
        let g = RobotGeometry { rail_radius: -1.0, ..Default::default() };
        assert_eq!(g.validate(), Err(GeometryError::RailRadius(-1.0)));
    }

    #[test]
    fn cross_product_is_right_handed() {
        let x = Point3::new(1.0, 0.0, 0.0);
        let y = Point3::new(0.0, 1.0, 0.0);
        assert_eq!(x.cross(&y), Point3::new(0.0, 0.0, 1.0));
    }
}
