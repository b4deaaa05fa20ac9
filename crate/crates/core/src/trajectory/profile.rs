use serde::{Deserialize, Serialize};

use super::TrajectoryError;

/// Position, velocity and acceleration of one joint at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub pos: f64,
    pub vel: f64,
    pub acc: f64,
}

/// Rest-to-rest trapezoidal velocity profile for a single joint.
///
/// Accelerates at `accel` for `t_accel`, cruises at `v_cruise` for
/// `t_cruise`, then decelerates symmetrically. `t_cruise` is zero for
/// triangular profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointProfile {
    pub from: f64,
    pub to: f64,
    pub v_max: f64,
    pub a_max: f64,
    /// Magnitude of the velocity actually reached.
    pub v_cruise: f64,
    pub t_accel: f64,
    pub t_cruise: f64,
    pub duration: f64,
}

pub fn plan_trapezoid(from: f64, to: f64, v_max: f64, a_max: f64) -> Result<JointProfile, TrajectoryError> {
    if !(v_max.is_finite() && v_max > 0.0 && a_max.is_finite() && a_max > 0.0) {
        return Err(TrajectoryError::InvalidLimits { v_max, a_max });
    }
    if !(from.is_finite() && to.is_finite()) {
        return Err(TrajectoryError::NonFinite);
    }
    let distance = (to - from).abs();
    let base = JointProfile { from, to, v_max, a_max, v_cruise: 0.0, t_accel: 0.0, t_cruise: 0.0, duration: 0.0 };
    if distance == 0.0 {
        return Ok(base);
    }
    // distance needed to reach v_max and stop again
    let ramp_distance = v_max * v_max / a_max;
    let profile = if distance >= ramp_distance {
        let t_accel = v_max / a_max;
        let t_cruise = (distance - ramp_distance) / v_max;
        JointProfile { v_cruise: v_max, t_accel, t_cruise, duration: 2.0 * t_accel + t_cruise, ..base }
    } else {
        let t_accel = (distance / a_max).sqrt();
        JointProfile { v_cruise: a_max * t_accel, t_accel, t_cruise: 0.0, duration: 2.0 * t_accel, ..base }
    };
    Ok(profile)
}

impl JointProfile {
    pub fn distance(&self) -> f64 {
        (self.to - self.from).abs()
    }

    fn direction(&self) -> f64 {
        if self.to >= self.from {
            1.0
        } else {
            -1.0
        }
    }

    pub fn is_idle(&self) -> bool {
        self.duration == 0.0
    }

    /// Stretches the profile to `duration` by lowering the cruise velocity,
    /// keeping the acceleration at `a_max`. Targets shorter than the current
    /// duration leave the profile unchanged.
    pub fn stretched(&self, duration: f64) -> JointProfile {
        let d = self.distance();
        if d == 0.0 || duration <= self.duration {
            return *self;
        }
        let a = self.a_max;
        // Smaller root of v² − a·T·v + a·d = 0, i.e. T = d/v + v/a.
        let disc = (a * a * duration * duration - 4.0 * a * d).max(0.0);
        // Citardauq form keeps precision when v ≪ a·T.
        let v = 2.0 * a * d / (a * duration + disc.sqrt());
        let t_accel = v / a;
        JointProfile {
            v_cruise: v,
            t_accel,
            t_cruise: (duration - 2.0 * t_accel).max(0.0),
            duration,
            ..*self
        }
    }

    /// Times at which the acceleration changes.
    pub fn breakpoints(&self) -> [f64; 4] {
        [0.0, self.t_accel, self.t_accel + self.t_cruise, self.duration]
    }

    /// State at time `t` after the profile start. Clamped outside `[0, duration]`.
    pub fn eval(&self, t: f64) -> JointState {
        if t <= 0.0 || self.duration == 0.0 {
            return JointState { pos: if t >= self.duration { self.to } else { self.from }, vel: 0.0, acc: 0.0 };
        }
        if t >= self.duration {
            return JointState { pos: self.to, vel: 0.0, acc: 0.0 };
        }
        let s = self.direction();
        let v = self.v_cruise;
        let a = v / self.t_accel;
        let t_decel_start = self.t_accel + self.t_cruise;
        let (dist, vel, acc) = if t < self.t_accel {
            (0.5 * a * t * t, a * t, a)
        } else if t < t_decel_start {
            (0.5 * v * self.t_accel + v * (t - self.t_accel), v, 0.0)
        } else {
            // measured backwards from the end keeps the final approach exact
            let rem = self.duration - t;
            (self.distance() - 0.5 * a * rem * rem, a * rem, -a)
        };
        JointState { pos: self.from + s * dist, vel: s * vel, acc: s * acc }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_move_has_zero_duration() {
        let p = plan_trapezoid(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(p.duration, 0.0);
        assert_eq!(p.eval(0.0).pos, 0.0);
        assert_eq!(p.eval(1.0), JointState { pos: 0.0, vel: 0.0, acc: 0.0 });
    }

    #[test]
    fn invalid_limits() {
        assert!(matches!(plan_trapezoid(0.0, 1.0, 0.0, 1.0), Err(TrajectoryError::InvalidLimits { .. })));
        assert!(matches!(plan_trapezoid(0.0, 1.0, 1.0, -1.0), Err(TrajectoryError::InvalidLimits { .. })));
        assert!(matches!(plan_trapezoid(0.0, 1.0, f64::NAN, 1.0), Err(TrajectoryError::InvalidLimits { .. })));
    }

    #[test]
    fn negative_direction() {
        let p = plan_trapezoid(10.0, -90.0, 10.0, 10.0).unwrap();
        assert!((p.duration - 11.0).abs() < 1e-12);
        let mid = p.eval(5.5);
        assert!((mid.pos - (-40.0)).abs() < 1e-12);
        assert_eq!(mid.vel, -10.0);
        assert_eq!(p.eval(0.5).acc, -10.0);
        assert_eq!(p.eval(10.5).acc, 10.0);
    }

    #[test]
    fn stretch_keeps_acceleration_and_hits_target_duration() {
        let p = plan_trapezoid(0.0, 100.0, 10.0, 10.0).unwrap();
        let s = p.stretched(20.0);
        assert!((s.duration - 20.0).abs() < 1e-12);
        assert!(s.v_cruise < 10.0);
        assert!((s.v_cruise / s.t_accel - 10.0).abs() < 1e-9);
        // area under the stretched velocity curve is still the distance
        let area = s.v_cruise * (s.t_accel + s.t_cruise);
        assert!((area - 100.0).abs() < 1e-9);
        assert!((s.eval(20.0).pos - 100.0).abs() == 0.0);
        // shorter target: unchanged
        assert_eq!(p.stretched(5.0), p);
    }

    #[test]
    fn stretch_triangular_to_exact_minimum_is_identity() {
        let p = plan_trapezoid(0.0, 1.0, 10.0, 10.0).unwrap();
        let s = p.stretched(p.duration * (1.0 + 1e-15));
        assert!((s.v_cruise - p.v_cruise).abs() < 1e-6);
    }
}
