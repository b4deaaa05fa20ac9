use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::profile::{plan_trapezoid, JointProfile, JointState};
use super::TrajectoryError;
use crate::geometry::{Joint, JointVector, PerJoint, RobotGeometry};
use crate::kinematics::validate_joints;

/// How the active joints are actuated between two configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActuationMode {
    /// q1, then q2, then q3, one joint at a time.
    Sequential,
    /// q1 and q2 together (synchronised), then q3.
    Simultaneous,
}

impl FromStr for ActuationMode {
    type Err = TrajectoryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" | "seq" => Ok(ActuationMode::Sequential),
            "simultaneous" | "sim" => Ok(ActuationMode::Simultaneous),
            _ => Err(TrajectoryError::UnknownMode(s.to_string())),
        }
    }
}

impl fmt::Display for ActuationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActuationMode::Sequential => "sequential",
            ActuationMode::Simultaneous => "simultaneous",
        })
    }
}

/// A time window in which a subset of joints moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub start_time: f64,
    pub duration: f64,
    /// Profiles of the joints active in this phase; every other joint holds.
    pub profiles: Vec<(Joint, JointProfile)>,
}

impl Phase {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }

    pub fn moves(&self, joint: Joint) -> bool {
        self.profiles.iter().any(|(j, _)| *j == joint)
    }

    pub fn profile(&self, joint: Joint) -> Option<&JointProfile> {
        self.profiles.iter().find(|(j, _)| *j == joint).map(|(_, p)| p)
    }
}

/// An immutable joint-space motion from `start` to `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPlan {
    pub mode: ActuationMode,
    pub start: JointVector,
    pub end: JointVector,
    pub phases: Vec<Phase>,
}

/// Builds the phases from per-phase joint groups. Joints in one group are
/// synchronised to the slowest member.
fn build_phases(
    start: &JointVector,
    end: &JointVector,
    groups: &[&[Joint]],
    geom: &RobotGeometry,
) -> Result<Vec<Phase>, TrajectoryError> {
    let mut t = 0.0;
    let mut phases = Vec::with_capacity(groups.len());
    for group in groups {
        let mut profiles = group
            .iter()
            .map(|&j| {
                let caps = geom.caps[j];
                plan_trapezoid(start.get(j), end.get(j), caps.v_max, caps.a_max).map(|p| (j, p))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let duration = profiles.iter().map(|(_, p)| p.duration).fold(0.0, f64::max);
        for (_, p) in profiles.iter_mut() {
            *p = p.stretched(duration);
        }
        phases.push(Phase { start_time: t, duration, profiles });
        t += duration;
    }
    Ok(phases)
}

/// Plans a rest-to-rest move between two in-limit configurations.
pub fn plan_motion(
    from: &JointVector,
    to: &JointVector,
    mode: ActuationMode,
    geom: &RobotGeometry,
) -> Result<MotionPlan, TrajectoryError> {
    for q in [from, to] {
        if !q.is_finite() {
            return Err(TrajectoryError::NonFinite);
        }
        let report = validate_joints(q, geom);
        if !report.is_ok() {
            return Err(TrajectoryError::OutOfWorkspace { joints: *q });
        }
    }
    let groups: &[&[Joint]] = match mode {
        ActuationMode::Sequential => &[&[Joint::Q1], &[Joint::Q2], &[Joint::Q3]],
        ActuationMode::Simultaneous => &[&[Joint::Q1, Joint::Q2], &[Joint::Q3]],
    };
    let phases = build_phases(from, to, groups, geom)?;
    Ok(MotionPlan { mode, start: *from, end: *to, phases })
}

/// A single-joint move, used for jogging.
pub fn plan_single_joint(
    from: &JointVector,
    joint: Joint,
    target: f64,
    geom: &RobotGeometry,
) -> Result<MotionPlan, TrajectoryError> {
    let to = from.with(joint, target);
    let phases = build_phases(from, &to, &[&[joint]], geom)?;
    Ok(MotionPlan { mode: ActuationMode::Sequential, start: *from, end: to, phases })
}

impl MotionPlan {
    pub fn duration(&self) -> f64 {
        self.phases.last().map_or(0.0, Phase::end_time)
    }

    pub fn phase_durations(&self) -> Vec<f64> {
        self.phases.iter().map(|p| p.duration).collect()
    }

    /// Index of the phase covering time `t` (the last phase for `t` past the end).
    pub fn phase_index_at(&self, t: f64) -> usize {
        self.phases
            .iter()
            .position(|p| t < p.end_time())
            .unwrap_or(self.phases.len().saturating_sub(1))
    }

    /// Every instant where some joint's acceleration changes, sorted, deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut times: Vec<f64> = Vec::new();
        for phase in &self.phases {
            times.push(phase.start_time);
            times.push(phase.end_time());
            for (_, p) in &phase.profiles {
                times.extend(p.breakpoints().iter().map(|t| phase.start_time + t));
            }
        }
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        times
    }

    /// Joint states at plan time `t` (clamped to the plan's extent).
    pub fn eval(&self, t: f64) -> PerJoint<JointState> {
        PerJoint::from_fn(|j| self.eval_joint(j, t))
    }

    pub fn eval_joint(&self, joint: Joint, t: f64) -> JointState {
        let mut pos = self.start.get(joint);
        for phase in &self.phases {
            if let Some(p) = phase.profile(joint) {
                if t < phase.start_time {
                    return JointState { pos: p.from, vel: 0.0, acc: 0.0 };
                }
                if t < phase.end_time() {
                    return p.eval(t - phase.start_time);
                }
                pos = p.to;
            }
        }
        JointState { pos, vel: 0.0, acc: 0.0 }
    }

    pub fn positions_at(&self, t: f64) -> JointVector {
        let s = self.eval(t);
        JointVector::new(s.q1.pos, s.q2.pos, s.q3.pos)
    }
}
