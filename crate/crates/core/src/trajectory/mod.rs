//! Joint-space motion planning with trapezoidal velocity profiles.
//!
//! Two actuation modes are supported: [`ActuationMode::Sequential`] moves
//! q1, q2 and q3 one after the other; [`ActuationMode::Simultaneous`] moves
//! q1 and q2 together (the faster joint is slowed down by lowering its cruise
//! velocity) and then inserts with q3.

mod csv;
mod plan;
mod profile;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{JointVector, PerJoint};

pub use self::csv::{export_csv, format_significant, parse_csv, to_csv_string, CsvError, CSV_HEADER};
pub use self::plan::{plan_motion, plan_single_joint, ActuationMode, MotionPlan, Phase};
pub use self::profile::{plan_trapezoid, JointProfile, JointState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("invalid limits: v_max = {v_max}, a_max = {a_max} (both must be > 0)")]
    InvalidLimits { v_max: f64, a_max: f64 },
    #[error("invalid sampling step {0} (must be > 0)")]
    InvalidStep(f64),
    #[error("endpoint {joints:?} is outside the joint limits")]
    OutOfWorkspace { joints: JointVector },
    #[error("unknown actuation mode {0:?}")]
    UnknownMode(String),
    #[error("non-finite input")]
    NonFinite,
}

/// Per-joint position, velocity and acceleration at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub joints: PerJoint<JointState>,
}

impl TrajectorySample {
    pub fn positions(&self) -> JointVector {
        JointVector::new(self.joints.q1.pos, self.joints.q2.pos, self.joints.q3.pos)
    }
}

/// Samples `plan` every `dt` seconds. Acceleration breakpoints (including
/// phase boundaries) are inserted even when they fall between grid points,
/// and the last sample sits exactly at the plan's end.
pub fn sample(plan: &MotionPlan, dt: f64) -> Result<Vec<TrajectorySample>, TrajectoryError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(TrajectoryError::InvalidStep(dt));
    }
    let total = plan.duration();
    let mut times = Vec::new();
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * dt;
        if t >= total {
            break;
        }
        times.push(t);
        k += 1;
    }
    let breakpoints = plan.breakpoints();
    times.extend(breakpoints.iter().copied());
    times.push(total);
    times.sort_by(f64::total_cmp);
    // near-duplicates collapse onto the exact breakpoint
    let mut merged: Vec<f64> = Vec::with_capacity(times.len());
    for t in times {
        match merged.last_mut() {
            Some(last) if (t - *last).abs() <= 1e-12 => {
                if breakpoints.contains(&t) {
                    *last = t;
                }
            }
            _ => merged.push(t),
        }
    }
    Ok(merged.into_iter().map(|t| TrajectorySample { t, joints: plan.eval(t) }).collect())
}
