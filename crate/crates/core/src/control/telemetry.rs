use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{JointVector, PerJoint, Point3};
use crate::plant::{AxisSnapshot, InstrumentChannels};

/// Supervisor operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Init,
    Homing,
    Ready,
    Moving,
    Inserting,
    Fault,
    EStopped,
}

impl Mode {
    /// Code stored in bits 4–6 of the status register.
    pub fn code(self) -> u8 {
        match self {
            Mode::Init => 0,
            Mode::Homing => 1,
            Mode::Ready => 2,
            Mode::Moving => 3,
            Mode::Inserting => 4,
            Mode::Fault => 5,
            Mode::EStopped => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Mode> {
        Some(match code {
            0 => Mode::Init,
            1 => Mode::Homing,
            2 => Mode::Ready,
            3 => Mode::Moving,
            4 => Mode::Inserting,
            5 => Mode::Fault,
            6 => Mode::EStopped,
            _ => return None,
        })
    }

    pub fn is_busy(self) -> bool {
        matches!(self, Mode::Homing | Mode::Moving | Mode::Inserting)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One supervisor tick as seen by observers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub tick: u64,
    /// Simulated time since start-up (s).
    pub time: f64,
    pub joints: JointVector,
    pub tip: Point3,
    pub axes: PerJoint<AxisSnapshot>,
    pub mode: Mode,
    pub aligned: bool,
    /// Fraction of the active plan executed, 0 when idle.
    pub progress: f64,
    pub goal: Option<Point3>,
    pub instrument: InstrumentChannels,
}

impl TelemetryFrame {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("serialisable")
    }

    pub fn velocities(&self) -> JointVector {
        JointVector::new(self.axes.q1.velocity, self.axes.q2.velocity, self.axes.q3.velocity)
    }
}
