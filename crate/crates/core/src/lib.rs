//! Digital twin of a 3-DOF spherical remote-centre-of-motion (RCM) surgical
//! robot: geometric models, joint-space trajectory planning, a simulated
//! motor/sensor plant, and the supervisor that drives it through a
//! PLC-style register map.

pub mod config;
pub mod control;
pub mod geometry;
pub mod kinematics;
pub mod plant;
pub mod replay;
pub mod trajectory;

pub use config::ServiceConfig;
pub use control::{Ack, Command, CommandMessage, ControlService, Mode, RejectReason, TelemetryFrame};
pub use geometry::{Joint, JointVector, Limit, MotionCaps, PerJoint, Point3, RobotGeometry, SphericalCoords};
pub use kinematics::{
    cartesian_to_spherical, forward_geometric, inverse_geometric, rcm_residual, validate_joints, KinematicsError,
    ValidationReport,
};
pub use trajectory::{plan_motion, plan_trapezoid, sample, ActuationMode, JointProfile, MotionPlan, TrajectorySample};
