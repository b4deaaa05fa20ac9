//! Exact geometric models of the spherical RCM robot.
//!
//! The instrument axis always passes through the remote centre of motion
//! (RCM). With `L = q3 − R + m` the signed insertion length past the RCM and
//! `ψ = q2/R − π/2`, the tip sits at
//!
//! ```text
//! X = X_rcm − L·cos ψ·sin q1
//! Y = Y_rcm − L·sin ψ
//! Z = Z_rcm − L·cos ψ·cos q1
//! ```
//!
//! and the inverse maps a tip position back through `(θ, ψ, ins)` with
//! `q1 = θ`, `q2 = R(ψ + π/2)`, `q3 = (R − m) + ins`.
//!
//! Branch convention: with `v = rcm − p`, `θ = atan2(v_x, v_z)` and
//! `ψ = asin(v_y / |v|)`. When `|cos ψ| < 1e-6` the tip lies on the Y axis
//! ray, `θ` is free and the result is flagged singular; stateless calls
//! report `θ = 0`, streaming callers pass the previous `θ` as a hint.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Joint, JointVector, PerJoint, Point3, RobotGeometry, SphericalCoords};

/// Tip positions closer than this to the RCM have no defined direction (mm).
pub const DEGENERATE_DISTANCE: f64 = 1e-6;

/// `|cos ψ|` below this makes θ unobservable.
pub const SINGULAR_COS_PSI: f64 = 1e-6;

/// Probe insertion step used by [`rcm_residual`] (mm).
pub const RCM_PROBE_STEP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("tip is {distance:e} mm from the RCM; instrument direction is undefined")]
    DegenerateInput { distance: f64 },
    #[error("joint solution {joints:?} violates the joint limits")]
    OutOfWorkspace { joints: JointVector, report: ValidationReport },
    #[error("non-finite input")]
    NonFinite,
}

/// Result of the Cartesian → spherical inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalSolution {
    pub coords: SphericalCoords,
    /// θ is not observable at this point; the reported value came from the tie-break.
    pub singular: bool,
}

/// Forward geometric model: tip position for the joint vector `q`.
///
/// Total on finite input. Joint limits are not consulted.
pub fn forward_geometric(q: &JointVector, geom: &RobotGeometry) -> Point3 {
    let r = geom.rail_radius;
    let reach = q.q3 - r + geom.tool_offset;
    let psi = q.q2 / r - FRAC_PI_2;
    let (sin_psi, cos_psi) = psi.sin_cos();
    let (sin_q1, cos_q1) = q.q1.sin_cos();
    Point3 {
        x: geom.rcm.x - reach * cos_psi * sin_q1,
        y: geom.rcm.y - reach * sin_psi,
        z: geom.rcm.z - reach * cos_psi * cos_q1,
    }
}

/// Spherical coordinates of `p` relative to the RCM, with θ = 0 at singular points.
pub fn cartesian_to_spherical(p: &Point3, geom: &RobotGeometry) -> Result<SphericalSolution, KinematicsError> {
    cartesian_to_spherical_hinted(p, geom, None)
}

/// Like [`cartesian_to_spherical`] but keeps `theta_hint` at singular points.
pub fn cartesian_to_spherical_hinted(
    p: &Point3,
    geom: &RobotGeometry,
    theta_hint: Option<f64>,
) -> Result<SphericalSolution, KinematicsError> {
    if !p.is_finite() {
        return Err(KinematicsError::NonFinite);
    }
    let v = geom.rcm - *p;
    let d = v.norm();
    if d <= DEGENERATE_DISTANCE {
        return Err(KinematicsError::DegenerateInput { distance: d });
    }
    let psi = (v.y / d).clamp(-1.0, 1.0).asin();
    let singular = psi.cos().abs() < SINGULAR_COS_PSI;
    let theta = if singular { theta_hint.unwrap_or(0.0) } else { v.x.atan2(v.z) };
    Ok(SphericalSolution { coords: SphericalCoords { theta, psi, ins: d }, singular })
}

/// Joint values for the given spherical coordinates (no limit check).
pub fn spherical_to_joints(s: &SphericalCoords, geom: &RobotGeometry) -> JointVector {
    JointVector {
        q1: s.theta,
        q2: geom.rail_radius * (s.psi + FRAC_PI_2),
        q3: geom.q3_at_rcm() + s.ins,
    }
}

/// Joint values for a tip position without checking limits.
pub fn inverse_geometric_unchecked(p: &Point3, geom: &RobotGeometry) -> Result<JointVector, KinematicsError> {
    let s = cartesian_to_spherical(p, geom)?;
    Ok(spherical_to_joints(&s.coords, geom))
}

/// Inverse geometric model. Out-of-limit solutions come back as
/// [`KinematicsError::OutOfWorkspace`] carrying the raw joint vector.
pub fn inverse_geometric(p: &Point3, geom: &RobotGeometry) -> Result<JointVector, KinematicsError> {
    let q = inverse_geometric_unchecked(p, geom)?;
    let report = validate_joints(&q, geom);
    if report.is_ok() {
        Ok(q)
    } else {
        Err(KinematicsError::OutOfWorkspace { joints: q, report })
    }
}

/// Perpendicular distance from `point` to the line through `a` and `b`.
pub fn point_line_distance(point: &Point3, a: &Point3, b: &Point3) -> Result<f64, KinematicsError> {
    let dir = *b - *a;
    let len = dir.norm();
    if len <= DEGENERATE_DISTANCE {
        return Err(KinematicsError::DegenerateInput { distance: len });
    }
    Ok((*point - *a).cross(&dir).norm() / len)
}

/// Distance from the RCM to the instrument axis through two probe tips.
pub fn probe_residual(tip_a: &Point3, tip_b: &Point3, geom: &RobotGeometry) -> Result<f64, KinematicsError> {
    point_line_distance(&geom.rcm, tip_a, tip_b)
}

/// Distance from the RCM to the instrument axis at `q`, probed with tips at
/// `q3` and `q3 + 1 mm`. Zero up to rounding for an exact model.
pub fn rcm_residual(q: &JointVector, geom: &RobotGeometry) -> Result<f64, KinematicsError> {
    if !q.is_finite() {
        return Err(KinematicsError::NonFinite);
    }
    let a = forward_geometric(q, geom);
    let b = forward_geometric(&q.with(Joint::Q3, q.q3 + RCM_PROBE_STEP), geom);
    probe_residual(&a, &b, geom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitStatus {
    Ok,
    BelowMin,
    AboveMax,
}

/// Per-joint limit status plus the clamped vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub status: PerJoint<LimitStatus>,
    pub clamped: JointVector,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.status.iter().all(|(_, s)| *s == LimitStatus::Ok)
    }

    pub fn violations(&self) -> impl Iterator<Item = (Joint, LimitStatus)> + '_ {
        self.status.iter().filter(|(_, s)| **s != LimitStatus::Ok).map(|(j, s)| (j, *s))
    }
}

pub fn validate_joints(q: &JointVector, geom: &RobotGeometry) -> ValidationReport {
    let mut clamped = *q;
    let status = PerJoint::from_fn(|j| {
        let lim = geom.limits[j];
        let v = q.get(j);
        clamped.set(j, lim.clamp(v));
        if v < lim.min {
            LimitStatus::BelowMin
        } else if v > lim.max {
            LimitStatus::AboveMax
        } else if v.is_nan() {
            // NaN compares false against both bounds
            LimitStatus::AboveMax
        } else {
            LimitStatus::Ok
        }
    });
    ValidationReport { status, clamped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn geom0() -> RobotGeometry {
        RobotGeometry { tool_offset: 0.0, ..Default::default() }
    }

    fn close(a: &Point3, b: &Point3, tol: f64) -> bool {
        a.distance(b) < tol
    }

    #[test]
    fn tip_at_rcm_when_fully_retracted_to_sphere_centre() {
        let g = RobotGeometry { rcm: Point3::new(10.0, -20.0, 5.0), ..Default::default() };
        for (q1, q2) in [(0.0, 0.0), (1.0, 300.0), (-2.5, 900.0)] {
            let e = forward_geometric(&JointVector::new(q1, q2, g.q3_at_rcm()), &g);
            assert_eq!(e, g.rcm);
        }
    }

    #[test]
    fn forward_axis_cases() {
        let g = geom0();
        let e = forward_geometric(&JointVector::new(0.0, 300.0 * PI / 2.0, 350.0), &g);
        assert!(close(&e, &Point3::new(0.0, 0.0, -50.0), 1e-12), "{e}");
        let e = forward_geometric(&JointVector::new(0.0, 300.0 * PI, 350.0), &g);
        assert!(close(&e, &Point3::new(0.0, -50.0, 0.0), 1e-12), "{e}");
    }

    #[test]
    fn spherical_axis_aligned() {
        let g = RobotGeometry { rcm: Point3::new(1.0, 2.0, 3.0), ..Default::default() };
        let s = cartesian_to_spherical(&(g.rcm - Point3::new(0.0, 0.0, 80.0)), &g).unwrap();
        assert!(!s.singular);
        assert_eq!(s.coords, SphericalCoords { theta: 0.0, psi: 0.0, ins: 80.0 });
    }

    #[test]
    fn spherical_singular_uses_tie_break() {
        let g = RobotGeometry::default();
        let p = g.rcm - Point3::new(0.0, 60.0, 0.0);
        let s = cartesian_to_spherical(&p, &g).unwrap();
        assert!(s.singular);
        assert_eq!(s.coords.theta, 0.0);
        assert!((s.coords.psi - PI / 2.0).abs() < 1e-15);
        assert_eq!(s.coords.ins, 60.0);
        let s = cartesian_to_spherical_hinted(&p, &g, Some(0.7)).unwrap();
        assert!(s.singular);
        assert_eq!(s.coords.theta, 0.7);
    }

    #[test]
    fn inverse_simple_case() {
        let g = geom0();
        let q = inverse_geometric(&Point3::new(0.0, 0.0, -50.0), &g).unwrap();
        assert_eq!(q.q1, 0.0);
        assert!((q.q2 - 150.0 * PI).abs() < 1e-12);
        assert_eq!(q.q3, 350.0);
    }

    #[test]
    fn inverse_at_rcm_is_degenerate() {
        let g = RobotGeometry::default();
        assert!(matches!(inverse_geometric(&g.rcm, &g), Err(KinematicsError::DegenerateInput { .. })));
        let near = g.rcm + Point3::new(0.0, 0.0, 5e-7);
        assert!(matches!(inverse_geometric(&near, &g), Err(KinematicsError::DegenerateInput { .. })));
    }

    #[test]
    fn inverse_reports_out_of_workspace_with_raw_joints() {
        let g = RobotGeometry::default();
        // ins = 400 puts q3 at 650 > 600
        let p = Point3::new(0.0, 0.0, -400.0);
        match inverse_geometric(&p, &g) {
            Err(KinematicsError::OutOfWorkspace { joints, report }) => {
                assert_eq!(joints.q3, 650.0);
                assert_eq!(report.status.q3, LimitStatus::AboveMax);
                assert_eq!(report.clamped.q3, 600.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        let g = RobotGeometry::default();
        assert_eq!(inverse_geometric(&Point3::new(f64::NAN, 0.0, 1.0), &g), Err(KinematicsError::NonFinite));
    }

    #[test]
    fn validate_joint_cases() {
        let g = RobotGeometry::default();
        let q = JointVector::new(0.1, 100.0, 300.0);
        let r = validate_joints(&q, &g);
        assert!(r.is_ok());
        assert_eq!(r.clamped, q);

        let r = validate_joints(&q.with(Joint::Q2, -5.0), &g);
        assert_eq!(r.status.q2, LimitStatus::BelowMin);
        assert_eq!(r.clamped.q2, 0.0);
        assert_eq!(r.violations().count(), 1);

        let r = validate_joints(&q.with(Joint::Q3, 601.0), &g);
        assert_eq!(r.status.q3, LimitStatus::AboveMax);
        assert_eq!(r.clamped.q3, 600.0);
    }

    #[test]
    fn residual_zero_for_exact_model_and_detects_broken_probe() {
        let g = RobotGeometry::default();
        let q = JointVector::new(0.4, 350.0, 420.0);
        assert!(rcm_residual(&q, &g).unwrap() < 1e-9);

        // Second probe taken with a perturbed q1: the "axis" no longer passes the RCM.
        let a = forward_geometric(&q, &g);
        let b = forward_geometric(&JointVector::new(0.45, 350.0, 421.0), &g);
        assert!(probe_residual(&a, &b, &g).unwrap() > 1.0);
    }

    #[test]
    fn residual_degenerate_probe() {
        let g = RobotGeometry::default();
        let p = Point3::new(1.0, 1.0, 1.0);
        assert!(matches!(probe_residual(&p, &p, &g), Err(KinematicsError::DegenerateInput { .. })));
    }

    #[test]
    fn insertion_depth_is_linear_in_q3() {
        let g = RobotGeometry::default();
        for q3 in [0.0, 100.0, 250.0, 251.5, 600.0] {
            let e = forward_geometric(&JointVector::new(-0.3, 123.0, q3), &g);
            let depth = e.distance(&g.rcm);
            assert!((depth - (q3 - g.q3_at_rcm()).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn q1_is_invisible_on_the_singular_ray() {
        let g = RobotGeometry::default();
        let q2 = g.rail_radius * PI;
        let e0 = forward_geometric(&JointVector::new(0.0, q2, 400.0), &g);
        let e1 = forward_geometric(&JointVector::new(2.0, q2, 400.0), &g);
        assert!(close(&e0, &e1, 1e-12));
    }
}
