//! Kinematic twin of the physical level: three axes (M1, M2, M3) with
//! encoders, a home and a far-limit proximity sensor each, and the four
//! instrument channels, all advanced by a fixed control tick.
//!
//! The plant is a single-owner state machine. [`VirtualPlant::tick`] returns
//! an immutable [`PlantSnapshot`] that observers may share freely.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Joint, JointVector, MotionCaps, PerJoint, RobotGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisFault {
    /// The axis overran one of its proximity sensors while moving toward it.
    LimitFault,
    /// The home sensor never triggered within the homing travel budget.
    HomingTimeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomingStage {
    /// Moving toward the home sensor.
    Seek,
    /// Reversing slowly until the sensor releases.
    Backoff,
    /// Sensor edge latched; stopping before the position is re-referenced.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("plant is emergency-stopped")]
    EStopped,
    #[error("axis {0} is faulted")]
    Faulted(Joint),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisConfig {
    pub caps: MotionCaps,
    /// Encoder counts per joint unit.
    pub encoder_resolution: f64,
    /// Trigger position of the home sensor (the joint minimum).
    pub home_position: f64,
    /// Trigger position of the far-limit sensor (the joint maximum).
    pub far_limit: f64,
    /// Homing seek speed as a fraction of `v_max`.
    pub seek_fraction: f64,
    /// Homing backoff speed as a fraction of `v_max`.
    pub backoff_fraction: f64,
    /// Maximum travel while seeking before giving up.
    pub travel_budget: f64,
    /// Setpoints closer than this to a resting axis are ignored.
    pub deadband: f64,
}

/// Normalised instrument actuator positions, each in [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InstrumentChannels {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
    pub grasp: f64,
}

impl InstrumentChannels {
    pub fn to_array(self) -> [f64; 4] {
        [self.pitch, self.yaw, self.roll, self.grasp]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        InstrumentChannels { pitch: v[0], yaw: v[1], roll: v[2], grasp: v[3] }
    }

    pub fn clamped(self) -> Self {
        Self::from_array(self.to_array().map(|v| v.clamp(-1.0, 1.0)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub axes: PerJoint<AxisConfig>,
    /// Instrument channel slew limit (full-scale units per second).
    pub instrument_slew: f64,
    /// Power-up pose.
    pub initial: JointVector,
}

impl PlantConfig {
    /// Default plant settings around the given geometry.
    pub fn from_geometry(geom: &RobotGeometry) -> Self {
        crate::config::ServiceConfig { geometry: *geom, ..Default::default() }.plant_config()
    }
}

/// Half of the register resolution (1 µrad for q1, 1 µm for q2 and q3).
pub fn register_deadband(joint: Joint) -> f64 {
    match joint {
        Joint::Q1 => 0.5e-6,
        Joint::Q2 | Joint::Q3 => 0.5e-3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSnapshot {
    pub position: f64,
    pub velocity: f64,
    pub setpoint: f64,
    pub encoder: i64,
    pub home_sensor: bool,
    pub far_sensor: bool,
    pub homed: bool,
    pub fault: Option<AxisFault>,
    pub homing: Option<HomingStage>,
}

impl AxisSnapshot {
    pub fn is_idle(&self) -> bool {
        self.velocity == 0.0 && self.homing.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantSnapshot {
    pub tick: u64,
    pub axes: PerJoint<AxisSnapshot>,
    pub instrument: InstrumentChannels,
    pub estopped: bool,
}

impl PlantSnapshot {
    pub fn positions(&self) -> JointVector {
        JointVector::new(self.axes.q1.position, self.axes.q2.position, self.axes.q3.position)
    }

    pub fn all_homed(&self) -> bool {
        self.axes.iter().all(|(_, a)| a.homed)
    }

    pub fn any_fault(&self) -> bool {
        self.axes.iter().any(|(_, a)| a.fault.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Homing {
    Seek { traveled: f64 },
    Backoff,
    Zero { latch: f64 },
}

impl Homing {
    fn stage(&self) -> HomingStage {
        match self {
            Homing::Seek { .. } => HomingStage::Seek,
            Homing::Backoff => HomingStage::Backoff,
            Homing::Zero { .. } => HomingStage::Zero,
        }
    }
}

/// Largest speed from which a rest-to-rest stop within `distance` is still
/// possible under semi-implicit Euler integration with per-tick velocity
/// changes of at most `a·dt`.
///
/// With `v = (n + f)·a·dt` the distance covered while braking to rest,
/// including this tick, is `a·dt²·((n + 1)·f + n(n + 1)/2)`; this inverts it.
pub fn stopping_speed(distance: f64, a_max: f64, dt: f64) -> f64 {
    let quantum = a_max * dt * dt;
    let e = distance / quantum;
    let mut n = (((8.0 * e + 1.0).sqrt() - 1.0) / 2.0).floor();
    // sqrt rounding can put n one off near triangular numbers
    while n > 0.0 && n * (n + 1.0) / 2.0 > e {
        n -= 1.0;
    }
    while (n + 1.0) * (n + 2.0) / 2.0 <= e {
        n += 1.0;
    }
    let f = (e - n * (n + 1.0) / 2.0) / (n + 1.0);
    (n + f) * a_max * dt
}

fn approach(v: f64, target: f64, max_step: f64) -> f64 {
    target.clamp(v - max_step, v + max_step)
}

#[derive(Debug, Clone, PartialEq)]
struct Axis {
    cfg: AxisConfig,
    position: f64,
    velocity: f64,
    setpoint: f64,
    homed: bool,
    fault: Option<AxisFault>,
    homing: Option<Homing>,
    home_sensor_enabled: bool,
}

impl Axis {
    fn new(cfg: AxisConfig, position: f64) -> Self {
        Axis {
            cfg,
            position,
            velocity: 0.0,
            setpoint: position,
            homed: false,
            fault: None,
            homing: None,
            home_sensor_enabled: true,
        }
    }

    fn home_sensor(&self) -> bool {
        self.home_sensor_enabled && self.position <= self.cfg.home_position
    }

    fn far_sensor(&self) -> bool {
        self.position >= self.cfg.far_limit
    }

    fn encoder(&self) -> i64 {
        (self.position * self.cfg.encoder_resolution).round() as i64
    }

    fn halt(&mut self) {
        self.velocity = 0.0;
        self.setpoint = self.position;
    }

    fn snapshot(&self) -> AxisSnapshot {
        AxisSnapshot {
            position: self.position,
            velocity: self.velocity,
            setpoint: self.setpoint,
            encoder: self.encoder(),
            home_sensor: self.home_sensor(),
            far_sensor: self.far_sensor(),
            homed: self.homed,
            fault: self.fault,
            homing: self.homing.map(|h| h.stage()),
        }
    }

    fn tick(&mut self, dt: f64) {
        if self.fault.is_some() {
            self.velocity = 0.0;
            return;
        }
        match self.homing {
            Some(h) => self.tick_homing(h, dt),
            None => self.tick_tracking(dt),
        }
        self.check_limits();
    }

    fn tick_tracking(&mut self, dt: f64) {
        let MotionCaps { v_max, a_max } = self.cfg.caps;
        let error = self.setpoint - self.position;
        if self.velocity == 0.0 && error.abs() <= self.cfg.deadband {
            return;
        }
        let cap = stopping_speed(error.abs(), a_max, dt).min(v_max);
        let desired = cap.copysign(error);
        let v = approach(self.velocity, desired, a_max * dt).clamp(-v_max, v_max);
        // final approach: land exactly on the setpoint
        if error.abs() <= a_max * dt * dt && v == desired {
            self.velocity = error / dt;
            self.position = self.setpoint;
        } else {
            self.velocity = v;
            self.position += v * dt;
        }
    }

    fn tick_homing(&mut self, stage: Homing, dt: f64) {
        let MotionCaps { v_max, a_max } = self.cfg.caps;
        let step = a_max * dt;
        match stage {
            Homing::Seek { traveled } => {
                if self.home_sensor() {
                    self.homing = Some(Homing::Backoff);
                    return self.tick_homing(Homing::Backoff, dt);
                }
                if traveled > self.cfg.travel_budget {
                    self.fault = Some(AxisFault::HomingTimeout);
                    self.homing = None;
                    self.halt();
                    return;
                }
                self.velocity = approach(self.velocity, -self.cfg.seek_fraction * v_max, step);
                self.position += self.velocity * dt;
                self.homing = Some(Homing::Seek { traveled: traveled + (self.velocity * dt).abs() });
            }
            Homing::Backoff => {
                self.velocity = approach(self.velocity, self.cfg.backoff_fraction * v_max, step);
                self.position += self.velocity * dt;
                if self.velocity > 0.0 && !self.home_sensor() {
                    self.homing = Some(Homing::Zero { latch: self.position });
                }
            }
            Homing::Zero { latch } => {
                self.velocity = approach(self.velocity, 0.0, step);
                self.position += self.velocity * dt;
                if self.velocity == 0.0 {
                    // re-reference so the latched sensor edge reads as the home position
                    self.position = self.cfg.home_position + (self.position - latch);
                    self.setpoint = self.position;
                    self.homed = true;
                    self.homing = None;
                }
            }
        }
    }

    fn check_limits(&mut self) {
        if self.homing.is_some() {
            // overrunning the home sensor is expected while homing
            if self.far_sensor() && self.velocity > 0.0 && self.position > self.cfg.far_limit {
                self.trip(self.cfg.far_limit);
            }
            return;
        }
        if self.velocity > 0.0 && self.position > self.cfg.far_limit {
            self.trip(self.cfg.far_limit);
        } else if self.velocity < 0.0 && self.home_sensor_enabled && self.position < self.cfg.home_position {
            self.trip(self.cfg.home_position);
        }
    }

    fn trip(&mut self, at: f64) {
        self.position = at;
        self.fault = Some(AxisFault::LimitFault);
        self.homing = None;
        self.halt();
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Instrument {
    current: [f64; 4],
    target: [f64; 4],
    slew: f64,
}

impl Instrument {
    fn tick(&mut self, dt: f64) {
        let step = self.slew * dt;
        for (c, t) in self.current.iter_mut().zip(self.target) {
            *c = approach(*c, t, step).clamp(-1.0, 1.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualPlant {
    axes: PerJoint<Axis>,
    instrument: Instrument,
    estopped: bool,
    tick: u64,
}

impl VirtualPlant {
    pub fn new(config: &PlantConfig) -> Self {
        VirtualPlant {
            axes: PerJoint::from_fn(|j| Axis::new(config.axes[j], config.initial.get(j))),
            instrument: Instrument { current: [0.0; 4], target: [0.0; 4], slew: config.instrument_slew },
            estopped: false,
            tick: 0,
        }
    }

    pub fn is_estopped(&self) -> bool {
        self.estopped
    }

    /// Sets the tracking target. Ignored (returns false) while e-stopped,
    /// faulted or homing.
    pub fn set_setpoint(&mut self, joint: Joint, value: f64) -> bool {
        let axis = &mut self.axes[joint];
        if self.estopped || axis.fault.is_some() || axis.homing.is_some() || !value.is_finite() {
            return false;
        }
        axis.setpoint = value;
        true
    }

    pub fn start_homing(&mut self, joint: Joint) -> Result<(), PlantError> {
        if self.estopped {
            return Err(PlantError::EStopped);
        }
        let axis = &mut self.axes[joint];
        if axis.fault.is_some() {
            return Err(PlantError::Faulted(joint));
        }
        axis.homed = false;
        axis.homing = Some(Homing::Seek { traveled: 0.0 });
        Ok(())
    }

    /// Zeroes every velocity immediately and freezes the setpoints.
    pub fn estop(&mut self) {
        self.estopped = true;
        for j in Joint::ALL {
            let axis = &mut self.axes[j];
            axis.homing = None;
            axis.halt();
        }
        self.instrument.target = self.instrument.current;
    }

    /// Leaves the e-stop state and clears axis faults.
    pub fn reset(&mut self) {
        self.estopped = false;
        for j in Joint::ALL {
            let axis = &mut self.axes[j];
            axis.fault = None;
            axis.halt();
        }
    }

    /// Quick stop used by the supervisor on faults: every axis stops where it
    /// is and any homing sequence is abandoned. Faults stay latched.
    pub fn halt(&mut self) {
        for j in Joint::ALL {
            let axis = &mut self.axes[j];
            axis.homing = None;
            axis.halt();
        }
    }

    pub fn instrument_target(&self) -> InstrumentChannels {
        InstrumentChannels::from_array(self.instrument.target)
    }

    pub fn set_instrument(&mut self, target: InstrumentChannels) -> Result<(), PlantError> {
        if self.estopped {
            return Err(PlantError::EStopped);
        }
        self.instrument.target = target.clamped().to_array();
        Ok(())
    }

    /// Fault injection: a dead home sensor never reports.
    pub fn set_home_sensor_enabled(&mut self, joint: Joint, enabled: bool) {
        self.axes[joint].home_sensor_enabled = enabled;
    }

    /// Fault injection: moves the far-limit sensor's trigger position.
    pub fn set_far_sensor_position(&mut self, joint: Joint, position: f64) {
        self.axes[joint].cfg.far_limit = position;
    }

    /// Fault injection: teleports an axis (test setup only).
    pub fn force_position(&mut self, joint: Joint, position: f64) {
        let axis = &mut self.axes[joint];
        axis.position = position;
        axis.velocity = 0.0;
        axis.setpoint = position;
    }

    /// Marks an axis homed without running the homing sequence (test setup only).
    pub fn force_homed(&mut self, joint: Joint) {
        self.axes[joint].homed = true;
    }

    /// Advances the plant by one control tick.
    pub fn tick(&mut self, dt: f64) -> PlantSnapshot {
        debug_assert!(dt > 0.0);
        self.tick += 1;
        if !self.estopped {
            for j in Joint::ALL {
                self.axes[j].tick(dt);
            }
            self.instrument.tick(dt);
        }
        self.snapshot()
    }

    pub fn snapshot(&self) -> PlantSnapshot {
        PlantSnapshot {
            tick: self.tick,
            axes: self.axes.map(|_, a| a.snapshot()),
            instrument: InstrumentChannels::from_array(self.instrument.current),
            estopped: self.estopped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 0.004;

    fn plant() -> (PlantConfig, VirtualPlant) {
        let cfg = PlantConfig::from_geometry(&RobotGeometry::default());
        let p = VirtualPlant::new(&cfg);
        (cfg, p)
    }

    #[test]
    fn stopping_speed_small_distances_land_in_one_tick() {
        let v = stopping_speed(0.5 * 60.0 * DT * DT, 60.0, DT);
        assert!((v * DT - 0.5 * 60.0 * DT * DT).abs() < 1e-15);
        assert_eq!(stopping_speed(0.0, 60.0, DT), 0.0);
    }

    #[test]
    fn stopping_speed_matches_brute_force_braking() {
        // brute force: brake from v at a·dt per tick, count distance
        let (a, dt) = (60.0, DT);
        for k in [1.0, 3.0, 7.5, 20.25, 100.0] {
            let v0 = k * a * dt;
            let mut v = v0;
            let mut d = 0.0;
            while v > 0.0 {
                d += v * dt;
                v -= a * dt;
            }
            let got = stopping_speed(d, a, dt);
            assert!((got - v0).abs() < 1e-9, "k={k}: {got} vs {v0}");
        }
    }

    #[test]
    fn idle_plant_only_advances_tick() {
        let (_, mut p) = plant();
        let before = p.snapshot();
        let after = p.tick(DT);
        assert_eq!(after.tick, before.tick + 1);
        assert_eq!(after.axes, before.axes);
    }

    #[test]
    fn setpoint_beyond_far_limit_faults_at_sensor() {
        let (cfg, mut p) = plant();
        p.force_position(Joint::Q3, 599.0);
        p.set_setpoint(Joint::Q3, 650.0);
        let mut snap = p.snapshot();
        for _ in 0..1000 {
            snap = p.tick(DT);
            if snap.axes.q3.fault.is_some() {
                break;
            }
        }
        let a = snap.axes.q3;
        assert_eq!(a.fault, Some(AxisFault::LimitFault));
        assert_eq!(a.position, cfg.axes.q3.far_limit);
        assert_eq!(a.velocity, 0.0);
        assert!(a.far_sensor);
    }

    #[test]
    fn arriving_exactly_at_the_limit_does_not_fault() {
        let (cfg, mut p) = plant();
        p.force_position(Joint::Q3, 590.0);
        p.set_setpoint(Joint::Q3, cfg.axes.q3.far_limit);
        for _ in 0..2000 {
            p.tick(DT);
        }
        let a = p.snapshot().axes.q3;
        assert_eq!(a.fault, None);
        assert_eq!(a.position, 600.0);
    }

    #[test]
    fn estop_zeroes_velocity_immediately() {
        let (_, mut p) = plant();
        p.set_setpoint(Joint::Q3, 400.0);
        for _ in 0..500 {
            p.tick(DT);
        }
        assert!(p.snapshot().axes.q3.velocity > 0.0);
        p.estop();
        let s = p.tick(DT);
        assert!(s.estopped);
        assert!(s.axes.iter().all(|(_, a)| a.velocity == 0.0));
        let frozen = s.positions();
        assert!(!p.set_setpoint(Joint::Q3, 500.0));
        for _ in 0..10 {
            assert_eq!(p.tick(DT).positions(), frozen);
        }
        p.reset();
        assert!(!p.snapshot().estopped);
        assert_eq!(p.tick(DT).positions(), frozen);
    }

    #[test]
    fn estop_when_idle_keeps_positions() {
        let (_, mut p) = plant();
        let before = p.snapshot().positions();
        p.estop();
        let s = p.tick(DT);
        assert!(s.estopped);
        assert_eq!(s.positions(), before);
    }

    #[test]
    fn homing_from_the_sensor_backs_off_and_zeroes() {
        let (cfg, mut p) = plant();
        p.force_position(Joint::Q2, cfg.axes.q2.home_position - 0.2);
        p.start_homing(Joint::Q2).unwrap();
        let mut stages = Vec::new();
        for _ in 0..10_000 {
            let s = p.tick(DT).axes.q2;
            if let Some(st) = s.homing {
                if stages.last() != Some(&st) {
                    stages.push(st);
                }
            }
            if s.homed {
                break;
            }
        }
        assert_eq!(stages, vec![HomingStage::Backoff, HomingStage::Zero]);
        let a = p.snapshot().axes.q2;
        assert!(a.homed);
        assert_eq!(a.velocity, 0.0);
        assert!((a.position - cfg.axes.q2.home_position).abs() < cfg.axes.q2.caps.v_max * DT);
    }

    #[test]
    fn dead_home_sensor_times_out() {
        let (_, mut p) = plant();
        p.set_home_sensor_enabled(Joint::Q1, false);
        p.start_homing(Joint::Q1).unwrap();
        let mut fault = None;
        for _ in 0..1_000_000 {
            let a = p.tick(DT).axes.q1;
            if a.fault.is_some() {
                fault = a.fault;
                break;
            }
        }
        assert_eq!(fault, Some(AxisFault::HomingTimeout));
        assert!(!p.snapshot().axes.q1.homed);
        assert_eq!(p.start_homing(Joint::Q1), Err(PlantError::Faulted(Joint::Q1)));
    }

    #[test]
    fn instrument_slews_and_clamps() {
        let (_, mut p) = plant();
        p.set_instrument(InstrumentChannels { pitch: 5.0, yaw: -0.5, roll: 0.0, grasp: 1.0 }).unwrap();
        let s = p.tick(DT);
        assert!((s.instrument.pitch - DT).abs() < 1e-15);
        assert!((s.instrument.yaw + DT).abs() < 1e-15);
        for _ in 0..1000 {
            p.tick(DT);
        }
        let s = p.snapshot().instrument;
        assert_eq!(s.pitch, 1.0);
        assert_eq!(s.yaw, -0.5);
        assert_eq!(s.grasp, 1.0);
    }
}
