//! The supervisor: owns the plant and the register map, validates commands
//! against the interlocks, and executes motion plans phase by phase.

use crate::config::ServiceConfig;
use crate::geometry::{Joint, JointVector, Point3};
use crate::kinematics::{forward_geometric, inverse_geometric, KinematicsError};
use crate::plant::{register_deadband, PlantSnapshot, VirtualPlant};
use crate::trajectory::{plan_motion, plan_single_joint, ActuationMode, MotionPlan, TrajectoryError};

use super::command::{Ack, Command, CommandMessage, RejectReason};
use super::registers::{CommandWord, RegisterError, RegisterMap, StatusWord, COMMAND};
use super::telemetry::{Mode, TelemetryFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Goal {
    point: Point3,
    joints: JointVector,
}

#[derive(Debug, Clone, PartialEq)]
struct Execution {
    plan: MotionPlan,
    time: f64,
    phase: usize,
    /// Phase trajectory finished; waiting for the axes to settle.
    waiting: bool,
}

impl Execution {
    fn new(plan: MotionPlan) -> Self {
        Execution { plan, time: 0.0, phase: 0, waiting: false }
    }

    fn inserting(&self) -> bool {
        self.plan.phases.get(self.phase).is_some_and(|p| p.duration > 0.0 && p.moves(Joint::Q3))
    }

    fn progress(&self) -> f64 {
        let d = self.plan.duration();
        if d > 0.0 {
            (self.time / d).clamp(0.0, 1.0)
        } else {
            1.0
        }
    }
}

/// Deterministic control service. Everything advances through [`step`];
/// nothing depends on wall-clock time.
///
/// [`step`]: ControlService::step
#[derive(Debug, Clone)]
pub struct ControlService {
    config: ServiceConfig,
    dt: f64,
    plant: VirtualPlant,
    registers: RegisterMap,
    mode: Mode,
    exec: Option<Execution>,
    hold: JointVector,
    goal: Option<Goal>,
    aligned: bool,
    homing_axes: Vec<Joint>,
    snapshot: PlantSnapshot,
    frame: TelemetryFrame,
    fault_detail: Option<String>,
}

impl ControlService {
    pub fn new(config: ServiceConfig) -> Self {
        let plant = VirtualPlant::new(&config.plant_config());
        let snapshot = plant.snapshot();
        let hold = snapshot.positions();
        let mut svc = ControlService {
            dt: config.dt(),
            config,
            plant,
            registers: RegisterMap::new(),
            mode: Mode::Init,
            exec: None,
            hold,
            goal: None,
            aligned: false,
            homing_axes: Vec::new(),
            frame: placeholder_frame(&snapshot),
            snapshot,
            fault_detail: None,
        };
        svc.registers.set_setpoints(&hold);
        svc.publish();
        svc
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_aligned(&self) -> bool {
        self.aligned
    }

    pub fn is_idle(&self) -> bool {
        !self.mode.is_busy()
    }

    pub fn registers(&self) -> &RegisterMap {
        &self.registers
    }

    pub fn plant_snapshot(&self) -> &PlantSnapshot {
        &self.snapshot
    }

    /// Latest telemetry frame.
    pub fn frame(&self) -> &TelemetryFrame {
        &self.frame
    }

    pub fn fault_detail(&self) -> Option<&str> {
        self.fault_detail.as_deref()
    }

    pub fn active_plan(&self) -> Option<&MotionPlan> {
        self.exec.as_ref().map(|e| &e.plan)
    }

    /// Direct plant access for fault injection in simulation and tests.
    pub fn plant_mut(&mut self) -> &mut VirtualPlant {
        &mut self.plant
    }

    /// Re-reads the plant after direct manipulation through [`plant_mut`].
    ///
    /// [`plant_mut`]: ControlService::plant_mut
    pub fn resync(&mut self) {
        self.snapshot = self.plant.snapshot();
        if self.exec.is_none() && !self.mode.is_busy() {
            self.hold = self.snapshot.positions();
        }
        if self.mode == Mode::Init && self.snapshot.all_homed() {
            self.mode = Mode::Ready;
        }
        self.publish();
    }

    /// Handles one wire message; always yields exactly one ack.
    pub fn handle_message(&mut self, msg: &CommandMessage) -> Ack {
        match Command::parse(msg) {
            Ok(cmd) => self.handle_command(msg.seq, &cmd),
            Err(e) => Ack::rejected(msg.seq, RejectReason::BadArgument).with_detail(e),
        }
    }

    pub fn handle_command(&mut self, seq: u64, cmd: &Command) -> Ack {
        let ack = self.dispatch(seq, cmd);
        self.publish();
        ack
    }

    fn dispatch(&mut self, seq: u64, cmd: &Command) -> Ack {
        let reject = |r: RejectReason| Ack::rejected(seq, r);
        match cmd {
            Command::Query => return Ack::accepted(seq),
            Command::EStop => {
                self.plant.estop();
                self.abandon();
                self.mode = Mode::EStopped;
                return Ack::accepted(seq);
            }
            Command::Reset => {
                self.plant.halt();
                self.plant.reset();
                self.abandon();
                self.fault_detail = None;
                self.mode = if self.snapshot.all_homed() { Mode::Ready } else { Mode::Init };
                return Ack::accepted(seq);
            }
            _ => {}
        }
        match self.mode {
            Mode::EStopped => return reject(RejectReason::EStopped),
            Mode::Fault => return reject(RejectReason::Faulted),
            _ => {}
        }
        if let Command::SetInstrument(update) = cmd {
            let target = update.apply(self.plant.instrument_target());
            return match self.plant.set_instrument(target) {
                Ok(()) => Ack::accepted(seq),
                Err(_) => reject(RejectReason::EStopped),
            };
        }
        if self.mode.is_busy() {
            return reject(RejectReason::Busy);
        }
        if let Command::Home { axes } = cmd {
            for &j in axes {
                if self.plant.start_homing(j).is_err() {
                    self.plant.halt();
                    return reject(RejectReason::Faulted);
                }
            }
            self.homing_axes = axes.clone();
            self.goal = None;
            self.mode = Mode::Homing;
            self.snapshot = self.plant.snapshot();
            return Ack::accepted(seq);
        }
        if !self.snapshot.all_homed() {
            return reject(RejectReason::NotHomed);
        }
        let sup = &self.config.supervisor;
        match *cmd {
            Command::JogJoint { joint, delta } => {
                if !(delta.abs() <= sup.jog_max_step[joint]) {
                    return reject(RejectReason::BadArgument).with_detail("jog step too large");
                }
                if joint == Joint::Q3 && !self.aligned {
                    return reject(RejectReason::AlignmentRequired);
                }
                let start = self.snapshot.positions();
                let target = self.config.geometry.limits[joint].clamp(start.get(joint) + delta);
                match plan_single_joint(&start, joint, target, &self.config.geometry) {
                    Ok(plan) => {
                        self.start(plan);
                        Ack::accepted(seq)
                    }
                    Err(e) => reject(RejectReason::BadArgument).with_detail(e.to_string()),
                }
            }
            Command::JogCartesian { axis, delta } => {
                if !(delta.abs() <= sup.jog_cartesian_max_step) {
                    return reject(RejectReason::BadArgument).with_detail("jog step too large");
                }
                let goal = self.frame.tip + axis.unit() * delta;
                self.begin_move(seq, goal, ActuationMode::Simultaneous)
            }
            Command::MoveTo { goal, mode } => self.begin_move(seq, goal, mode),
            _ => unreachable!("handled above"),
        }
    }

    fn begin_move(&mut self, seq: u64, goal: Point3, mode: ActuationMode) -> Ack {
        let geom = &self.config.geometry;
        let q_goal = match inverse_geometric(&goal, geom) {
            Ok(q) => q,
            Err(KinematicsError::OutOfWorkspace { .. }) => {
                return Ack::rejected(seq, RejectReason::OutOfWorkspace)
            }
            Err(e) => return Ack::rejected(seq, RejectReason::BadArgument).with_detail(e.to_string()),
        };
        let start = self.snapshot.positions();
        match plan_motion(&start, &q_goal, mode, geom) {
            Ok(plan) => {
                self.goal = Some(Goal { point: goal, joints: q_goal });
                self.aligned = self.compute_alignment(&self.snapshot);
                self.start(plan);
                Ack::accepted(seq)
            }
            Err(TrajectoryError::OutOfWorkspace { .. }) => Ack::rejected(seq, RejectReason::OutOfWorkspace),
            Err(e) => Ack::rejected(seq, RejectReason::BadArgument).with_detail(e.to_string()),
        }
    }

    fn start(&mut self, plan: MotionPlan) {
        let exec = Execution::new(plan);
        self.mode = if exec.inserting() { Mode::Inserting } else { Mode::Moving };
        self.exec = Some(exec);
    }

    /// Drops any running plan or homing sequence and holds position.
    fn abandon(&mut self) {
        self.exec = None;
        self.homing_axes.clear();
        self.snapshot = self.plant.snapshot();
        self.hold = self.snapshot.positions();
    }

    /// One external register write transaction. A command word takes effect
    /// immediately.
    pub fn write_registers(&mut self, addr: u16, values: &[u16]) -> Result<Option<Ack>, RegisterError> {
        self.registers.write(addr, values)?;
        let end = addr as usize + values.len();
        if (addr as usize..end).contains(&(COMMAND as usize)) {
            if let Some(word) = self.registers.take_command() {
                let cmd = match word {
                    CommandWord::HomeAll => Command::Home { axes: Joint::ALL.to_vec() },
                    CommandWord::EStop => Command::EStop,
                    CommandWord::Reset => Command::Reset,
                };
                return Ok(Some(self.handle_command(0, &cmd)));
            }
        }
        Ok(None)
    }

    /// Advances the whole system by one control tick.
    pub fn step(&mut self) -> &TelemetryFrame {
        for &j in &self.homing_axes {
            self.hold.set(j, self.snapshot.axes[j].position);
        }
        let target = match &mut self.exec {
            Some(e) => {
                if !e.waiting {
                    let end = e.plan.phases[e.phase].end_time();
                    e.time = (e.time + self.dt).min(end);
                    e.waiting = e.time >= end;
                }
                e.plan.positions_at(e.time)
            }
            None => self.hold,
        };
        let setpoints = self.registers.set_setpoints(&target);
        for j in Joint::ALL {
            self.plant.set_setpoint(j, setpoints.get(j));
        }
        self.snapshot = self.plant.tick(self.dt);

        if self.snapshot.any_fault() && !matches!(self.mode, Mode::Fault | Mode::EStopped) {
            let detail = self
                .snapshot
                .axes
                .iter()
                .find_map(|(j, a)| a.fault.map(|f| format!("{} {f:?}", j.axis_name())));
            self.enter_fault(detail.unwrap_or_default());
        } else if self.mode == Mode::Homing {
            if self.homing_axes.iter().all(|&j| self.snapshot.axes[j].homing.is_none()) {
                self.homing_axes.clear();
                self.hold = self.snapshot.positions();
                self.mode = if self.snapshot.all_homed() { Mode::Ready } else { Mode::Init };
            }
        } else if self.exec.as_ref().is_some_and(|e| e.waiting) && self.settled(&setpoints) {
            self.advance_phase();
        }
        self.aligned = self.compute_alignment(&self.snapshot);
        self.registers.bump_heartbeat();
        self.publish();
        &self.frame
    }

    fn settled(&self, setpoints: &JointVector) -> bool {
        self.snapshot.axes.iter().all(|(j, a)| {
            a.velocity == 0.0 && (a.position - setpoints.get(j)).abs() <= register_deadband(j)
        })
    }

    fn advance_phase(&mut self) {
        let Some(mut exec) = self.exec.take() else { return };
        loop {
            exec.phase += 1;
            let Some(phase) = exec.plan.phases.get(exec.phase) else {
                self.hold = exec.plan.end;
                self.mode = Mode::Ready;
                return;
            };
            exec.time = phase.start_time;
            exec.waiting = false;
            if phase.duration <= 0.0 {
                continue;
            }
            if phase.moves(Joint::Q3) && !self.compute_alignment(&self.snapshot) {
                self.enter_fault("alignment lost before insertion".to_string());
                return;
            }
            break;
        }
        self.mode = if exec.inserting() { Mode::Inserting } else { Mode::Moving };
        self.exec = Some(exec);
    }

    fn enter_fault(&mut self, detail: String) {
        self.plant.halt();
        self.abandon();
        self.fault_detail = Some(detail);
        self.mode = Mode::Fault;
    }

    /// True when inserting to the goal depth with the present orientation
    /// would put the tip on the RCM→goal ray.
    fn compute_alignment(&self, snap: &PlantSnapshot) -> bool {
        let Some(goal) = self.goal else { return false };
        if snap.axes.q1.velocity != 0.0 || snap.axes.q2.velocity != 0.0 {
            return false;
        }
        let geom = &self.config.geometry;
        let q = snap.positions().with(Joint::Q3, goal.joints.q3);
        let probe = forward_geometric(&q, geom) - geom.rcm;
        let ray = goal.point - geom.rcm;
        let len = ray.norm();
        let dist = if probe.dot(&ray) < 0.0 { probe.norm() } else { probe.cross(&ray).norm() / len };
        dist <= self.config.supervisor.alignment_tolerance
    }

    fn publish_status(&mut self) {
        let snap = &self.snapshot;
        self.registers.set_status(StatusWord {
            homed_all: snap.all_homed(),
            fault_any: snap.any_fault(),
            estop: snap.estopped,
            aligned: self.aligned,
            mode_code: self.mode.code(),
        });
        self.frame.mode = self.mode;
        self.frame.aligned = self.aligned;
        self.frame.progress = self.exec.as_ref().map_or(0.0, Execution::progress);
        self.frame.goal = self.goal.map(|g| g.point);
    }

    fn publish(&mut self) {
        let snap = &self.snapshot;
        let positions = snap.positions();
        let velocities = JointVector::new(snap.axes.q1.velocity, snap.axes.q2.velocity, snap.axes.q3.velocity);
        self.registers.set_feedback(&positions, &velocities);
        self.frame = TelemetryFrame {
            tick: snap.tick,
            time: snap.tick as f64 * self.dt,
            joints: positions,
            tip: forward_geometric(&positions, &self.config.geometry),
            axes: snap.axes,
            mode: self.mode,
            aligned: self.aligned,
            progress: 0.0,
            goal: None,
            instrument: snap.instrument,
        };
        self.publish_status();
    }

    /// Steps until no motion or homing is running, at most `max_ticks` times.
    /// Returns the number of ticks taken.
    pub fn run_until_idle(&mut self, max_ticks: u64) -> u64 {
        let mut n = 0;
        while self.mode.is_busy() && n < max_ticks {
            self.step();
            n += 1;
        }
        n
    }
}

fn placeholder_frame(snap: &PlantSnapshot) -> TelemetryFrame {
    TelemetryFrame {
        tick: snap.tick,
        time: 0.0,
        joints: snap.positions(),
        tip: Point3::default(),
        axes: snap.axes,
        mode: Mode::Init,
        aligned: false,
        progress: 0.0,
        goal: None,
        instrument: snap.instrument,
    }
}
