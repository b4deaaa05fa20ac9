use rcm_core::control::registers::{joint_register, SETPOINT_BASE};
use rcm_core::control::{Command, Mode, RejectReason};
use rcm_core::{inverse_geometric, ActuationMode, ControlService, Joint, Point3, RobotGeometry, ServiceConfig};

const A: Point3 = Point3 { x: 243.1147, y: 172.3870, z: 105.8209 };
const B: Point3 = Point3 { x: 263.6415, y: 57.6293, z: -21.5508 };

fn home(svc: &mut ControlService) {
    assert!(svc.handle_command(1, &Command::Home { axes: Joint::ALL.to_vec() }).is_accepted());
    assert_eq!(svc.mode(), Mode::Homing);
    svc.run_until_idle(200_000);
    assert_eq!(svc.mode(), Mode::Ready);
    assert!(svc.plant_snapshot().all_homed());
}

fn move_to(svc: &mut ControlService, goal: Point3, mode: ActuationMode) -> u64 {
    let ack = svc.handle_command(2, &Command::MoveTo { goal, mode });
    assert!(ack.is_accepted(), "{ack:?}");
    let n = svc.run_until_idle(200_000);
    assert_eq!(svc.mode(), Mode::Ready);
    n
}

#[test]
fn move_before_homing_is_rejected() {
    let mut svc = ControlService::new(ServiceConfig::default());
    let ack = svc.handle_command(1, &Command::MoveTo { goal: B, mode: ActuationMode::Simultaneous });
    assert_eq!(ack.reason, Some(RejectReason::NotHomed));
    let ack = svc.handle_command(2, &Command::JogJoint { joint: Joint::Q2, delta: 1.0 });
    assert_eq!(ack.reason, Some(RejectReason::NotHomed));
}

#[test]
fn homing_references_every_axis_to_its_minimum() {
    let mut svc = ControlService::new(ServiceConfig::default());
    home(&mut svc);
    let g = RobotGeometry::default();
    let q = svc.frame().joints;
    for j in Joint::ALL {
        assert!((q.get(j) - g.limits[j].min).abs() < 0.01, "{j:?} at {}", q.get(j));
    }
}

#[test]
fn a_to_b_simultaneous_reaches_b() {
    let mut svc = ControlService::new(ServiceConfig::default());
    home(&mut svc);
    move_to(&mut svc, A, ActuationMode::Simultaneous);
    assert!(svc.frame().tip.distance(&A) < 0.01);
    let mut modes = Vec::new();
    assert!(svc.handle_command(3, &Command::MoveTo { goal: B, mode: ActuationMode::Simultaneous }).is_accepted());
    while svc.mode() != Mode::Ready {
        let f = svc.step();
        if modes.last() != Some(&f.mode) {
            modes.push(f.mode);
        }
    }
    assert_eq!(modes, vec![Mode::Moving, Mode::Inserting, Mode::Ready]);
    assert!(svc.frame().tip.distance(&B) < 0.01, "{}", svc.frame().tip);
    let q_b = inverse_geometric(&B, &RobotGeometry::default()).unwrap();
    assert!((svc.frame().joints.q2 - q_b.q2).abs() < 1e-3);
}

#[test]
fn completion_switches_to_ready_in_the_same_frame() {
    let mut svc = ControlService::new(ServiceConfig::default());
    home(&mut svc);
    let ack = svc.handle_command(2, &Command::MoveTo { goal: A, mode: ActuationMode::Sequential });
    assert!(ack.is_accepted());
    let mut last = svc.frame().clone();
    loop {
        let f = svc.step().clone();
        if f.mode == Mode::Ready {
            assert_eq!(last.mode, Mode::Inserting);
            assert!(f.tip.distance(&A) < 0.01);
            assert_eq!(f.progress, 0.0);
            break;
        }
        last = f;
    }
}

#[test]
fn limit_fault_mid_move_discards_plan() {
    let mut svc = ControlService::new(ServiceConfig::default());
    home(&mut svc);
    move_to(&mut svc, Point3::new(0.0, 0.0, -60.0), ActuationMode::Simultaneous);
    let ack = svc.handle_command(3, &Command::MoveTo { goal: Point3::new(0.0, 0.0, -200.0), mode: ActuationMode::Simultaneous });
    assert!(ack.is_accepted());
    while svc.mode() != Mode::Inserting {
        svc.step();
    }
    // a misplaced far sensor sits in the path of the insertion
    let q3 = svc.frame().joints.q3;
    svc.plant_mut().set_far_sensor_position(Joint::Q3, q3 + 5.0);
    for _ in 0..1000 {
        if svc.step().mode == Mode::Fault {
            break;
        }
    }
    assert_eq!(svc.mode(), Mode::Fault);
    assert!(svc.active_plan().is_none());
    let frozen = svc.frame().joints;
    assert_eq!(frozen.q3, q3 + 5.0);
    for _ in 0..50 {
        let f = svc.step();
        assert_eq!(f.joints, frozen);
    }
    assert_eq!(svc.registers().setpoints().q3, frozen.q3);
    let ack = svc.handle_command(4, &Command::JogJoint { joint: Joint::Q1, delta: 0.01 });
    assert_eq!(ack.reason, Some(RejectReason::Faulted));
    assert!(svc.handle_command(5, &Command::Reset).is_accepted());
    assert_eq!(svc.mode(), Mode::Ready);
}

#[test]
fn estop_zeroes_velocity_within_one_tick() {
    let mut svc = ControlService::new(ServiceConfig::default());
    home(&mut svc);
    let ack = svc.handle_command(2, &Command::MoveTo { goal: A, mode: ActuationMode::Simultaneous });
    assert!(ack.is_accepted());
    for _ in 0..200 {
        svc.step();
    }
    assert!(svc.frame().velocities().to_array().iter().any(|v| *v != 0.0));
    assert!(svc.handle_command(3, &Command::EStop).is_accepted());
    let f = svc.step();
    assert_eq!(f.mode, Mode::EStopped);
    assert!(f.velocities().to_array().iter().all(|v| *v == 0.0));
    let ack = svc.handle_command(4, &Command::MoveTo { goal: B, mode: ActuationMode::Simultaneous });
    assert_eq!(ack.reason, Some(RejectReason::EStopped));
}

#[test]
fn bypassing_setpoint_registers_does_not_move_q3() {
    let mut svc = ControlService::new(ServiceConfig::default());
    home(&mut svc);
    move_to(&mut svc, Point3::new(0.0, 20.0, -80.0), ActuationMode::Simultaneous);
    let q3 = svc.frame().joints.q3;
    let reg = joint_register(SETPOINT_BASE, Joint::Q3);
    let raw = ((q3 + 50.0) * 1e3).round() as i32 as u32;
    svc.write_registers(reg, &[(raw >> 16) as u16, raw as u16]).unwrap();
    assert!((svc.registers().setpoints().q3 - (q3 + 50.0)).abs() < 1e-3);
    for _ in 0..100 {
        svc.step();
        assert_eq!(svc.frame().joints.q3, q3);
    }
    assert!((svc.registers().setpoints().q3 - q3).abs() < 1e-3);
}

#[test]
fn heartbeat_advances_once_per_tick() {
    let mut svc = ControlService::new(ServiceConfig::default());
    let first = svc.registers().heartbeat();
    svc.step();
    assert_eq!(svc.registers().heartbeat(), first + 1);
    assert_eq!(svc.write_registers(30, &[1]), Err(rcm_core::control::RegisterError::IllegalValue));
}

#[test]
fn jog_at_limit_pins_without_fault() {
    let mut svc = ControlService::new(ServiceConfig::default());
    home(&mut svc);
    // q2 homes to its minimum; jogging further down stays there
    let ack = svc.handle_command(3, &Command::JogJoint { joint: Joint::Q2, delta: -5.0 });
    assert!(ack.is_accepted());
    svc.run_until_idle(10_000);
    assert_eq!(svc.mode(), Mode::Ready);
    assert!(svc.frame().joints.q2.abs() < 1e-3);
    assert!(!svc.plant_snapshot().any_fault());
    let ack = svc.handle_command(4, &Command::JogJoint { joint: Joint::Q2, delta: 5.0 });
    assert!(ack.is_accepted());
    svc.run_until_idle(10_000);
    assert!((svc.frame().joints.q2 - 5.0).abs() < 2e-3);
}

#[test]
fn cartesian_jog_and_insertion_jog() {
    let mut svc = ControlService::new(ServiceConfig::default());
    home(&mut svc);
    move_to(&mut svc, Point3::new(10.0, 10.0, -100.0), ActuationMode::Sequential);
    assert!(svc.is_aligned());
    let ack = svc.handle_command(3, &Command::JogJoint { joint: Joint::Q3, delta: 5.0 });
    assert!(ack.is_accepted(), "{ack:?}");
    assert_eq!(svc.mode(), Mode::Inserting);
    svc.run_until_idle(10_000);
    let ack = svc.handle_command(
        4,
        &Command::JogCartesian { axis: rcm_core::control::command::CartesianAxis::X, delta: 3.0 },
    );
    assert!(ack.is_accepted());
    let before = svc.frame().tip;
    svc.run_until_idle(10_000);
    let after = svc.frame().tip;
    assert!((after.x - before.x - 3.0).abs() < 0.01 && (after.y - before.y).abs() < 0.01);
    // changing orientation on its own invalidates alignment
    assert!(svc.handle_command(5, &Command::JogJoint { joint: Joint::Q1, delta: 0.05 }).is_accepted());
    svc.run_until_idle(10_000);
    assert!(!svc.is_aligned());
    let ack = svc.handle_command(6, &Command::JogJoint { joint: Joint::Q3, delta: 1.0 });
    assert_eq!(ack.reason, Some(RejectReason::AlignmentRequired));
}

#[test]
fn dead_home_sensor_faults_homing() {
    let mut svc = ControlService::new(ServiceConfig::default());
    svc.plant_mut().set_home_sensor_enabled(Joint::Q3, false);
    assert!(svc.handle_command(1, &Command::Home { axes: vec![Joint::Q3] }).is_accepted());
    svc.run_until_idle(400_000);
    assert_eq!(svc.mode(), Mode::Fault);
    assert!(svc.fault_detail().unwrap().contains("HomingTimeout"));
}

#[test]
fn reset_abandons_homing() {
    let mut svc = ControlService::new(ServiceConfig::default());
    assert!(svc.handle_command(1, &Command::Home { axes: Joint::ALL.to_vec() }).is_accepted());
    for _ in 0..500 {
        svc.step();
    }
    assert!(svc.handle_command(2, &Command::Reset).is_accepted());
    assert_eq!(svc.mode(), Mode::Init);
    let q = svc.frame().joints;
    for _ in 0..100 {
        assert_eq!(svc.step().joints, q);
    }
    assert!(!svc.plant_snapshot().all_homed());
}
