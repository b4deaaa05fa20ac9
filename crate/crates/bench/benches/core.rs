use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rcm_core::{
    forward_geometric, inverse_geometric, plan_motion, sample, ActuationMode, CommandMessage, ControlService,
    JointVector, Point3, RobotGeometry, ServiceConfig,
};

const A: Point3 = Point3 { x: 243.1147, y: 172.3870, z: 105.8209 };
const B: Point3 = Point3 { x: 263.6415, y: 57.6293, z: -21.5508 };

fn kinematics(c: &mut Criterion) {
    let g = RobotGeometry::default();
    let q = JointVector::new(-1.2, 380.0, 480.0);
    c.bench_function("fk", |b| b.iter(|| forward_geometric(black_box(&q), &g)));
    c.bench_function("ik", |b| b.iter(|| inverse_geometric(black_box(&A), &g)));
}

fn planning(c: &mut Criterion) {
    let g = RobotGeometry::default();
    let qa = inverse_geometric(&A, &g).unwrap();
    let qb = inverse_geometric(&B, &g).unwrap();
    for mode in [ActuationMode::Sequential, ActuationMode::Simultaneous] {
        c.bench_function(&format!("plan_{mode}"), |b| b.iter(|| plan_motion(black_box(&qa), &qb, mode, &g)));
    }
    let plan = plan_motion(&qa, &qb, ActuationMode::Simultaneous, &g).unwrap();
    c.bench_function("sample_4ms", |b| b.iter(|| sample(black_box(&plan), 0.004)));
}

fn control_tick(c: &mut Criterion) {
    let mut svc = ControlService::new(ServiceConfig::default());
    svc.handle_message(&CommandMessage::new(1, "home", serde_json::json!({})));
    svc.run_until_idle(1_000_000);
    let goals = [A, B];
    let mut seq = 2;
    c.bench_function("service_step_moving", |b| {
        b.iter(|| {
            if svc.is_idle() {
                let p = goals[(seq % 2) as usize];
                svc.handle_message(&CommandMessage::new(seq, "move_to", serde_json::json!({"x": p.x, "y": p.y, "z": p.z})));
                seq += 1;
            }
            black_box(svc.step().tick)
        })
    });
}

criterion_group!(benches, kinematics, planning, control_tick);
criterion_main!(benches);
