mod common;

use nalgebra::Vector3;
use twinmill::compensation::{
    calibrate_deformation, compensate, fit_rigid, residual_report, simulate_deformation, PathTrace,
};
use twinmill::io::{read_program_csv, write_program_csv};
use twinmill::par::Execution;
use twinmill::pathplan::{plan_sync, SetpointPair, SyncProgram};
use twinmill::{Pose, Wrench};

use common::*;

const TARGET: Vector3<f64> = Vector3::new(0.0, -2.0e-3, -1.2e-3);

#[test]
fn zero_tension_leaves_the_path_untouched() {
    let cfg = demo_config();
    let sys = cfg.system().unwrap();
    let prog = plan_sync(&sys, &demo_path(), &Wrench::zero(), cfg.seeds(), &cfg.plan_options()).unwrap();
    let trace = simulate_deformation(&sys, &prog, Execution::default()).unwrap();
    assert_eq!(trace.points, PathTrace::nominal(&prog).points);
}

#[test]
fn fixed_posture_gives_one_offset_everywhere() {
    let cfg = demo_config();
    let sys = cfg.system().unwrap();
    let (q1, q2) = cfg.seeds();
    let w = axial(&sys, 1000.0);
    let pairs: Vec<SetpointPair> = (0..20)
        .map(|i| {
            let tool = Pose::from_translation(Vector3::new(2.0 + 1e-3 * i as f64, 0.0, 0.9));
            SetpointPair {
                index: i,
                tool_pose: tool,
                robot1_flange: tool,
                robot2_flange_nominal: tool,
                robot2_flange_commanded: tool,
                q1,
                q2,
                q2_nominal: q2,
            }
        })
        .collect();
    let prog = SyncProgram::new(pairs, w, 600.0, 1e-5, 2e-3).unwrap();
    let once = sys.tool_deflection(&q1, &q2, &w).unwrap().fixed_rows::<3>(0).into_owned();
    let trace = simulate_deformation(&sys, &prog, Execution::Sequential).unwrap();
    for (p, pair) in trace.points.iter().zip(prog.pairs()) {
        assert_eq!(*p, pair.tool_pose.position() + once);
    }
}

#[test]
fn calibrated_scenario_reproduces_the_offsets() {
    let cfg = demo_config();
    let sys = cfg.system().unwrap();
    let zero = plan_sync(&sys, &demo_path(), &Wrench::zero(), cfg.seeds(), &cfg.plan_options()).unwrap();
    let p0 = &zero.pairs()[0];
    let cal = calibrate_deformation(&sys, &p0.q1, &p0.q2_nominal, 1000.0, TARGET).unwrap();
    assert!((cal.tension.force.norm() - 1000.0).abs() < 1e-9);
    assert!(cal.tension.force.dot(&sys.inter_robot_axis()) > 0.0, "force pulls the arms apart");

    let prog = plan_sync(&cal.system, &demo_path(), &cal.tension, cfg.seeds(), &cfg.plan_options()).unwrap();
    let nominal = PathTrace::nominal(&prog);
    let deformed = simulate_deformation(&cal.system, &prog, Execution::default()).unwrap();
    let first = deformed.points[0] - nominal.points[0];
    assert!((first - TARGET).norm() < 1e-6, "{first:?}");

    let before = residual_report(&nominal, &deformed).unwrap();
    assert!((before.per_axis[1].max_abs - 2.0e-3).abs() < 0.2e-3);
    // Mostly constant: spread well below the offset itself.
    assert!(before.per_axis[1].std < 0.05 * before.per_axis[1].mean.abs());

    let t = fit_rigid(&nominal, &deformed).unwrap();
    let after = residual_report(&nominal, &compensate(&deformed, &t)).unwrap();
    assert!(after.rms < 0.05e-3, "{}", after.rms);
    assert!(after.rms < before.rms);
}

#[test]
fn program_csv_round_trip() {
    let cfg = demo_config();
    let sys = cfg.system().unwrap();
    let prog = plan_sync(&sys, &demo_path(), &axial(&sys, 1000.0), cfg.seeds(), &cfg.plan_options()).unwrap();
    let mut buf = Vec::new();
    write_program_csv(&mut buf, &prog).unwrap();
    let back = read_program_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back, prog);
}

/// `demo/calibrated.json` is the demo cell with the fitted compliance
/// scale; `UPDATE_GOLDEN=1` rewrites it.
#[test]
fn shipped_calibrated_config_matches_the_fit() {
    let cfg = demo_config();
    let sys = cfg.system().unwrap();
    let zero = plan_sync(&sys, &demo_path(), &Wrench::zero(), cfg.seeds(), &cfg.plan_options()).unwrap();
    let p0 = &zero.pairs()[0];
    let cal = calibrate_deformation(&sys, &p0.q1, &p0.q2_nominal, 1000.0, TARGET).unwrap();
    let mut expected = cfg.clone();
    expected.arm1.joint_stiffness = cal.system.joint_stiffness1;
    expected.arm2.joint_stiffness = cal.system.joint_stiffness2;
    let f = cal.tension.force;
    expected.note = Some(format!(
        "demo cell with joint compliance scaled by {:.6} so that a tension force of \
         ({:.1}, {:.1}, {:.1}) N moves the tool by (0, -2.0, -1.2) mm at the path start",
        cal.compliance_scale, f.x, f.y, f.z
    ));
    let file = repo_root().join("demo/calibrated.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&file, expected.to_json_pretty()).unwrap();
    }
    let shipped = twinmill::config::SystemConfig::load(&file).unwrap();
    assert_eq!(shipped, expected);
}
