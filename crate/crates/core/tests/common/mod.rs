#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::Vector3;
use twinmill::config::SystemConfig;
use twinmill::pathplan::{parse_gcode, ToolPath};
use twinmill::{JointConfig, Wrench};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn demo_config() -> SystemConfig {
    SystemConfig::load(&repo_root().join("demo/system.json")).unwrap()
}

pub fn demo_path() -> ToolPath {
    parse_gcode(&std::fs::read_to_string(repo_root().join("demo/path.gcode")).unwrap()).unwrap()
}

pub fn axial(sys: &twinmill::CoupledSystem, newtons: f64) -> Wrench {
    Wrench::new(sys.inter_robot_axis() * newtons, Vector3::zeros())
}

/// Same wrist pose through the other wrist branch.
pub fn flip_wrist(q: &JointConfig) -> JointConfig {
    let mut f = q.0;
    f[3] += std::f64::consts::PI;
    f[4] = -f[4];
    f[5] -= std::f64::consts::PI;
    JointConfig(f)
}

