//! JSON system description: both arms, the coupling spring, cell geometry,
//! per-axis modal models and default tolerances.
//!
//! Parsing is strict. Unknown keys are rejected and every error carries
//! the JSON path of the offending value.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{ArmModel, DhRow, IkOptions, JointConfig, DOF};
use crate::modal::{linear_grid, Axis, ModalModel};
use crate::pathplan::{PlanOptions, WorkspaceBox};
use crate::pose::Pose;
use crate::stiffness::{CoupledSystem, JointStiffness, SpringModel};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable consulted when no config path is given.
pub const CONFIG_ENV: &str = "TWINMILL_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DhConvention {
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub dh: [DhRow; DOF],
    /// `[lo, hi]` per joint (rad).
    pub joint_limits: [[f64; 2]; DOF],
    pub base_pose: Pose,
    pub flange_offset: Pose,
    /// N·m/rad
    pub joint_stiffness: JointStiffness,
    /// Starting posture for the first IK solve of a plan.
    pub ik_seed: JointConfig,
}

impl ArmConfig {
    pub fn model(&self) -> Result<ArmModel> {
        ArmModel::new(
            self.dh,
            self.joint_limits.map(|[lo, hi]| (lo, hi)),
            self.base_pose,
            self.flange_offset,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub ik_tol_pos_m: f64,
    pub ik_tol_rot_rad: f64,
    pub ik_max_iter: usize,
    pub chord_tol_m: f64,
    pub max_step_m: f64,
    pub max_joint_step_rad: f64,
    pub frf_min_hz: f64,
    pub frf_max_hz: f64,
    pub frf_step_hz: f64,
    /// `[lo, hi]` band searched for resonances (Hz).
    pub peak_band_hz: [f64; 2],
    pub prominence_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub schema_version: u32,
    pub dh_convention: DhConvention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub arm1: ArmConfig,
    pub arm2: ArmConfig,
    /// 6×6 coupling stiffness, rows in `[N/m | N/rad ; N | N·m/rad]`.
    pub spring: [[f64; 6]; 6],
    pub tool_offset: Pose,
    pub flange2_offset: Pose,
    /// Pose of the tool-path frame in the world.
    pub program_origin: Pose,
    pub workspace: WorkspaceBox,
    pub modal: Vec<ModalModel>,
    pub defaults: Defaults,
}

fn config_err(path: impl Into<String>, e: impl std::fmt::Display) -> Error {
    Error::Config {
        path: path.into(),
        message: e.to_string(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(path, format!("must be finite and > 0, got {v}")))
    }
}

impl SystemConfig {
    /// Parses and validates a config document.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: SystemConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(if path.is_empty() { ".".into() } else { path }, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(path.display().to_string(), e))?;
        Self::from_json_str(&text)
    }

    /// Loads `explicit` if given, otherwise the file named by
    /// [`CONFIG_ENV`].
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Err(config_err(
                    CONFIG_ENV,
                    "no config given and the environment variable is not set",
                )),
            },
        }
    }

    /// Indented JSON with numeric arrays kept on one line.
    pub fn to_json_pretty(&self) -> String {
        crate::io::pretty_json(&serde_json::to_value(self).expect("config serializes"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        for (name, arm) in [("arm1", &self.arm1), ("arm2", &self.arm2)] {
            let model = arm.model().map_err(|e| config_err(name, e))?;
            if !arm.ik_seed.is_finite() || !model.within_limits(&arm.ik_seed) {
                return Err(config_err(format!("{name}.ik_seed"), "seed must lie within the joint limits"));
            }
        }
        self.spring_model().map_err(|e| config_err("spring", e))?;
        self.system()?;
        let ws = &self.workspace;
        if !(ws.center.iter().all(|v| v.is_finite()) && ws.size.iter().all(|v| v.is_finite() && *v > 0.0)) {
            return Err(config_err("workspace", "center must be finite and size > 0"));
        }
        let mut seen = HashSet::new();
        for (i, m) in self.modal.iter().enumerate() {
            if !seen.insert(m.axis) {
                return Err(config_err(format!("modal[{i}].axis"), format!("duplicate axis `{}`", m.axis)));
            }
        }
        let d = &self.defaults;
        positive("defaults.ik_tol_pos_m", d.ik_tol_pos_m)?;
        positive("defaults.ik_tol_rot_rad", d.ik_tol_rot_rad)?;
        if d.ik_max_iter == 0 {
            return Err(config_err("defaults.ik_max_iter", "must be > 0"));
        }
        positive("defaults.chord_tol_m", d.chord_tol_m)?;
        positive("defaults.max_step_m", d.max_step_m)?;
        positive("defaults.max_joint_step_rad", d.max_joint_step_rad)?;
        positive("defaults.frf_min_hz", d.frf_min_hz)?;
        positive("defaults.frf_step_hz", d.frf_step_hz)?;
        positive("defaults.prominence_factor", d.prominence_factor)?;
        linear_grid(d.frf_min_hz, d.frf_max_hz, d.frf_step_hz).map_err(|e| config_err("defaults.frf_max_hz", e))?;
        let [lo, hi] = d.peak_band_hz;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
            return Err(config_err("defaults.peak_band_hz", "band must satisfy 0 <= lo < hi"));
        }
        Ok(())
    }

    pub fn spring_model(&self) -> Result<SpringModel> {
        SpringModel::new(Matrix6::from_fn(|i, j| self.spring[i][j]))
    }

    pub fn system(&self) -> Result<CoupledSystem> {
        CoupledSystem::new(
            self.arm1.model().map_err(|e| config_err("arm1", e))?,
            self.arm2.model().map_err(|e| config_err("arm2", e))?,
            self.arm1.joint_stiffness,
            self.arm2.joint_stiffness,
            self.spring_model().map_err(|e| config_err("spring", e))?,
            self.tool_offset,
            self.flange2_offset,
        )
        .map_err(|e| config_err(".", e))
    }

    pub fn seeds(&self) -> (JointConfig, JointConfig) {
        (self.arm1.ik_seed, self.arm2.ik_seed)
    }

    pub fn ik_options(&self) -> IkOptions {
        IkOptions {
            tol_pos: self.defaults.ik_tol_pos_m,
            tol_rot: self.defaults.ik_tol_rot_rad,
            max_iter: self.defaults.ik_max_iter,
        }
    }

    pub fn plan_options(&self) -> PlanOptions {
        PlanOptions {
            chord_tol: self.defaults.chord_tol_m,
            max_step: self.defaults.max_step_m,
            ik: self.ik_options(),
            max_joint_step: self.defaults.max_joint_step_rad,
            workspace: self.workspace,
            program_origin: self.program_origin,
        }
    }

    pub fn modal_model(&self, axis: Axis) -> Result<ModalModel> {
        self.modal
            .iter()
            .find(|m| m.axis == axis)
            .copied()
            .ok_or_else(|| config_err("modal", format!("no model for axis `{axis}`")))
    }

    pub fn frf_grid(&self) -> Vec<f64> {
        let d = &self.defaults;
        linear_grid(d.frf_min_hz, d.frf_max_hz, d.frf_step_hz).expect("validated on load")
    }
}

/// Built-in configurations.
pub mod presets {
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    use nalgebra::{Quaternion, UnitQuaternion, Vector3};

    use super::*;

    const DEG: f64 = PI / 180.0;

    /// Six-axis arm with the proportions of a 2.6 m reach heavy-payload
    /// industrial robot. Illustrative numbers, not vendor data.
    pub fn heavy_arm_dh() -> [DhRow; DOF] {
        [
            DhRow::new(0.4, -FRAC_PI_2, 0.9, 0.0),
            DhRow::new(1.3, 0.0, 0.0, -FRAC_PI_2),
            DhRow::new(0.25, -FRAC_PI_2, 0.0, 0.0),
            DhRow::new(0.0, FRAC_PI_2, 1.3, 0.0),
            DhRow::new(0.0, -FRAC_PI_2, 0.0, 0.0),
            DhRow::new(0.0, 0.0, 0.2, 0.0),
        ]
    }

    pub fn heavy_arm_limits() -> [[f64; 2]; DOF] {
        [
            [-170.0 * DEG, 170.0 * DEG],
            [-130.0 * DEG, 130.0 * DEG],
            [-160.0 * DEG, 160.0 * DEG],
            [-350.0 * DEG, 350.0 * DEG],
            [-125.0 * DEG, 125.0 * DEG],
            [-350.0 * DEG, 350.0 * DEG],
        ]
    }

    pub fn heavy_arm_stiffness() -> JointStiffness {
        JointStiffness::new([8.0e6, 8.0e6, 5.0e6, 1.5e6, 1.5e6, 1.0e6]).expect("positive")
    }

    pub fn nj290_like_arm(base: Pose) -> ArmModel {
        ArmModel::new(
            heavy_arm_dh(),
            heavy_arm_limits().map(|[lo, hi]| (lo, hi)),
            base,
            Pose::identity(),
        )
        .expect("preset arm is valid")
    }

    /// Distance between the two robot bases (m).
    pub const BASE_DISTANCE: f64 = 4.25;

    fn arm(base: Pose, ik_seed: [f64; DOF]) -> ArmConfig {
        ArmConfig {
            dh: heavy_arm_dh(),
            joint_limits: heavy_arm_limits(),
            base_pose: base,
            flange_offset: Pose::identity(),
            joint_stiffness: heavy_arm_stiffness(),
            ik_seed: JointConfig(ik_seed),
        }
    }

    /// Two facing arms 4.25 m apart, a 1 m³ workspace between them and
    /// a spindle hanging below the arm-1 flange.
    pub fn demo_config() -> SystemConfig {
        let mut spring = [[0.0; 6]; 6];
        for (i, row) in spring.iter_mut().enumerate() {
            row[i] = if i < 3 { 5.0e7 } else { 5.0e5 };
        }
        let half_turn_x = UnitQuaternion::from_quaternion(Quaternion::new(0.0, 1.0, 0.0, 0.0));
        SystemConfig {
            schema_version: SCHEMA_VERSION,
            dh_convention: DhConvention::Standard,
            note: Some("illustrative cell; arm and stiffness numbers are not vendor data".into()),
            arm1: arm(Pose::identity(), SEED1),
            arm2: arm(
                Pose::from_parts([BASE_DISTANCE, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]).expect("unit quaternion"),
                SEED2,
            ),
            spring,
            tool_offset: Pose::from_parts([0.25, 0.0, 0.2], [0.0, FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2])
                .expect("unit quaternion"),
            flange2_offset: Pose::new(Vector3::new(0.0, 0.0, 0.4), half_turn_x),
            program_origin: Pose::new(Vector3::new(2.075, 0.03, 0.9), half_turn_x),
            workspace: WorkspaceBox {
                center: Vector3::new(2.125, 0.0, 1.0),
                size: Vector3::new(1.0, 1.0, 1.0),
            },
            modal: vec![
                ModalModel::new(Axis::X, 60.0, 0.03, 159.0, 0.0226).expect("valid"),
                ModalModel::new(Axis::Y, 45.0, 0.03, 700.0, 0.01).expect("valid"),
                ModalModel::new(Axis::Z, 80.0, 0.04, 420.0, 0.005).expect("valid"),
            ],
            defaults: Defaults {
                ik_tol_pos_m: 1e-6,
                ik_tol_rot_rad: 1e-6,
                ik_max_iter: 200,
                chord_tol_m: 1e-5,
                max_step_m: 2e-3,
                max_joint_step_rad: 0.2,
                frf_min_hz: 20.0,
                frf_max_hz: 1200.0,
                frf_step_hz: 0.25,
                peak_band_hz: [50.0, 1000.0],
                prominence_factor: 1.0,
            },
        }
    }

    const SEED1: [f64; DOF] = [
        0.017908533000518742,
        0.30858498389048405,
        0.7246004264547234,
        0.02084891412986997,
        -1.0332810082451196,
        3.1309167999510854,
    ];
    const SEED2: [f64; DOF] = [
        -0.016899799387784187,
        0.367515603518001,
        0.6372654898702221,
        -0.020021631708867064,
        -1.004871819182094,
        3.1523292029143035,
    ];
}
