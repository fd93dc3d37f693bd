use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{discretize, ToolPath};
use crate::error::{Error, Result};
use crate::kinematics::{IkOptions, JointConfig};
use crate::pose::Pose;
use crate::stiffness::{CoupledSystem, Wrench};

/// Axis-aligned box in world coordinates (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceBox {
    pub center: Vector3<f64>,
    pub size: Vector3<f64>,
}

impl WorkspaceBox {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| (p[i] - self.center[i]).abs() <= 0.5 * self.size[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptions {
    pub chord_tol: f64,
    pub max_step: f64,
    pub ik: IkOptions,
    /// Largest per-joint change allowed between consecutive setpoints (rad).
    pub max_joint_step: f64,
    pub workspace: WorkspaceBox,
    /// Pose of the path frame in the world.
    pub program_origin: Pose,
}

/// Setpoints for both robots at one program index.
#[derive(Debug, Clone, PartialEq)]
pub struct SetpointPair {
    pub index: usize,
    pub tool_pose: Pose,
    pub robot1_flange: Pose,
    pub robot2_flange_nominal: Pose,
    pub robot2_flange_commanded: Pose,
    pub q1: JointConfig,
    /// Arm-2 joints for the commanded (tensioned) flange pose.
    pub q2: JointConfig,
    /// Arm-2 joints for the nominal flange pose, used for stiffness.
    pub q2_nominal: JointConfig,
}

impl SetpointPair {
    /// Commanded minus nominal arm-2 flange pose as `[dp; dtheta]`.
    pub fn tension_offset(&self) -> Vector6<f64> {
        self.robot2_flange_nominal.error_to(&self.robot2_flange_commanded)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncProgram {
    pairs: Vec<SetpointPair>,
    pub tension: Wrench,
    pub feed_mm_min: f64,
    pub chord_tol: f64,
    pub max_step: f64,
}

impl SyncProgram {
    pub fn new(pairs: Vec<SetpointPair>, tension: Wrench, feed_mm_min: f64, chord_tol: f64, max_step: f64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("program has no setpoints"));
        }
        if pairs.windows(2).any(|w| w[1].index <= w[0].index) {
            return Err(Error::invalid("setpoint indices must be strictly increasing"));
        }
        for (i, w) in pairs.windows(2).enumerate() {
            let d = (w[1].tool_pose.position() - w[0].tool_pose.position()).norm();
            if d > max_step * (1.0 + 1e-9) {
                return Err(Error::invalid(format!(
                    "tool positions {i} and {} are {d:e} m apart (max step {max_step:e})",
                    i + 1
                )));
            }
        }
        Ok(Self {
            pairs,
            tension,
            feed_mm_min,
            chord_tol,
            max_step,
        })
    }

    pub fn pairs(&self) -> &[SetpointPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Fails on the first joint jump above `limit` between consecutive pairs.
pub fn check_continuity(pairs: &[SetpointPair], limit: f64) -> Result<()> {
    for (i, w) in pairs.windows(2).enumerate() {
        for (robot, a, b) in [(1u8, &w[0].q1, &w[1].q1), (2u8, &w[0].q2, &w[1].q2)] {
            let (joint, jump) = a.max_jump(b);
            if jump > limit {
                return Err(Error::Continuity {
                    index: i,
                    robot,
                    joint,
                    jump_rad: jump,
                });
            }
        }
    }
    Ok(())
}

/// Plans synchronized setpoints for both robots along `path`.
///
/// For each sampled tool pose the arm-1 flange follows from the tool
/// offset, the nominal arm-2 flange from the coupling geometry, and the
/// commanded arm-2 flange adds the tension offset computed at that
/// posture. IK for every pose is seeded with the previous solution, so
/// planning is a sequential fold.
pub fn plan_sync(
    sys: &CoupledSystem,
    path: &ToolPath,
    tension: &Wrench,
    seeds: (JointConfig, JointConfig),
    opts: &PlanOptions,
) -> Result<SyncProgram> {
    let tool_poses: Vec<Pose> = discretize(path, opts.chord_tol, opts.max_step)?
        .iter()
        .map(|p| opts.program_origin.compose(p))
        .collect();
    for (index, p) in tool_poses.iter().enumerate() {
        if !opts.workspace.contains(&p.position()) {
            return Err(Error::Workspace {
                index,
                position: p.position().into(),
            });
        }
    }

    let plan_err = |index: usize| move |e: Error| Error::Plan {
        index,
        source: Box::new(e),
    };
    let zero_tension = tension.as_vector() == Vector6::zeros();
    let (mut seed1, mut seed2) = seeds;
    let mut pairs = Vec::with_capacity(tool_poses.len());
    for (index, tool_pose) in tool_poses.into_iter().enumerate() {
        let robot1_flange = sys.flange1_for_tool(&tool_pose);
        let robot2_flange_nominal = sys.flange2_for_flange1(&robot1_flange);
        let q1 = sys
            .arm1
            .inverse_kinematics(&robot1_flange, &seed1, &opts.ik)
            .map_err(plan_err(index))?;
        let q2_nominal = sys
            .arm2
            .inverse_kinematics(&robot2_flange_nominal, &seed2, &opts.ik)
            .map_err(plan_err(index))?;
        let (robot2_flange_commanded, q2) = if zero_tension {
            (robot2_flange_nominal, q2_nominal)
        } else {
            let offset = sys
                .tension_offset(&q1, &q2_nominal, tension)
                .map_err(plan_err(index))?;
            let commanded = robot2_flange_nominal.perturb(&offset);
            let q2 = sys
                .arm2
                .inverse_kinematics(&commanded, &q2_nominal, &opts.ik)
                .map_err(plan_err(index))?;
            (commanded, q2)
        };
        seed1 = q1;
        seed2 = q2_nominal;
        pairs.push(SetpointPair {
            index,
            tool_pose,
            robot1_flange,
            robot2_flange_nominal,
            robot2_flange_commanded,
            q1,
            q2,
            q2_nominal,
        });
    }
    check_continuity(&pairs, opts.max_joint_step)?;
    SyncProgram::new(pairs, *tension, path.feed_mm_min(), opts.chord_tol, opts.max_step)
}
