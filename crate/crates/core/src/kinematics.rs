//! Serial 6-DOF arm model: forward kinematics, the geometric Jacobian and a
//! damped least-squares inverse kinematics solver.
//!
//! Link transforms follow the standard Denavit–Hartenberg convention,
//! `A_i = Rz(theta_i + offset_i) · Tz(d_i) · Tx(a_i) · Rx(alpha_i)`.

use nalgebra::{Matrix6, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose;

pub const DOF: usize = 6;

/// Joint-space posture in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub [f64; DOF]);

impl JointConfig {
    pub fn zeros() -> Self {
        Self([0.0; DOF])
    }

    pub fn as_vector(&self) -> Vector6<f64> {
        Vector6::from_column_slice(&self.0)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        let mut a = [0.0; DOF];
        a.copy_from_slice(v.as_slice());
        Self(a)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Largest absolute per-joint difference and the joint it occurs on.
    pub fn max_jump(&self, other: &JointConfig) -> (usize, f64) {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .enumerate()
            .fold((0, 0.0), |best, (i, d)| if d > best.1 { (i, d) } else { best })
    }
}

/// One standard DH row. Serialized as `[a, alpha, d, theta_offset]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

impl From<[f64; 4]> for DhRow {
    fn from(v: [f64; 4]) -> Self {
        Self {
            a: v[0],
            alpha: v[1],
            d: v[2],
            theta_offset: v[3],
        }
    }
}

impl From<DhRow> for [f64; 4] {
    fn from(r: DhRow) -> Self {
        [r.a, r.alpha, r.d, r.theta_offset]
    }
}

impl DhRow {
    pub fn new(a: f64, alpha: f64, d: f64, theta_offset: f64) -> Self {
        Self {
            a,
            alpha,
            d,
            theta_offset,
        }
    }

    fn transform(&self, q: f64) -> Pose {
        let theta = q + self.theta_offset;
        let (s, c) = theta.sin_cos();
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha);
        Pose::new(Vector3::new(self.a * c, self.a * s, self.d), rot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    pub tol_pos: f64,
    pub tol_rot: f64,
    pub max_iter: usize,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            tol_pos: 1e-6,
            tol_rot: 1e-6,
            max_iter: 200,
        }
    }
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MIN: f64 = 1e-6;
const LAMBDA_MAX: f64 = 1e10;
const MAX_STEP_RAD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    dh: [DhRow; DOF],
    limits: [(f64, f64); DOF],
    base: Pose,
    flange_offset: Pose,
}

impl ArmModel {
    pub fn new(
        dh: [DhRow; DOF],
        limits: [(f64, f64); DOF],
        base: Pose,
        flange_offset: Pose,
    ) -> Result<Self> {
        for (i, row) in dh.iter().enumerate() {
            let vals = [row.a, row.alpha, row.d, row.theta_offset];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("DH row {i} has a non-finite entry")));
            }
        }
        for (i, (lo, hi)) in limits.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "joint {i} limits ({lo}, {hi}) must be finite with lo < hi"
                )));
            }
        }
        if !base.is_finite() || !flange_offset.is_finite() {
            return Err(Error::invalid("base or flange pose is not finite"));
        }
        let arm = Self {
            dh,
            limits,
            base,
            flange_offset,
        };
        let reach = arm.reach();
        if !(reach.is_finite() && reach > 0.0) {
            return Err(Error::invalid("arm reach must be positive"));
        }
        Ok(arm)
    }

    pub fn dh(&self) -> &[DhRow; DOF] {
        &self.dh
    }

    pub fn limits(&self) -> &[(f64, f64); DOF] {
        &self.limits
    }

    pub fn base(&self) -> &Pose {
        &self.base
    }

    pub fn flange_offset(&self) -> &Pose {
        &self.flange_offset
    }

    /// Same arm mounted at a different base.
    pub fn with_base(&self, base: Pose) -> Self {
        Self { base, ..self.clone() }
    }

    /// Sum of |a| + |d| over the chain.
    pub fn reach(&self) -> f64 {
        self.dh.iter().map(|r| r.a.abs() + r.d.abs()).sum()
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        q.0.iter()
            .zip(self.limits.iter())
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, q: &JointConfig) -> JointConfig {
        let mut out = *q;
        for (v, (lo, hi)) in out.0.iter_mut().zip(self.limits.iter()) {
            *v = v.clamp(*lo, *hi);
        }
        out
    }

    fn check(&self, q: &JointConfig, enforce_limits: bool) -> Result<()> {
        if !q.is_finite() {
            return Err(Error::invalid("joint configuration has a non-finite value"));
        }
        if enforce_limits && !self.within_limits(q) {
            return Err(Error::invalid(format!(
                "joint configuration {:?} violates joint limits",
                q.0
            )));
        }
        Ok(())
    }

    /// Frames `base ∘ A_1 ∘ … ∘ A_i` for i = 0..=6.
    fn chain(&self, q: &JointConfig) -> [Pose; DOF + 1] {
        let mut frames = [self.base; DOF + 1];
        for i in 0..DOF {
            frames[i + 1] = frames[i].compose(&self.dh[i].transform(q.0[i]));
        }
        frames
    }

    /// Flange pose in the world frame. Rejects postures outside the joint
    /// limits; see [`ArmModel::forward_kinematics_unbounded`].
    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<Pose> {
        self.check(q, true)?;
        Ok(self.fk_raw(q))
    }

    /// Flange pose without the joint-limit check.
    pub fn forward_kinematics_unbounded(&self, q: &JointConfig) -> Result<Pose> {
        self.check(q, false)?;
        Ok(self.fk_raw(q))
    }

    fn fk_raw(&self, q: &JointConfig) -> Pose {
        self.chain(q)[DOF].compose(&self.flange_offset)
    }

    /// Geometric Jacobian at the flange origin in world axes; rows are
    /// `[v; omega]` per unit joint rate.
    pub fn jacobian(&self, q: &JointConfig) -> Result<Matrix6<f64>> {
        self.check(q, true)?;
        Ok(self.jacobian_raw(q))
    }

    pub fn jacobian_unbounded(&self, q: &JointConfig) -> Result<Matrix6<f64>> {
        self.check(q, false)?;
        Ok(self.jacobian_raw(q))
    }

    fn jacobian_raw(&self, q: &JointConfig) -> Matrix6<f64> {
        let frames = self.chain(q);
        let p = frames[DOF].compose(&self.flange_offset).position();
        let mut j = Matrix6::zeros();
        for (i, frame) in frames.iter().take(DOF).enumerate() {
            let z = frame.orientation() * Vector3::z();
            let lin = z.cross(&(p - frame.position()));
            j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            j.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
        }
        j
    }

    /// Damped least-squares IK from `seed`. Iterates are clamped to the
    /// joint limits, damping grows ×10 whenever a step increases the
    /// residual and relaxes ÷10 on accepted steps.
    pub fn inverse_kinematics(
        &self,
        target: &Pose,
        seed: &JointConfig,
        opts: &IkOptions,
    ) -> Result<JointConfig> {
        self.check(seed, true)?;
        if !target.is_finite() {
            return Err(Error::invalid("IK target is not finite"));
        }
        if !(opts.tol_pos > 0.0 && opts.tol_rot > 0.0) {
            return Err(Error::invalid("IK tolerances must be positive"));
        }

        let bound = self.reach() + self.flange_offset.position().norm();
        let dist = (target.position() - self.base.position()).norm();
        if dist > bound {
            return Err(Error::Unreachable {
                residual_m: dist - bound,
                residual_rad: 0.0,
            });
        }

        let residual = |q: &JointConfig| self.fk_raw(q).error_to(target);
        let converged = |e: &Vector6<f64>| {
            e.fixed_rows::<3>(0).norm() <= opts.tol_pos && e.fixed_rows::<3>(3).norm() <= opts.tol_rot
        };

        let mut q = *seed;
        let mut err = residual(&q);
        let mut cost = err.norm_squared();
        let mut lambda = LAMBDA_INIT;

        for _ in 0..opts.max_iter {
            if converged(&err) {
                return Ok(q);
            }
            let j = self.jacobian_raw(&q);
            let jt = j.transpose();
            let lhs = jt * j + Matrix6::identity() * lambda;
            let Some(chol) = lhs.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let mut dq = chol.solve(&(jt * err));
            let biggest = dq.amax();
            if biggest > MAX_STEP_RAD {
                dq *= MAX_STEP_RAD / biggest;
            }
            let trial = self.clamp(&JointConfig::from_vector(&(q.as_vector() + dq)));
            let trial_err = residual(&trial);
            let trial_cost = trial_err.norm_squared();
            if trial_cost < cost {
                q = trial;
                err = trial_err;
                cost = trial_cost;
                lambda = (lambda * 0.1).max(LAMBDA_MIN);
            } else {
                lambda *= 10.0;
                if lambda > LAMBDA_MAX {
                    break;
                }
            }
        }
        if converged(&err) {
            return Ok(q);
        }
        Err(Error::Unreachable {
            residual_m: err.fixed_rows::<3>(0).norm(),
            residual_rad: err.fixed_rows::<3>(3).norm(),
        })
    }
}
