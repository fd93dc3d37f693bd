//! Rigid poses and the 6-D twist/wrench frame algebra shared by the
//! kinematics, stiffness and planning code.
//!
//! Six-vectors are ordered `[linear; angular]`: small displacements are
//! `[dp; dtheta]` at a reference point, wrenches are `[force; moment]`
//! about the same point. Axes are always world axes unless noted.

use nalgebra::{Isometry3, Matrix3, Matrix6, Quaternion, Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quaternions read from files may deviate this much from unit norm
/// before they are rejected (they are renormalized otherwise).
const QUAT_LOAD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    position: Vector3<f64>,
    orientation: UnitQuaternion<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    position: [f64; 3],
    /// (w, x, y, z)
    orientation: [f64; 4],
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        Pose::from_parts(r.position, r.orientation)
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            position: p.position.into(),
            orientation: p.quaternion_wxyz(),
        }
    }
}

fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation: canonical(orientation),
        }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_translation(position: Vector3<f64>) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    /// Builds a pose from a position and a `(w, x, y, z)` quaternion.
    /// Quaternions within 1e-9 of unit norm are kept bit-for-bit; those
    /// within 1e-6 are renormalized.
    pub fn from_parts(position: [f64; 3], wxyz: [f64; 4]) -> Result<Self> {
        if position.iter().chain(wxyz.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("pose contains a non-finite value"));
        }
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let n = q.norm();
        if (n - 1.0).abs() > QUAT_LOAD_TOLERANCE {
            return Err(Error::invalid(format!("quaternion norm {n} is not unit")));
        }
        let unit = if (n - 1.0).abs() <= 1e-9 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        Ok(Self::new(position.into(), unit))
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn position(&self) -> Vector3<f64> {
        self.position
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        self.orientation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix().into_inner()
    }

    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.quaternion_wxyz().iter().all(|v| v.is_finite())
    }

    /// `self ∘ other`: `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.position + self.orientation * other.position,
            self.orientation * other.orientation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose::new(-(inv * self.position), inv)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    /// Applies a small world-frame displacement `[dp; dtheta]` about this
    /// pose's origin.
    pub fn perturb(&self, delta: &Vector6<f64>) -> Pose {
        let dp = delta.fixed_rows::<3>(0).into_owned();
        let dtheta = delta.fixed_rows::<3>(3).into_owned();
        Pose::new(
            self.position + dp,
            UnitQuaternion::from_scaled_axis(dtheta) * self.orientation,
        )
    }

    /// World-frame error twist that takes `self` to `target`: position
    /// difference and the rotation vector of `R_target · R_selfᵀ`.
    pub fn error_to(&self, target: &Pose) -> Vector6<f64> {
        let dp = target.position - self.position;
        let dr = (target.orientation * self.orientation.inverse()).scaled_axis();
        Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
    }

    /// Position distance (m) and rotation angle (rad) between two poses.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        (
            (self.position - other.position).norm(),
            self.orientation.angle_to(&other.orientation),
        )
    }
}

/// Skew-symmetric matrix with `skew(a) * b == a × b`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Maps a small displacement referenced at point `a` to the same rigid
/// displacement referenced at `a + r`.
pub fn shift_matrix(r: &Vector3<f64>) -> Matrix6<f64> {
    let mut t = Matrix6::identity();
    t.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(r)));
    t
}

/// `diag(R, R)`: re-expresses a twist or wrench given in a rotated frame.
pub fn rotation_block(r: &Matrix3<f64>) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    m
}

/// Moves a compliance matrix's reference point from `from` to `to`.
pub fn transport_compliance(c: &Matrix6<f64>, from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix6<f64> {
    let t = shift_matrix(&(to - from));
    t * c * t.transpose()
}

/// Moves a stiffness matrix's reference point from `from` to `to`.
pub fn transport_stiffness(k: &Matrix6<f64>, from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix6<f64> {
    let t_inv = shift_matrix(&(from - to));
    t_inv.transpose() * k * t_inv
}

/// Moves a wrench's moment reference point from `from` to `to`.
pub fn transport_wrench(w: &Vector6<f64>, from: &Vector3<f64>, to: &Vector3<f64>) -> Vector6<f64> {
    shift_matrix(&(from - to)).transpose() * w
}

/// Moves a small displacement's reference point from `from` to `to`.
pub fn transport_twist(d: &Vector6<f64>, from: &Vector3<f64>, to: &Vector3<f64>) -> Vector6<f64> {
    shift_matrix(&(to - from)) * d
}
