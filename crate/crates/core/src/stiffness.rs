//! Joint-compliance stiffness model of the coupled cell.
//!
//! Each arm is rigid except for its joints, which act as torsional springs.
//! The coupling module is a 6-D linear spring between the arm-1 flange side
//! (which carries the tool) and the arm-2 flange. All stiffness and
//! compliance matrices are in world axes; their reference point is named
//! by the function that returns them.

use nalgebra::{Matrix6, SymmetricEigen, Vector3, Vector6, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{ArmModel, JointConfig, DOF};
use crate::pose::{rotation_block, transport_compliance, transport_wrench, Pose};

/// Smallest Jacobian singular value accepted for a stiffness evaluation.
pub const MIN_SINGULAR_VALUE: f64 = 1e-8;
/// Allowed flange-pose mismatch between the two arms (m).
pub const CLOSURE_TOL_M: f64 = 1e-4;
/// Allowed flange-orientation mismatch between the two arms (rad).
pub const CLOSURE_TOL_RAD: f64 = 1e-4;
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct JointStiffness([f64; DOF]);

impl TryFrom<[f64; DOF]> for JointStiffness {
    type Error = Error;
    fn try_from(v: [f64; DOF]) -> Result<Self> {
        Self::new(v)
    }
}

impl From<JointStiffness> for [f64; DOF] {
    fn from(k: JointStiffness) -> Self {
        k.0
    }
}

impl JointStiffness {
    /// Per-joint torsional stiffness in N·m/rad; every entry must be > 0.
    pub fn new(diag: [f64; DOF]) -> Result<Self> {
        if diag.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::invalid("joint stiffness entries must be finite and > 0"));
        }
        Ok(Self(diag))
    }

    pub fn values(&self) -> &[f64; DOF] {
        &self.0
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.0.map(|k| k * s))
    }
}

/// Coupling-module spring, expressed in the module's attachment frame at
/// the arm-2 flange (axes and reference point of `flange1 ∘ flange2_offset`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringModel {
    matrix: Matrix6<f64>,
}

impl SpringModel {
    pub fn new(matrix: Matrix6<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("spring matrix has a non-finite entry"));
        }
        let scale = matrix.amax();
        if (matrix - matrix.transpose()).amax() > SYMMETRY_TOL * scale {
            return Err(Error::invalid("spring matrix is not symmetric"));
        }
        let sym = symmetrize(&matrix);
        let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(Error::invalid(format!(
                "spring matrix is not positive definite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { matrix: sym })
    }

    pub fn diagonal(translational: f64, rotational: f64) -> Result<Self> {
        let d = Vector6::new(
            translational,
            translational,
            translational,
            rotational,
            rotational,
            rotational,
        );
        Self::new(Matrix6::from_diagonal(&d))
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.matrix
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.matrix * s)
    }
}

/// Force/torque pair; the moment is taken about the arm-2 flange origin
/// when used as a coupling tension.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            force: v.fixed_rows::<3>(0).into_owned(),
            torque: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn as_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.as_vector().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSystem {
    pub arm1: ArmModel,
    pub arm2: ArmModel,
    pub joint_stiffness1: JointStiffness,
    pub joint_stiffness2: JointStiffness,
    pub spring: SpringModel,
    /// Tool point relative to the arm-1 flange.
    pub tool_offset: Pose,
    /// Arm-2 flange attachment relative to the arm-1 flange.
    pub flange2_offset: Pose,
}

/// Branch compliances of one coupled posture.
#[derive(Debug, Clone, PartialEq)]
pub struct Branches {
    pub flange1: Pose,
    pub flange2: Pose,
    pub tool: Pose,
    /// Arm-1 compliance at the arm-1 flange.
    pub arm1_compliance: Matrix6<f64>,
    /// Arm-2 compliance at the arm-2 flange.
    pub arm2_compliance: Matrix6<f64>,
    /// Spring compliance in world axes at the arm-2 flange.
    pub spring_compliance: Matrix6<f64>,
}

impl Branches {
    pub fn tool_point(&self) -> Vector3<f64> {
        self.tool.position()
    }

    pub fn f1(&self) -> Vector3<f64> {
        self.flange1.position()
    }

    pub fn f2(&self) -> Vector3<f64> {
        self.flange2.position()
    }

    /// Compliance of the tension loop seen from the arm-2 flange: the
    /// arm-2 joints, the spring and the arm-1 joints in series.
    pub fn loop_compliance(&self) -> Matrix6<f64> {
        symmetrize(
            &(transport_compliance(&self.arm1_compliance, &self.f1(), &self.f2())
                + self.arm2_compliance
                + self.spring_compliance),
        )
    }
}

impl CoupledSystem {
    pub fn new(
        arm1: ArmModel,
        arm2: ArmModel,
        joint_stiffness1: JointStiffness,
        joint_stiffness2: JointStiffness,
        spring: SpringModel,
        tool_offset: Pose,
        flange2_offset: Pose,
    ) -> Result<Self> {
        if (arm1.base().position() - arm2.base().position()).norm() < 1e-9 {
            return Err(Error::invalid("arm base poses must be distinct"));
        }
        if !tool_offset.is_finite() || !flange2_offset.is_finite() {
            return Err(Error::invalid("tool or flange offset is not finite"));
        }
        Ok(Self {
            arm1,
            arm2,
            joint_stiffness1,
            joint_stiffness2,
            spring,
            tool_offset,
            flange2_offset,
        })
    }

    /// Unit vector from the arm-1 base to the arm-2 base.
    pub fn inter_robot_axis(&self) -> Vector3<f64> {
        (self.arm2.base().position() - self.arm1.base().position()).normalize()
    }

    /// Arm-1 flange pose that puts the tool at `tool`.
    pub fn flange1_for_tool(&self, tool: &Pose) -> Pose {
        tool.compose(&self.tool_offset.inverse())
    }

    /// Nominal arm-2 flange pose for a given arm-1 flange pose.
    pub fn flange2_for_flange1(&self, flange1: &Pose) -> Pose {
        flange1.compose(&self.flange2_offset)
    }

    /// Checks that the two postures close the chain and returns the branch
    /// compliances.
    pub fn branches(&self, q1: &JointConfig, q2: &JointConfig) -> Result<Branches> {
        let flange1 = self.arm1.forward_kinematics(q1)?;
        let flange2 = self.arm2.forward_kinematics(q2)?;
        let attach = self.flange2_for_flange1(&flange1);
        let (gap_m, gap_rad) = attach.distance(&flange2);
        if gap_m > CLOSURE_TOL_M || gap_rad > CLOSURE_TOL_RAD {
            return Err(Error::Closure { gap_m, gap_rad });
        }
        let arm1_compliance = cartesian_compliance(&self.arm1, q1, &self.joint_stiffness1)?;
        let arm2_compliance = cartesian_compliance(&self.arm2, q2, &self.joint_stiffness2)?;
        let local = spd_inverse(self.spring.matrix())?;
        let rb = rotation_block(&attach.rotation_matrix());
        let spring_compliance = symmetrize(&(rb * local * rb.transpose()));
        Ok(Branches {
            tool: flange1.compose(&self.tool_offset),
            flange1,
            flange2,
            arm1_compliance,
            arm2_compliance,
            spring_compliance,
        })
    }

    /// Stiffness at the tool point: arm 1 in parallel with the series
    /// chain spring + arm 2.
    pub fn coupled_stiffness(&self, q1: &JointConfig, q2: &JointConfig) -> Result<Matrix6<f64>> {
        let b = self.branches(q1, q2)?;
        let t = b.tool_point();
        parallel_tool_stiffness(
            &transport_compliance(&b.arm1_compliance, &b.f1(), &t),
            &transport_compliance(&b.arm2_compliance, &b.f2(), &t),
            &transport_compliance(&b.spring_compliance, &b.f2(), &t),
        )
    }

    /// Arm-2 setpoint offset `[dp; dtheta]` (world axes, about the arm-2
    /// flange) that makes the coupling carry `desired`.
    pub fn tension_offset(
        &self,
        q1: &JointConfig,
        q2: &JointConfig,
        desired: &Wrench,
    ) -> Result<Vector6<f64>> {
        if !desired.is_finite() {
            return Err(Error::invalid("desired wrench is not finite"));
        }
        let b = self.branches(q1, q2)?;
        Ok(b.loop_compliance() * desired.as_vector())
    }

    /// Coupling wrench produced by an arm-2 setpoint offset; the exact
    /// inverse of [`CoupledSystem::tension_offset`].
    pub fn predicted_tension(
        &self,
        q1: &JointConfig,
        q2: &JointConfig,
        offset: &Vector6<f64>,
    ) -> Result<Wrench> {
        if offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("offset is not finite"));
        }
        let b = self.branches(q1, q2)?;
        let c = b.loop_compliance();
        let chol = c.cholesky().ok_or_else(|| singular_from(&c))?;
        Ok(Wrench::from_vector(&chol.solve(offset)))
    }

    /// Static tool displacement `[dp; dtheta]` at the tool point caused by
    /// a coupling wrench `w` pulling on the arm-1 side of the module.
    pub fn tool_deflection(&self, q1: &JointConfig, q2: &JointConfig, w: &Wrench) -> Result<Vector6<f64>> {
        let b = self.branches(q1, q2)?;
        let t = b.tool_point();
        let c1 = transport_compliance(&b.arm1_compliance, &b.f1(), &t);
        Ok(c1 * transport_wrench(&w.as_vector(), &b.f2(), &t))
    }
}

/// `J · K_joint⁻¹ · Jᵀ` at the flange, after checking the Jacobian rank.
pub fn cartesian_compliance(arm: &ArmModel, q: &JointConfig, k: &JointStiffness) -> Result<Matrix6<f64>> {
    let j = arm.jacobian(q)?;
    compliance_from_jacobian(&j, k)
}

pub fn compliance_from_jacobian(j: &Matrix6<f64>, k: &JointStiffness) -> Result<Matrix6<f64>> {
    check_rank(j)?;
    let kinv = Matrix6::from_diagonal(&Vector6::from_iterator(k.values().iter().map(|v| 1.0 / v)));
    Ok(symmetrize(&(j * kinv * j.transpose())))
}

/// Cartesian stiffness `(J · K_joint⁻¹ · Jᵀ)⁻¹` at the flange, world axes.
pub fn cartesian_stiffness(arm: &ArmModel, q: &JointConfig, k: &JointStiffness) -> Result<Matrix6<f64>> {
    spd_inverse(&cartesian_compliance(arm, q, k)?)
}

pub fn stiffness_from_jacobian(j: &Matrix6<f64>, k: &JointStiffness) -> Result<Matrix6<f64>> {
    spd_inverse(&compliance_from_jacobian(j, k)?)
}

/// `K1 + (C2 + Cs)⁻¹` with every input already referenced at the tool.
pub fn parallel_tool_stiffness(
    arm1_compliance: &Matrix6<f64>,
    arm2_compliance: &Matrix6<f64>,
    spring_compliance: &Matrix6<f64>,
) -> Result<Matrix6<f64>> {
    let k1 = spd_inverse(arm1_compliance)?;
    let chain = spd_inverse(&(arm2_compliance + spring_compliance))?;
    Ok(symmetrize(&(k1 + chain)))
}

fn check_rank(j: &Matrix6<f64>) -> Result<()> {
    let svd = SVD::new(*j, true, false);
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, s)| if *s < b.1 { (i, *s) } else { b });
    if sigma > MIN_SINGULAR_VALUE {
        return Ok(());
    }
    let u = svd.u.expect("requested U");
    let mut direction = [0.0; 6];
    direction.copy_from_slice(u.column(idx).as_slice());
    Err(Error::Singular {
        sigma,
        direction,
        index: None,
    })
}

fn singular_from(m: &Matrix6<f64>) -> Error {
    let eig = SymmetricEigen::new(symmetrize(m));
    let idx = eig.eigenvalues.imin();
    let mut direction = [0.0; 6];
    direction.copy_from_slice(eig.eigenvectors.column(idx).as_slice());
    Error::Singular {
        sigma: eig.eigenvalues[idx],
        direction,
        index: None,
    }
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky
/// factor; no pseudo-inverse fallback.
pub fn spd_inverse(m: &Matrix6<f64>) -> Result<Matrix6<f64>> {
    let sym = symmetrize(m);
    match sym.cholesky() {
        Some(c) => Ok(symmetrize(&c.inverse())),
        None => Err(singular_from(&sym)),
    }
}

pub fn symmetrize(m: &Matrix6<f64>) -> Matrix6<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use crate::kinematics::tests::{random_q, test_arm};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: &Matrix6<f64>, b: &Matrix6<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn nonsingular_q(arm: &ArmModel, rng: &mut impl Rng) -> JointConfig {
        loop {
            let q = random_q(arm, rng);
            let j = arm.jacobian(&q).unwrap();
            if SVD::new(j, false, false).singular_values.min() > 1e-2 {
                return q;
            }
        }
    }

    fn joint_k() -> JointStiffness {
        JointStiffness::new([8e6, 8e6, 5e6, 1.5e6, 1.5e6, 1e6]).unwrap()
    }

    #[test]
    fn unit_jacobian_gives_joint_stiffness() {
        let k = JointStiffness::new([1e6; 6]).unwrap();
        let kc = stiffness_from_jacobian(&Matrix6::identity(), &k).unwrap();
        assert!((kc[(0, 0)] - 1e6).abs() < 1e-6);
        assert!(rel(&kc, &(Matrix6::identity() * 1e6)) < 1e-12);
    }

    #[test]
    fn compliance_finite_difference_oracle() {
        // Apply small wrenches, deflect the joints and measure the
        // Cartesian deflection; the recovered stiffness must match.
        let arm = test_arm();
        let k = joint_k();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let q = nonsingular_q(&arm, &mut rng);
            let kc = cartesian_stiffness(&arm, &q, &k).unwrap();
            let j = arm.jacobian(&q).unwrap();
            let mut c = Matrix6::zeros();
            for i in 0..6 {
                let df = Vector6::from_fn(|r, _| if r == i { 1.0 } else { 0.0 });
                let tau = j.transpose() * df;
                let dq = Vector6::from_fn(|r, _| tau[r] / k.values()[r]);
                c.set_column(i, &(j * dq));
            }
            let recovered = c.try_inverse().unwrap();
            assert!(rel(&kc, &recovered) < 1e-3);
        }
    }

    #[test]
    fn stiffness_is_spd_on_random_postures() {
        let arm = test_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let q = nonsingular_q(&arm, &mut rng);
            let kc = cartesian_stiffness(&arm, &q, &joint_k()).unwrap();
            assert!((kc - kc.transpose()).amax() <= 1e-9 * kc.amax());
            assert!(SymmetricEigen::new(kc).eigenvalues.min() > 0.0);
        }
    }

    #[test]
    fn stiffening_a_joint_never_lowers_an_eigenvalue() {
        let arm = test_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..30 {
            let q = nonsingular_q(&arm, &mut rng);
            let base = joint_k();
            let mut bumped = *base.values();
            let idx = rng.random_range(0..6);
            bumped[idx] *= rng.random_range(1.1..5.0);
            let mut e0: Vec<f64> = SymmetricEigen::new(cartesian_stiffness(&arm, &q, &base).unwrap())
                .eigenvalues
                .iter()
                .copied()
                .collect();
            let mut e1: Vec<f64> = SymmetricEigen::new(
                cartesian_stiffness(&arm, &q, &JointStiffness::new(bumped).unwrap()).unwrap(),
            )
            .eigenvalues
            .iter()
            .copied()
            .collect();
            e0.sort_by(f64::total_cmp);
            e1.sort_by(f64::total_cmp);
            for (a, b) in e0.iter().zip(e1.iter()) {
                assert!(b >= &(a * (1.0 - 1e-9)), "{a} -> {b}");
            }
        }
    }

    #[test]
    fn singular_posture_is_reported() {
        let arm = test_arm();
        let err = cartesian_stiffness(&arm, &JointConfig::zeros(), &joint_k()).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn spring_validation() {
        let mut m = Matrix6::identity();
        m[(0, 1)] = 0.5;
        assert!(SpringModel::new(m).is_err());
        assert!(SpringModel::new(-Matrix6::<f64>::identity()).is_err());
        assert!(SpringModel::diagonal(5e7, 5e5).is_ok());
    }

    /// Builds the full 12-DOF quadratic network (tool body + arm-2 flange)
    /// and returns (Hessian, A, B, K1, Ks, K2).
    fn network(sys: &CoupledSystem, q1: &JointConfig, q2: &JointConfig) -> (DMatrix<f64>, Branches) {
        let b = sys.branches(q1, q2).unwrap();
        let t = b.tool_point();
        let a = crate::pose::shift_matrix(&(b.f1() - t));
        let bb = crate::pose::shift_matrix(&(b.f2() - t));
        let k1 = b.arm1_compliance.try_inverse().unwrap();
        let k2 = b.arm2_compliance.try_inverse().unwrap();
        let ks = b.spring_compliance.try_inverse().unwrap();
        let h11 = a.transpose() * k1 * a + bb.transpose() * ks * bb;
        let h12 = -bb.transpose() * ks;
        let h22 = ks + k2;
        let mut h = DMatrix::zeros(12, 12);
        h.view_mut((0, 0), (6, 6)).copy_from(&h11);
        h.view_mut((0, 6), (6, 6)).copy_from(&h12);
        h.view_mut((6, 0), (6, 6)).copy_from(&h12.transpose());
        h.view_mut((6, 6), (6, 6)).copy_from(&h22);
        (h, b)
    }

    fn cell() -> (CoupledSystem, JointConfig, JointConfig) {
        let cfg = presets::demo_config();
        let sys = cfg.system().unwrap();
        let (q1, q2) = cfg.seeds();
        (sys, q1, q2)
    }

    #[test]
    fn coupled_stiffness_matches_energy_network() {
        let (sys, q1, q2) = cell();
        let (h, _) = network(&sys, &q1, &q2);
        let lu = h.lu();
        let mut c = Matrix6::zeros();
        for i in 0..6 {
            let mut rhs = DVector::zeros(12);
            rhs[i] = 1.0;
            let x = lu.solve(&rhs).unwrap();
            for r in 0..6 {
                c[(r, i)] = x[r];
            }
        }
        let oracle = c.try_inverse().unwrap();
        let k = sys.coupled_stiffness(&q1, &q2).unwrap();
        assert!(rel(&k, &oracle) < 1e-3, "{}", rel(&k, &oracle));
    }

    #[test]
    fn tension_offset_produces_desired_spring_wrench() {
        let (sys, q1, q2) = cell();
        let w = Wrench::new(Vector3::new(1000.0, -40.0, 25.0), Vector3::new(3.0, -8.0, 2.0));
        let offset = sys.tension_offset(&q1, &q2, &w).unwrap();
        let (h, b) = network(&sys, &q1, &q2);
        let k2 = b.arm2_compliance.try_inverse().unwrap();
        let mut rhs = DVector::zeros(12);
        rhs.rows_mut(6, 6).copy_from(&(k2 * offset));
        let x = h.lu().solve(&rhs).unwrap();
        let dt = Vector6::from_iterator(x.rows(0, 6).iter().copied());
        let d2 = Vector6::from_iterator(x.rows(6, 6).iter().copied());
        let t = b.tool_point();
        let stretch = d2 - crate::pose::shift_matrix(&(b.f2() - t)) * dt;
        let ks = b.spring_compliance.try_inverse().unwrap();
        let spring_w = ks * stretch;
        assert!((spring_w - w.as_vector()).norm() / w.as_vector().norm() < 1e-6);
        // The equilibrium tool displacement equals the deflection model.
        let defl = sys.tool_deflection(&q1, &q2, &w).unwrap();
        assert!((defl - dt).norm() / dt.norm() < 1e-6);
    }

    #[test]
    fn deflection_two_routes_agree() {
        // C1·W at the tool equals C_tool applied to the blocked-chain wrench.
        let (sys, q1, q2) = cell();
        let w = Wrench::new(Vector3::new(1000.0, 0.0, 0.0), Vector3::zeros());
        let offset = sys.tension_offset(&q1, &q2, &w).unwrap();
        let b = sys.branches(&q1, &q2).unwrap();
        let t = b.tool_point();
        let chain = (b.arm2_compliance + b.spring_compliance).try_inverse().unwrap();
        let blocked = transport_wrench(&(chain * offset), &b.f2(), &t);
        let k_tool = sys.coupled_stiffness(&q1, &q2).unwrap();
        let route_a = k_tool.try_inverse().unwrap() * blocked;
        let route_b = sys.tool_deflection(&q1, &q2, &w).unwrap();
        assert!((route_a - route_b).norm() / route_b.norm() < 1e-8);
    }

    #[test]
    fn tension_linearity_and_zero() {
        let (sys, q1, q2) = cell();
        let z = sys.tension_offset(&q1, &q2, &Wrench::zero()).unwrap();
        assert_eq!(z, Vector6::zeros());
        assert_eq!(sys.predicted_tension(&q1, &q2, &Vector6::zeros()).unwrap(), Wrench::zero());
        let off = Vector6::new(1e-4, -2e-5, 3e-5, 1e-5, 0.0, -2e-5);
        let w1 = sys.predicted_tension(&q1, &q2, &off).unwrap().as_vector();
        let w2 = sys.predicted_tension(&q1, &q2, &(off * 2.0)).unwrap().as_vector();
        assert!((w2 - w1 * 2.0).norm() <= 1e-12 * w2.norm());
    }

    #[test]
    fn diagonal_loop_compliance_scales_force() {
        let b = Branches {
            flange1: Pose::identity(),
            flange2: Pose::identity(),
            tool: Pose::identity(),
            arm1_compliance: Matrix6::from_diagonal_element(1e-7),
            arm2_compliance: Matrix6::from_diagonal_element(2e-7),
            spring_compliance: Matrix6::from_diagonal_element(2e-8),
        };
        let c = b.loop_compliance()[(0, 0)];
        let w = Wrench::new(Vector3::new(1000.0, 0.0, 0.0), Vector3::zeros());
        let offset = b.loop_compliance() * w.as_vector();
        assert!((offset[0] - 1000.0 * c).abs() < 1e-18);
        assert_eq!(offset.rows(1, 5).amax(), 0.0);
    }

    #[test]
    fn closure_violation_reports_gap() {
        let (sys, q1, mut q2) = cell();
        q2.0[0] += 0.01;
        match sys.coupled_stiffness(&q1, &q2).unwrap_err() {
            Error::Closure { gap_m, .. } => assert!(gap_m > 1e-3),
            e => panic!("unexpected {e}"),
        }
    }
}
