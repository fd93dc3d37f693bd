//! Tension-induced tool deformation and its rigid-transform compensation.
//!
//! Traces from the same program are compared sample by sample: the fitted
//! transform is the least-squares rotation + translation between the
//! untensioned reference and the tensioned trace.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kinematics::JointConfig;
use crate::par::{self, Execution};
use crate::pathplan::SyncProgram;
use crate::stiffness::{CoupledSystem, Wrench};

/// Ordered tool positions (m) from one run of a program.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTrace {
    pub points: Vec<Vector3<f64>>,
    pub label: String,
    /// Tension magnitude during the run (N).
    pub tension: f64,
    /// 1-σ measurement noise of the points (m).
    pub noise_sigma: f64,
}

impl PathTrace {
    pub fn new(points: Vec<Vector3<f64>>, label: impl Into<String>, tension: f64, noise_sigma: f64) -> Result<Self> {
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid("trace contains non-finite points"));
        }
        if !(tension.is_finite() && noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::invalid("trace metadata must be finite"));
        }
        Ok(Self {
            points,
            label: label.into(),
            tension,
            noise_sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nominal tool positions of a program.
    pub fn nominal(program: &SyncProgram) -> Self {
        Self {
            points: program.pairs().iter().map(|p| p.tool_pose.position()).collect(),
            label: "nominal".into(),
            tension: 0.0,
            noise_sigma: 0.0,
        }
    }

    /// Copy with zero-mean Gaussian noise of standard deviation `sigma`
    /// added to every coordinate.
    pub fn with_noise(&self, sigma: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = self
            .points
            .iter()
            .map(|p| p + Vector3::from_fn(|_, _| normal.sample(&mut rng)))
            .collect();
        Ok(Self {
            points,
            label: self.label.clone(),
            tension: self.tension,
            noise_sigma: (self.noise_sigma.powi(2) + sigma * sigma).sqrt(),
        })
    }
}

/// Proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_inverse(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    pub fn apply_trace(&self, trace: &PathTrace) -> PathTrace {
        PathTrace {
            points: trace.points.iter().map(|p| self.apply(p)).collect(),
            ..trace.clone()
        }
    }
}

/// Tool deflection along a program under its tension, added to the
/// nominal tool positions.
pub fn simulate_deformation(sys: &CoupledSystem, program: &SyncProgram, exec: Execution) -> Result<PathTrace> {
    let tension = program.tension;
    let points = par::map(exec, program.pairs(), |pair| {
        let d = sys
            .tool_deflection(&pair.q1, &pair.q2_nominal, &tension)
            .map_err(|e| e.with_index(pair.index))?;
        Ok(pair.tool_pose.position() + d.fixed_rows::<3>(0))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    PathTrace::new(points, "simulated", tension.force.norm(), 0.0)
}

/// A system whose arm compliance was rescaled so that a tension of given
/// magnitude displaces the tool by a prescribed vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedScenario {
    pub system: CoupledSystem,
    /// Force at the arm-2 flange, no moment.
    pub tension: Wrench,
    /// Factor applied to both arms' joint compliance.
    pub compliance_scale: f64,
}

/// Fits a uniform joint-compliance scale for both arms and the direction
/// of a force of `magnitude` (N) at the arm-2 flange so that the tool
/// translates by exactly `target` (m) at the posture `(q1, q2)`.
pub fn calibrate_deformation(
    sys: &CoupledSystem,
    q1: &JointConfig,
    q2: &JointConfig,
    magnitude: f64,
    target: Vector3<f64>,
) -> Result<CalibratedScenario> {
    if !(magnitude.is_finite() && magnitude > 0.0) {
        return Err(Error::invalid("tension magnitude must be > 0"));
    }
    if !(target.iter().all(|v| v.is_finite()) && target.norm() > 0.0) {
        return Err(Error::invalid("target displacement must be finite and nonzero"));
    }
    let mut per_force = Matrix3::zeros();
    for k in 0..3 {
        let d = sys.tool_deflection(q1, q2, &Wrench::new(Vector3::ith(k, 1.0), Vector3::zeros()))?;
        per_force.set_column(k, &d.fixed_rows::<3>(0));
    }
    let v = per_force
        .lu()
        .solve(&target)
        .ok_or_else(|| Error::DegenerateGeometry("flange force does not span the tool translations".into()))?;
    let compliance_scale = v.norm() / magnitude;
    let stiffness_scale = 1.0 / compliance_scale;
    let mut system = sys.clone();
    system.joint_stiffness1 = sys.joint_stiffness1.scaled(stiffness_scale)?;
    system.joint_stiffness2 = sys.joint_stiffness2.scaled(stiffness_scale)?;
    Ok(CalibratedScenario {
        system,
        tension: Wrench::new(v.normalize() * magnitude, Vector3::zeros()),
        compliance_scale,
    })
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Least-squares rigid transform taking `reference` onto `measured`,
/// matched by index, with reflections excluded.
pub fn fit_rigid(reference: &PathTrace, measured: &PathTrace) -> Result<RigidTransform> {
    if reference.len() != measured.len() {
        return Err(Error::invalid(format!(
            "trace lengths differ: {} vs {}",
            reference.len(),
            measured.len()
        )));
    }
    if reference.len() < 3 {
        return Err(Error::invalid("rigid fit needs at least three points"));
    }
    let c_ref = centroid(&reference.points);
    let c_meas = centroid(&measured.points);

    let mut spread = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    for (r, m) in reference.points.iter().zip(&measured.points) {
        let a = r - c_ref;
        let b = m - c_meas;
        spread += a * a.transpose();
        cross += a * b.transpose();
    }
    let sv = SVD::new(spread, false, false).singular_values;
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    if s[0] == 0.0 || s[1] <= 1e-12 * s[0] {
        return Err(Error::DegenerateGeometry("reference points are collinear".into()));
    }

    let svd = SVD::new(cross, true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested Vᵀ").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rot = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rot));
    let translation = c_meas - rotation * c_ref;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Maps a measured trace back through `transform`: `R⁻¹·(p − t)`.
pub fn compensate(measured: &PathTrace, transform: &RigidTransform) -> PathTrace {
    PathTrace {
        points: measured.points.iter().map(|p| transform.apply_inverse(p)).collect(),
        label: format!("{} (compensated)", measured.label),
        ..measured.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisStats {
    pub mean: f64,
    pub std: f64,
    pub max_abs: f64,
}

/// Per-point deviation of a measured trace from a reference (m).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub deviations: Vec<Vector3<f64>>,
    pub rms: f64,
    pub max: f64,
    pub per_axis: [AxisStats; 3],
}

pub fn residual_report(reference: &PathTrace, measured: &PathTrace) -> Result<ResidualReport> {
    if reference.len() != measured.len() {
        return Err(Error::invalid(format!(
            "trace lengths differ: {} vs {}",
            reference.len(),
            measured.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::invalid("traces are empty"));
    }
    let deviations: Vec<Vector3<f64>> = measured.points.iter().zip(&reference.points).map(|(m, r)| m - r).collect();
    let n = deviations.len() as f64;
    let rms = (deviations.iter().map(|d| d.norm_squared()).sum::<f64>() / n).sqrt();
    let max = deviations.iter().fold(0.0f64, |m, d| m.max(d.norm()));
    let mut per_axis = [AxisStats::default(); 3];
    for (k, stats) in per_axis.iter_mut().enumerate() {
        let mean = deviations.iter().map(|d| d[k]).sum::<f64>() / n;
        let var = deviations.iter().map(|d| (d[k] - mean).powi(2)).sum::<f64>() / n;
        *stats = AxisStats {
            mean,
            std: var.sqrt(),
            max_abs: deviations.iter().fold(0.0f64, |m, d| m.max(d[k].abs())),
        };
    }
    Ok(ResidualReport {
        deviations,
        rms,
        max,
        per_axis,
    })
}

/// Outcome of one noisy compensation trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub rms_before: f64,
    pub rms_after: f64,
    pub transform: RigidTransform,
}

/// Adds noise of `sigma` to `deformed` in `trials` independent seeded
/// trials, fits and compensates each against `reference`. Trial `i` uses
/// seed `seed + i`, so results do not depend on the execution strategy.
pub fn noise_trials(
    reference: &PathTrace,
    deformed: &PathTrace,
    sigma: f64,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<TrialOutcome>> {
    par::map_range(exec, trials, |i| {
        let noisy = deformed.with_noise(sigma, seed.wrapping_add(i as u64))?;
        let transform = fit_rigid(reference, &noisy)?;
        let before = residual_report(reference, &noisy)?.rms;
        let after = residual_report(reference, &compensate(&noisy, &transform))?.rms;
        Ok(TrialOutcome {
            rms_before: before,
            rms_after: after,
            transform,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(points: Vec<Vector3<f64>>) -> PathTrace {
        PathTrace::new(points, "t", 0.0, 0.0).unwrap()
    }

    fn grid_trace(n: usize) -> PathTrace {
        trace(
            (0..n)
                .map(|i| {
                    let t = i as f64 / n as f64 * std::f64::consts::TAU;
                    Vector3::new(0.05 * t.cos() + 0.001 * i as f64, 0.04 * t.sin(), 0.01 * (2.0 * t).sin())
                })
                .collect(),
        )
    }

    #[test]
    fn identical_traces_give_identity() {
        let r = grid_trace(50);
        let t = fit_rigid(&r, &r).unwrap();
        assert!(t.rotation.angle() < 1e-12);
        assert!(t.translation.norm() < 1e-15);
        let rep = residual_report(&r, &r).unwrap();
        assert_eq!(rep.rms, 0.0);
        assert_eq!(rep.max, 0.0);
    }

    #[test]
    fn pure_translation() {
        let r = grid_trace(60);
        let shift = Vector3::new(0.0, 0.002, 0.0012);
        let m = trace(r.points.iter().map(|p| p + shift).collect());
        let t = fit_rigid(&r, &m).unwrap();
        assert!((t.translation - shift).norm() < 1e-9);
        assert!(t.rotation.angle() < 1e-9);
        let rep = residual_report(&r, &m).unwrap();
        for k in 0..3 {
            assert!((rep.per_axis[k].mean - shift[k]).abs() < 1e-15);
            assert!(rep.per_axis[k].std < 1e-15);
        }
    }

    #[test]
    fn noisy_recovery() {
        let r = grid_trace(100);
        let truth = RigidTransform {
            rotation: UnitQuaternion::from_euler_angles(2e-3, -1e-3, 3e-3),
            translation: Vector3::new(0.4e-3, 2.0e-3, 1.2e-3),
        };
        let sigma = 15e-6;
        let m = truth.apply_trace(&r).with_noise(sigma, 42).unwrap();
        let t = fit_rigid(&r, &m).unwrap();
        // Translation is compared at the centroid, where it decouples
        // from rotation error.
        let c = centroid(&r.points);
        let err = (t.apply(&c) - truth.apply(&c)).norm();
        assert!(err < 3.0 * sigma / 10.0);
        assert!(t.rotation.angle_to(&truth.rotation) < 1e-4);
    }

    #[test]
    fn noisy_compensation_residual_within_two_sigma() {
        let r = grid_trace(100);
        let truth = RigidTransform {
            rotation: UnitQuaternion::from_euler_angles(1e-3, 0.0, -2e-3),
            translation: Vector3::new(0.0, 2.0e-3, 1.2e-3),
        };
        let sigma = 15e-6;
        let outcomes = noise_trials(&r, &truth.apply_trace(&r), sigma, 100, 7, Execution::default()).unwrap();
        for o in &outcomes {
            assert!(o.rms_after <= 2.0 * sigma);
            assert!(o.rms_after <= o.rms_before);
        }
    }

    #[test]
    fn noiseless_round_trip_is_exact() {
        let r = grid_trace(80);
        let truth = RigidTransform {
            rotation: UnitQuaternion::from_euler_angles(0.1, -0.2, 0.3),
            translation: Vector3::new(0.1, -0.2, 0.05),
        };
        let m = truth.apply_trace(&r);
        let fitted = fit_rigid(&r, &m).unwrap();
        let back = compensate(&m, &fitted);
        assert!(residual_report(&r, &back).unwrap().rms < 1e-12);
    }

    #[test]
    fn errors() {
        let line = trace((0..10).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0)).collect());
        assert!(matches!(fit_rigid(&line, &line), Err(Error::DegenerateGeometry(_))));
        let a = grid_trace(10);
        let b = grid_trace(11);
        assert!(matches!(fit_rigid(&a, &b), Err(Error::InvalidInput(_))));
        assert!(matches!(residual_report(&a, &b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn trials_are_execution_independent() {
        let r = grid_trace(40);
        let m = trace(r.points.iter().map(|p| p + Vector3::new(0.0, 1e-3, 0.0)).collect());
        let a = noise_trials(&r, &m, 15e-6, 16, 3, Execution::Sequential).unwrap();
        let b = noise_trials(&r, &m, 15e-6, 16, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (-3.0f64..3.0, -1.5f64..1.5, -3.0f64..3.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(
            |(r, p, y, x, yy, z)| RigidTransform {
                rotation: UnitQuaternion::from_euler_angles(r, p, y),
                translation: Vector3::new(x, yy, z),
            },
        )
    }

    proptest! {
        #[test]
        fn invariant_to_common_motion(rel in arb_transform(), common in arb_transform(), seed in 0u64..1000) {
            let r = grid_trace(30).with_noise(1e-3, seed).unwrap();
            let m = rel.apply_trace(&r).with_noise(1e-4, seed + 1).unwrap();
            let t0 = fit_rigid(&r, &m).unwrap();
            let t1 = fit_rigid(&common.apply_trace(&r), &common.apply_trace(&m)).unwrap();
            // Relative motion seen in the common frame: C·T0·C⁻¹.
            for p in &r.points {
                let q = common.apply(p);
                let lhs = t1.apply(&q);
                let rhs = common.apply(&t0.apply(p));
                prop_assert!((lhs - rhs).norm() < 1e-9);
            }
        }

        #[test]
        fn compensation_never_increases_rms(rel in arb_transform(), seed in 0u64..1000) {
            let r = grid_trace(25);
            let m = rel.apply_trace(&r).with_noise(1e-3, seed).unwrap();
            let t = fit_rigid(&r, &m).unwrap();
            let before = residual_report(&r, &m).unwrap().rms;
            let after = residual_report(&r, &compensate(&m, &t)).unwrap().rms;
            prop_assert!(after <= before + 1e-15);
            prop_assert!((t.rotation.to_rotation_matrix().matrix().determinant() - 1.0).abs() < 1e-9);
        }
    }
}
