use std::f64::consts::PI;

use super::{Segment, ToolPath};
use crate::error::{Error, Result};
use crate::pose::Pose;

/// Number of equal intervals for a straight run of `length`: the smallest
/// power of two whose step does not exceed `max_step`.
pub fn linear_intervals(length: f64, max_step: f64) -> usize {
    if length <= 0.0 {
        return 0;
    }
    let ratio = length / max_step;
    let mut n = 1usize;
    while (n as f64) < ratio * (1.0 - 1e-12) {
        n *= 2;
    }
    n
}

fn arc_intervals(radius: f64, sweep: f64, chord_tol: f64, max_step: f64) -> usize {
    if sweep == 0.0 {
        return 0;
    }
    let by_chord = if chord_tol < radius {
        2.0 * (1.0 - chord_tol / radius).acos()
    } else {
        PI
    };
    let by_step = 2.0 * (max_step / (2.0 * radius)).min(1.0).asin();
    let step = by_chord.min(by_step);
    ((sweep.abs() / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

fn sample_segment(seg: &Segment, chord_tol: f64, max_step: f64) -> Vec<Pose> {
    match seg {
        Segment::Linear { start, end } => {
            let n = linear_intervals(seg.length(), max_step);
            let mut out = Vec::with_capacity(n + 1);
            out.push(*start);
            for i in 1..n {
                let t = i as f64 / n as f64;
                let pos = start.position() + (end.position() - start.position()) * t;
                let rot = start.orientation().slerp(&end.orientation(), t);
                out.push(Pose::new(pos, rot));
            }
            if n > 0 {
                out.push(*end);
            }
            out
        }
        Segment::Arc {
            center, start, sweep, ..
        } => {
            let r = (start.position() - center).norm();
            let n = arc_intervals(r, *sweep, chord_tol, max_step);
            let mut out = Vec::with_capacity(n + 1);
            out.push(*start);
            for i in 1..n {
                out.push(seg.arc_pose(sweep * i as f64 / n as f64));
            }
            if n > 0 {
                out.push(seg.end());
            }
            out
        }
    }
}

/// Samples the path so that arc chords deviate from the circle by at most
/// `chord_tol` and consecutive samples are at most `max_step` apart. The
/// first and last samples are the path endpoints; shared segment endpoints
/// appear once.
pub fn discretize(path: &ToolPath, chord_tol: f64, max_step: f64) -> Result<Vec<Pose>> {
    if !(chord_tol.is_finite() && chord_tol > 0.0 && max_step.is_finite() && max_step > 0.0) {
        return Err(Error::invalid("chord tolerance and max step must be > 0"));
    }
    let mut poses: Vec<Pose> = Vec::new();
    for seg in path.segments() {
        let samples = sample_segment(seg, chord_tol, max_step);
        let skip = usize::from(!poses.is_empty());
        poses.extend(samples.into_iter().skip(skip));
    }
    if let Some(last) = poses.last_mut() {
        *last = path.end();
    }
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathplan::parse_gcode;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn line(len: f64) -> ToolPath {
        ToolPath::new(
            vec![Segment::Linear {
                start: Pose::identity(),
                end: Pose::from_translation(Vector3::new(len, 0.0, 0.0)),
            }],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn quarter_steps_give_five_poses() {
        let l = 0.1;
        let poses = discretize(&line(l), 1e-5, l / 4.0).unwrap();
        assert_eq!(poses.len(), 5);
        for (i, p) in poses.iter().enumerate() {
            assert!((p.position().x - l * i as f64 / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn arc_chordal_deviation_bounded() {
        let path = parse_gcode("G1 X50\nG3 X-50 Y0 I-50 J0").unwrap();
        let tol = 0.01e-3;
        let r = 0.05;
        let poses = discretize(&path, tol, 1.0).unwrap();
        let arc: Vec<_> = poses.iter().skip(1).collect();
        let max_angle = 2.0 * (1.0 - tol / r).acos();
        for w in arc.windows(2) {
            let (a, b) = (w[0].position(), w[1].position());
            let ang = a.angle(&b);
            assert!(ang <= max_angle + 1e-12);
            // Distance from chord midpoint to the exact circle.
            let mid = (a + b) * 0.5;
            assert!(r - mid.norm() <= tol + 1e-15);
        }
    }

    #[test]
    fn zero_sweep_arc_emits_start_once() {
        let path = ToolPath::new(
            vec![Segment::Arc {
                center: Vector3::zeros(),
                normal: Vector3::z(),
                start: Pose::from_translation(Vector3::new(0.05, 0.0, 0.0)),
                sweep: 0.0,
            }],
            0.0,
        )
        .unwrap();
        assert_eq!(discretize(&path, 1e-5, 1e-3).unwrap().len(), 1);
    }

    #[test]
    fn rejects_non_positive_parameters() {
        assert!(discretize(&line(0.1), 0.0, 0.01).is_err());
        assert!(discretize(&line(0.1), 1e-5, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn steps_and_endpoints(max_step in 1e-4f64..0.05, tol in 1e-6f64..1e-3) {
            let path = parse_gcode("G1 X70 Y0\nG3 X70 Y60 I0 J30\nG1 X0 Y60").unwrap();
            let poses = discretize(&path, tol, max_step).unwrap();
            prop_assert_eq!(poses[0], path.start());
            prop_assert_eq!(*poses.last().unwrap(), path.end());
            for w in poses.windows(2) {
                prop_assert!((w[1].position() - w[0].position()).norm() <= max_step * (1.0 + 1e-9));
            }
        }

        #[test]
        fn halving_step_doubles_linear_intervals(len in 1e-3f64..1.0, frac in 1e-3f64..1.0) {
            let max_step = len * frac;
            let coarse = discretize(&line(len), 1e-5, max_step).unwrap();
            let fine = discretize(&line(len), 1e-5, max_step / 2.0).unwrap();
            prop_assert!(fine.len() > 2 * (coarse.len() - 1));
            prop_assert_eq!(fine[0], coarse[0]);
            prop_assert_eq!(fine.last(), coarse.last());
        }
    }
}
