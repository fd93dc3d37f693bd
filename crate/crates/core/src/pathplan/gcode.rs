//! G-code subset: G0/G1 linear moves, G2/G3 XY-plane arcs with I/J centre
//! offsets, X/Y/Z/F words, N line numbers and `( )` / `;` comments. G17,
//! G21 and G90 are accepted as no-ops. Coordinates are absolute mm.

use std::f64::consts::TAU;

use nalgebra::Vector3;

use super::{Segment, ToolPath};
use crate::error::{Error, Result};
use crate::pose::Pose;

/// Start and end radii of an arc may differ by at most this much (m).
const ARC_RADIUS_TOL: f64 = 10e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Motion {
    Rapid,
    Linear,
    Clockwise,
    CounterClockwise,
}

#[derive(Default)]
struct Words {
    motion: Option<Motion>,
    xyz: [Option<f64>; 3],
    ijk: [Option<f64>; 3],
    feed: Option<f64>,
}

fn strip_comments(line: &str) -> String {
    let line = line.split(';').next().unwrap_or("");
    let mut out = String::with_capacity(line.len());
    let mut depth = 0usize;
    for c in line.chars() {
        match c {
            '(' => depth += 1,
            ')' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<(char, f64, String)>> {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    let mut words = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if !c.is_ascii_alphabetic() {
            return Err(Error::UnsupportedGcode {
                line: line_no,
                word: c.to_string(),
            });
        }
        let letter = c.to_ascii_uppercase();
        i += 1;
        while i < chars.len() && chars[i] == ' ' {
            i += 1;
        }
        let start = i;
        while i < chars.len() && (chars[i].is_ascii_digit() || matches!(chars[i], '.' | '+' | '-')) {
            i += 1;
        }
        let num: String = chars[start..i].iter().collect();
        let word = format!("{letter}{num}");
        let value: f64 = num.parse().map_err(|_| Error::UnsupportedGcode {
            line: line_no,
            word: word.clone(),
        })?;
        if !value.is_finite() {
            return Err(Error::UnsupportedGcode { line: line_no, word });
        }
        words.push((letter, value, word));
    }
    Ok(words)
}

fn read_words(line: &str, line_no: usize) -> Result<Words> {
    let mut w = Words::default();
    for (letter, value, word) in tokenize(line, line_no)? {
        let unsupported = || Error::UnsupportedGcode {
            line: line_no,
            word: word.clone(),
        };
        match letter {
            'G' => {
                if value.fract() != 0.0 {
                    return Err(unsupported());
                }
                match value as i64 {
                    0 => w.motion = Some(Motion::Rapid),
                    1 => w.motion = Some(Motion::Linear),
                    2 => w.motion = Some(Motion::Clockwise),
                    3 => w.motion = Some(Motion::CounterClockwise),
                    17 | 21 | 90 => {}
                    _ => return Err(unsupported()),
                }
            }
            'X' => w.xyz[0] = Some(value),
            'Y' => w.xyz[1] = Some(value),
            'Z' => w.xyz[2] = Some(value),
            'I' => w.ijk[0] = Some(value),
            'J' => w.ijk[1] = Some(value),
            'K' => w.ijk[2] = Some(value),
            'F' => {
                if value < 0.0 {
                    return Err(unsupported());
                }
                w.feed = Some(value)
            }
            'N' => {}
            _ => return Err(unsupported()),
        }
    }
    Ok(w)
}

fn mm(v: f64) -> f64 {
    v / 1000.0
}

/// Parses the supported G-code subset into a [`ToolPath`] in metres,
/// starting from the origin with identity tool orientation. Zero-length
/// linear moves are dropped. An arc's end point is taken from its centre
/// and sweep, so later moves continue from the exact circle.
pub fn parse_gcode(text: &str) -> Result<ToolPath> {
    if text.trim().is_empty() {
        return Err(Error::invalid("g-code text is empty"));
    }
    let mut current = Vector3::zeros();
    let mut motion: Option<Motion> = None;
    let mut feed = 0.0;
    let mut segments = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let words = read_words(&strip_comments(raw), line_no)?;
        if let Some(f) = words.feed {
            feed = f;
        }
        if words.motion.is_some() {
            motion = words.motion;
        }
        let has_xyz = words.xyz.iter().any(Option::is_some);
        let has_ijk = words.ijk.iter().any(Option::is_some);
        if !has_xyz && !has_ijk {
            continue;
        }
        let Some(mode) = motion else {
            return Err(Error::UnsupportedGcode {
                line: line_no,
                word: "coordinates without a motion mode".into(),
            });
        };
        let mut target = current;
        for (k, v) in words.xyz.iter().enumerate() {
            if let Some(v) = v {
                target[k] = mm(*v);
            }
        }
        match mode {
            Motion::Rapid | Motion::Linear => {
                if has_ijk {
                    return Err(Error::UnsupportedGcode {
                        line: line_no,
                        word: "I/J/K on a linear move".into(),
                    });
                }
                if target != current {
                    segments.push(Segment::Linear {
                        start: Pose::from_translation(current),
                        end: Pose::from_translation(target),
                    });
                    current = target;
                }
            }
            Motion::Clockwise | Motion::CounterClockwise => {
                let arc = build_arc(current, target, &words, mode, line_no)?;
                current = arc.end().position();
                segments.push(arc);
            }
        }
    }
    ToolPath::new(segments, feed)
}

fn build_arc(start: Vector3<f64>, end: Vector3<f64>, words: &Words, mode: Motion, line: usize) -> Result<Segment> {
    let malformed = |reason: String| Error::MalformedArc { line, reason };
    if words.ijk[2].is_some_and(|k| k != 0.0) {
        return Err(Error::UnsupportedGcode {
            line,
            word: "K offset outside the XY plane".into(),
        });
    }
    if words.ijk[0].is_none() && words.ijk[1].is_none() {
        return Err(malformed("arc needs an I or J centre offset".into()));
    }
    if (end.z - start.z).abs() > ARC_RADIUS_TOL {
        return Err(malformed("helical arcs are not supported".into()));
    }
    let center = Vector3::new(
        start.x + mm(words.ijk[0].unwrap_or(0.0)),
        start.y + mm(words.ijk[1].unwrap_or(0.0)),
        start.z,
    );
    let rs = (start - center).xy().norm();
    let re = (end - center).xy().norm();
    if rs <= ARC_RADIUS_TOL {
        return Err(malformed("arc radius is zero".into()));
    }
    if (rs - re).abs() > ARC_RADIUS_TOL {
        return Err(malformed(format!(
            "start radius {:.6} mm and end radius {:.6} mm differ",
            rs * 1e3,
            re * 1e3
        )));
    }
    let a0 = (start.y - center.y).atan2(start.x - center.x);
    let a1 = (end.y - center.y).atan2(end.x - center.x);
    let closed = (end - start).xy().norm() <= ARC_RADIUS_TOL;
    let sweep = match mode {
        Motion::CounterClockwise => {
            let s = (a1 - a0).rem_euclid(TAU);
            if closed || s == 0.0 {
                TAU
            } else {
                s
            }
        }
        _ => {
            let s = (a0 - a1).rem_euclid(TAU);
            if closed || s == 0.0 {
                -TAU
            } else {
                -s
            }
        }
    };
    Ok(Segment::Arc {
        center,
        normal: Vector3::z(),
        start: Pose::from_translation(start),
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_linear_move() {
        let p = parse_gcode("G1 X100 Y0 Z0").unwrap();
        assert_eq!(p.segments().len(), 1);
        assert!((p.length() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn full_clockwise_circle() {
        let p = parse_gcode("G2 X0 Y0 I-50 J0").unwrap();
        assert_eq!(p.segments().len(), 1);
        match &p.segments()[0] {
            Segment::Arc { center, sweep, start, .. } => {
                assert_eq!(*sweep, -TAU);
                assert!(((start.position() - center).norm() - 0.05).abs() < 1e-15);
            }
            s => panic!("expected arc, got {s:?}"),
        }
    }

    #[test]
    fn two_lines_and_a_semicircle() {
        let text = "G21 G90 G17\nG1 X70 Y0 F1200\nG3 X70 Y60 I0 J30\nG1 X0 Y60\n";
        let p = parse_gcode(text).unwrap();
        assert_eq!(p.segments().len(), 3);
        let expected = 0.070 + PI * 0.030 + 0.070;
        assert!((p.length() - expected).abs() < 1e-6);
        assert_eq!(p.feed_mm_min(), 1200.0);
        assert!((p.end().position() - Vector3::new(0.0, 0.06, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn modal_motion_persists_and_comments_are_ignored() {
        let text = "(start)\nG1 X10 ; first\nY10\nN30 X0 (back)\n";
        let p = parse_gcode(text).unwrap();
        assert_eq!(p.segments().len(), 3);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_gcode("G1 X10\nM3 S1000\n").unwrap_err();
        assert_eq!(
            err,
            Error::UnsupportedGcode {
                line: 2,
                word: "M3".into()
            }
        );
        let err = parse_gcode("G1 X10\n\nG2 X30 Y0 I5 J0\n").unwrap_err();
        assert!(matches!(err, Error::MalformedArc { line: 3, .. }));
        assert!(matches!(parse_gcode("X10"), Err(Error::UnsupportedGcode { line: 1, .. })));
        assert!(parse_gcode("   \n").is_err());
    }

    #[test]
    fn radius_tolerance_is_ten_microns() {
        // End radius 50.005 mm: accepted. 50.02 mm: rejected.
        assert!(parse_gcode("G1 X50\nG3 X-50.005 Y0 I-50 J0").is_ok());
        assert!(matches!(
            parse_gcode("G1 X50\nG3 X-50.02 Y0 I-50 J0"),
            Err(Error::MalformedArc { line: 2, .. })
        ));
    }
}
