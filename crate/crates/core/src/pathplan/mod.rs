//! Tool paths made of linear and circular segments, a G-code subset
//! reader, discretization and synchronized dual-robot setpoints.

mod discretize;
mod gcode;
mod sync;

pub use discretize::{discretize, linear_intervals};
pub use gcode::parse_gcode;
pub use sync::{check_continuity, plan_sync, PlanOptions, SetpointPair, SyncProgram, WorkspaceBox};

use nalgebra::{UnitQuaternion, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose;

/// Positional tolerance for segment continuity and arc geometry (m).
pub const GEOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Segment {
    Linear {
        start: Pose,
        end: Pose,
    },
    /// Circular arc: `start` rotated about the axis through `center` along
    /// `normal` by `sweep` radians (right-hand rule). Orientation is held.
    Arc {
        center: Vector3<f64>,
        normal: Vector3<f64>,
        start: Pose,
        sweep: f64,
    },
}

impl Segment {
    pub fn start(&self) -> Pose {
        match self {
            Segment::Linear { start, .. } | Segment::Arc { start, .. } => *start,
        }
    }

    pub fn end(&self) -> Pose {
        match self {
            Segment::Linear { end, .. } => *end,
            Segment::Arc { sweep, .. } => self.arc_pose(*sweep),
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Segment::Linear { start, end } => (end.position() - start.position()).norm(),
            Segment::Arc {
                center, start, sweep, ..
            } => (start.position() - center).norm() * sweep.abs(),
        }
    }

    /// Pose on an arc after rotating the start by `angle`.
    pub(crate) fn arc_pose(&self, angle: f64) -> Pose {
        match self {
            Segment::Arc {
                center,
                normal,
                start,
                ..
            } => {
                let rot = UnitQuaternion::from_axis_angle(&Unit::new_unchecked(*normal), angle);
                Pose::new(center + rot * (start.position() - center), start.orientation())
            }
            Segment::Linear { .. } => unreachable!("arc_pose on a linear segment"),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Segment::Linear { start, end } => {
                if !start.is_finite() || !end.is_finite() {
                    return Err(Error::invalid("linear segment has non-finite pose"));
                }
            }
            Segment::Arc {
                center,
                normal,
                start,
                sweep,
            } => {
                if !(start.is_finite() && sweep.is_finite() && center.iter().chain(normal.iter()).all(|v| v.is_finite())) {
                    return Err(Error::invalid("arc has non-finite data"));
                }
                if (normal.norm() - 1.0).abs() > GEOMETRY_TOL {
                    return Err(Error::invalid("arc normal must be unit length"));
                }
                let radial = start.position() - center;
                if radial.norm() <= GEOMETRY_TOL {
                    return Err(Error::invalid("arc radius is zero"));
                }
                if radial.dot(normal).abs() > GEOMETRY_TOL {
                    return Err(Error::invalid("arc start is not in the plane normal to the axis"));
                }
            }
        }
        Ok(())
    }
}

/// Ordered, C0-continuous chain of segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ToolPathRepr", into = "ToolPathRepr")]
pub struct ToolPath {
    segments: Vec<Segment>,
    feed_mm_min: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToolPathRepr {
    feed_mm_min: f64,
    segments: Vec<Segment>,
}

impl TryFrom<ToolPathRepr> for ToolPath {
    type Error = Error;
    fn try_from(r: ToolPathRepr) -> Result<Self> {
        ToolPath::new(r.segments, r.feed_mm_min)
    }
}

impl From<ToolPath> for ToolPathRepr {
    fn from(p: ToolPath) -> Self {
        ToolPathRepr {
            feed_mm_min: p.feed_mm_min,
            segments: p.segments,
        }
    }
}

impl ToolPath {
    pub fn new(segments: Vec<Segment>, feed_mm_min: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("tool path has no segments"));
        }
        if !(feed_mm_min.is_finite() && feed_mm_min >= 0.0) {
            return Err(Error::invalid("feed must be finite and >= 0"));
        }
        for s in &segments {
            s.validate()?;
        }
        for (i, w) in segments.windows(2).enumerate() {
            let gap = (w[1].start().position() - w[0].end().position()).norm();
            if gap > GEOMETRY_TOL {
                return Err(Error::invalid(format!(
                    "segment {} starts {gap:e} m away from the end of segment {i}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            segments,
            feed_mm_min,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn feed_mm_min(&self) -> f64 {
        self.feed_mm_min
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn start(&self) -> Pose {
        self.segments[0].start()
    }

    pub fn end(&self) -> Pose {
        self.segments[self.segments.len() - 1].end()
    }

    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(crate::io::pretty_json(&value))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse(format!("{}: {}", e.path(), e.inner())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p(x: f64, y: f64, z: f64) -> Pose {
        Pose::from_translation(Vector3::new(x, y, z))
    }

    #[test]
    fn rejects_gaps_and_bad_arcs() {
        let a = Segment::Linear {
            start: p(0.0, 0.0, 0.0),
            end: p(0.1, 0.0, 0.0),
        };
        let b = Segment::Linear {
            start: p(0.1, 1e-6, 0.0),
            end: p(0.2, 0.0, 0.0),
        };
        assert!(ToolPath::new(vec![a.clone(), b], 0.0).is_err());
        let bad = Segment::Arc {
            center: Vector3::zeros(),
            normal: Vector3::new(0.0, 0.0, 2.0),
            start: p(0.1, 0.0, 0.0),
            sweep: PI,
        };
        assert!(ToolPath::new(vec![bad], 0.0).is_err());
        assert!(ToolPath::new(vec![], 0.0).is_err());
    }

    #[test]
    fn arc_end_and_length() {
        let arc = Segment::Arc {
            center: Vector3::zeros(),
            normal: Vector3::z(),
            start: p(0.05, 0.0, 0.0),
            sweep: PI / 2.0,
        };
        assert!((arc.end().position() - Vector3::new(0.0, 0.05, 0.0)).norm() < 1e-15);
        assert!((arc.length() - 0.05 * PI / 2.0).abs() < 1e-15);
    }

    fn arb_path() -> impl Strategy<Value = ToolPath> {
        (
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..4),
            -6.0f64..6.0,
            0.001f64..0.2,
            0.0f64..5000.0,
        )
            .prop_map(|(pts, sweep, r, feed)| {
                let mut segs = Vec::new();
                let mut cur = Vector3::zeros();
                for (x, y, z) in pts {
                    let next = Vector3::new(x, y, z);
                    segs.push(Segment::Linear {
                        start: Pose::from_translation(cur),
                        end: Pose::from_translation(next),
                    });
                    cur = next;
                }
                segs.push(Segment::Arc {
                    center: cur - Vector3::new(r, 0.0, 0.0),
                    normal: Vector3::z(),
                    start: Pose::from_translation(cur),
                    sweep,
                });
                ToolPath::new(segs, feed).unwrap()
            })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_exact(path in arb_path()) {
            let back = ToolPath::from_json(&path.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, path);
        }
    }
}
