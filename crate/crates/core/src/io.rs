//! CSV exchange formats.
//!
//! Every file may start with `# key=value` metadata lines, followed by a
//! header row and data rows. Floats are written with 17 significant digits
//! so values survive a write/read cycle bit for bit.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use rustfft::num_complex::Complex64;
use serde::Deserialize;

use crate::compensation::{PathTrace, ResidualReport};
use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, DOF};
use crate::modal::{Axis, FrfMeta, FrfSeries, ImpactRecord, ShiftFit};
use crate::pathplan::{SetpointPair, SyncProgram};
use crate::pose::Pose;
use crate::stiffness::Wrench;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

fn write_meta<W: Write>(w: &mut W, key: &str, value: impl std::fmt::Display) -> Result<()> {
    writeln!(w, "# {key}={value}")?;
    Ok(())
}

/// Metadata lines and data rows of a CSV document.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
            } else if !trimmed.is_empty() {
                break;
            }
            body_start += line.len();
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(&text.as_bytes()[body_start..]);
        let header = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { meta, header, rows })
    }

    pub fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.header.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(Error::Parse(format!(
                "expected columns [{}], found [{}]",
                expected.join(","),
                self.header.join(",")
            )));
        }
        Ok(())
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Parse(format!("missing metadata `{key}`")))
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.meta_str(key)?, key)
    }

    pub fn meta_f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.meta.get(key) {
            Some(v) => parse_f64(v, key),
            None => Ok(default),
        }
    }

    /// Row `i` parsed as floats (1-based data line numbers in errors).
    pub fn floats(&self, i: usize) -> Result<Vec<f64>> {
        self.rows[i]
            .iter()
            .enumerate()
            .map(|(c, v)| parse_f64(v, &format!("row {}, column `{}`", i + 1, self.header[c])))
            .collect()
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: `{s}` is not a number")))
}

fn parse_vec(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split_whitespace().map(|v| parse_f64(v, what)).collect()
}

/// Indented JSON with arrays of scalars kept on one line.
pub fn pretty_json(value: &serde_json::Value) -> String {
    let mut out = String::new();
    write_compact_arrays(value, 0, &mut out);
    out.push('\n');
    out
}

fn write_compact_arrays(v: &serde_json::Value, depth: usize, out: &mut String) {
    use serde_json::Value;
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Array(items) if items.iter().all(|i| !i.is_array() && !i.is_object()) => {
            let parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
            out.push_str(&format!("[{}]", parts.join(", ")));
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_compact_arrays(item, depth + 1, out);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(map) => {
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                out.push_str(&format!("{}{}: ", pad(depth + 1), Value::String(key.clone())));
                write_compact_arrays(item, depth + 1, out);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

// FRF ----------------------------------------------------------------------

pub fn write_frf_csv<W: Write>(w: &mut W, frf: &FrfSeries) -> Result<()> {
    write_meta(w, "axis", frf.meta.axis)?;
    write_meta(w, "position", &frf.meta.position)?;
    write_meta(w, "tension_N", fmt_f64(frf.meta.tension))?;
    writeln!(w, "freq_hz,re,im")?;
    for (f, h) in frf.frequencies().iter().zip(frf.values()) {
        writeln!(w, "{}", join([*f, h.re, h.im]))?;
    }
    Ok(())
}

pub fn read_frf_csv(text: &str) -> Result<FrfSeries> {
    let t = Table::parse(text)?;
    t.expect_header(&["freq_hz", "re", "im"])?;
    let meta = FrfMeta {
        axis: t.meta_str("axis")?.parse()?,
        position: t.meta_str("position")?.to_string(),
        tension: t.meta_f64("tension_N")?,
    };
    let mut freqs = Vec::with_capacity(t.rows.len());
    let mut values = Vec::with_capacity(t.rows.len());
    for i in 0..t.rows.len() {
        let r = t.floats(i)?;
        freqs.push(r[0]);
        values.push(Complex64::new(r[1], r[2]));
    }
    FrfSeries::new(freqs, values, meta)
}

// Shift fit ----------------------------------------------------------------

/// Writes the fitted line and its points, one row per `(tension, freq)`.
pub fn write_shift_fit_csv<W: Write>(w: &mut W, fit: &ShiftFit, points: &[(f64, f64)]) -> Result<()> {
    if points.len() != fit.residuals.len() {
        return Err(Error::invalid("point count does not match the fit"));
    }
    write_meta(w, "slope_hz_per_n", fmt_f64(fit.slope))?;
    write_meta(w, "intercept_hz", fmt_f64(fit.intercept))?;
    match &fit.scope {
        crate::modal::FitScope::Global => write_meta(w, "scope", "global")?,
        crate::modal::FitScope::Position(p) => write_meta(w, "scope", format!("position:{p}"))?,
    }
    writeln!(w, "tension_N,freq_hz,fit_hz,residual_hz")?;
    for ((t, f), r) in points.iter().zip(&fit.residuals) {
        writeln!(w, "{}", join([*t, *f, fit.predict(*t), *r]))?;
    }
    Ok(())
}

// Impact records -----------------------------------------------------------

/// Metadata of an impact record, from header lines or a JSON sidecar.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactMeta {
    #[serde(default)]
    pub sample_rate_hz: Option<f64>,
    pub axis: Axis,
    pub position: String,
    #[serde(rename = "tension_N")]
    pub tension: f64,
}

const IMPACT_COLUMNS: [&str; 3] = ["time_s", "force_N", "accel_ms2"];

pub fn write_impact_csv<W: Write>(w: &mut W, rec: &ImpactRecord) -> Result<()> {
    write_meta(w, "sample_rate_hz", fmt_f64(rec.sample_rate))?;
    write_meta(w, "axis", rec.axis)?;
    write_meta(w, "position", &rec.position)?;
    write_meta(w, "tension_N", fmt_f64(rec.tension))?;
    writeln!(w, "{}", IMPACT_COLUMNS.join(","))?;
    for (i, (f, a)) in rec.force().iter().zip(rec.acceleration()).enumerate() {
        writeln!(w, "{}", join([i as f64 / rec.sample_rate, *f, *a]))?;
    }
    Ok(())
}

/// Reads an impact record. Metadata comes from `sidecar` (JSON) when
/// given, else from the header lines. Without an explicit sample rate it
/// is derived from the time column, which must then be uniform.
pub fn read_impact_csv(text: &str, sidecar: Option<&str>) -> Result<ImpactRecord> {
    let t = Table::parse(text)?;
    t.expect_header(&IMPACT_COLUMNS)?;
    let meta = match sidecar {
        Some(json) => {
            let de = &mut serde_json::Deserializer::from_str(json);
            serde_path_to_error::deserialize::<_, ImpactMeta>(de)
                .map_err(|e| Error::Parse(format!("sidecar `{}`: {}", e.path(), e.inner())))?
        }
        None => ImpactMeta {
            sample_rate_hz: t.meta.get("sample_rate_hz").map(|s| parse_f64(s, "sample_rate_hz")).transpose()?,
            axis: t.meta_str("axis")?.parse()?,
            position: t.meta_str("position")?.to_string(),
            tension: t.meta_f64("tension_N")?,
        },
    };
    let mut time = Vec::with_capacity(t.rows.len());
    let mut force = Vec::with_capacity(t.rows.len());
    let mut accel = Vec::with_capacity(t.rows.len());
    for i in 0..t.rows.len() {
        let r = t.floats(i)?;
        time.push(r[0]);
        force.push(r[1]);
        accel.push(r[2]);
    }
    let sample_rate = match meta.sample_rate_hz {
        Some(fs) => fs,
        None => sample_rate_from_time(&time)?,
    };
    ImpactRecord::new(sample_rate, force, accel, meta.axis, meta.position, meta.tension)
}

fn sample_rate_from_time(time: &[f64]) -> Result<f64> {
    if time.len() < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let dt = (time[time.len() - 1] - time[0]) / (time.len() - 1) as f64;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("time column must increase"));
    }
    for (i, w) in time.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return Err(Error::invalid(format!("time column is not uniformly sampled at row {}", i + 2)));
        }
    }
    Ok(1.0 / dt)
}

/// Loads `path`, using `<stem>.json` next to it as sidecar if present.
pub fn load_impact(path: &Path) -> Result<ImpactRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let sidecar_path = path.with_extension("json");
    let sidecar = if sidecar_path != path && sidecar_path.exists() {
        Some(std::fs::read_to_string(&sidecar_path)?)
    } else {
        None
    };
    read_impact_csv(&text, sidecar.as_deref())
}

// Setpoint programs --------------------------------------------------------

const POSE_GROUPS: [&str; 4] = ["tool", "r1", "r2_nominal", "r2_commanded"];
const POSE_FIELDS: [&str; 7] = ["x", "y", "z", "qw", "qx", "qy", "qz"];

fn program_header() -> Vec<String> {
    let mut h = vec!["index".to_string()];
    for g in POSE_GROUPS {
        h.extend(POSE_FIELDS.iter().map(|f| format!("{g}_{f}")));
    }
    for g in ["q1", "q2", "q2_nominal"] {
        h.extend((1..=DOF).map(|j| format!("{g}_{j}")));
    }
    h
}

fn pose_values(p: &Pose) -> [f64; 7] {
    let t = p.position();
    let q = p.quaternion_wxyz();
    [t.x, t.y, t.z, q[0], q[1], q[2], q[3]]
}

/// Columns: index, four poses as xyz + quaternion (w, x, y, z), then the
/// joint vectors q1, q2 (commanded) and q2_nominal.
pub fn write_program_csv<W: Write>(w: &mut W, program: &SyncProgram) -> Result<()> {
    let tw = program.tension.as_vector();
    write_meta(w, "tension_wrench", tw.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "))?;
    write_meta(w, "feed_mm_min", fmt_f64(program.feed_mm_min))?;
    write_meta(w, "chord_tol_m", fmt_f64(program.chord_tol))?;
    write_meta(w, "max_step_m", fmt_f64(program.max_step))?;
    writeln!(w, "{}", program_header().join(","))?;
    for p in program.pairs() {
        let mut vals = Vec::with_capacity(46);
        for pose in [&p.tool_pose, &p.robot1_flange, &p.robot2_flange_nominal, &p.robot2_flange_commanded] {
            vals.extend(pose_values(pose));
        }
        for q in [&p.q1, &p.q2, &p.q2_nominal] {
            vals.extend(q.0);
        }
        writeln!(w, "{},{}", p.index, join(vals))?;
    }
    Ok(())
}

pub fn read_program_csv(text: &str) -> Result<SyncProgram> {
    let t = Table::parse(text)?;
    let header = program_header();
    t.expect_header(&header.iter().map(String::as_str).collect::<Vec<_>>())?;
    let tw = parse_vec(t.meta_str("tension_wrench")?, "tension_wrench")?;
    if tw.len() != 6 {
        return Err(Error::Parse("tension_wrench needs six values".into()));
    }
    let tension = Wrench::new(Vector3::new(tw[0], tw[1], tw[2]), Vector3::new(tw[3], tw[4], tw[5]));
    let mut pairs = Vec::with_capacity(t.rows.len());
    for i in 0..t.rows.len() {
        let index: usize = t.rows[i][0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad index `{}`", i + 1, t.rows[i][0])))?;
        let v: Vec<f64> = t.floats(i)?;
        let pose = |g: usize| -> Result<Pose> {
            let o = 1 + 7 * g;
            Pose::from_parts([v[o], v[o + 1], v[o + 2]], [v[o + 3], v[o + 4], v[o + 5], v[o + 6]])
                .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))
        };
        let joints = |k: usize| {
            let o = 29 + DOF * k;
            let mut q = [0.0; DOF];
            q.copy_from_slice(&v[o..o + DOF]);
            JointConfig(q)
        };
        pairs.push(SetpointPair {
            index,
            tool_pose: pose(0)?,
            robot1_flange: pose(1)?,
            robot2_flange_nominal: pose(2)?,
            robot2_flange_commanded: pose(3)?,
            q1: joints(0),
            q2: joints(1),
            q2_nominal: joints(2),
        });
    }
    SyncProgram::new(
        pairs,
        tension,
        t.meta_f64("feed_mm_min")?,
        t.meta_f64("chord_tol_m")?,
        t.meta_f64("max_step_m")?,
    )
}

// Traces -------------------------------------------------------------------

pub fn write_trace_csv<W: Write>(w: &mut W, trace: &PathTrace) -> Result<()> {
    write_meta(w, "label", &trace.label)?;
    write_meta(w, "tension_N", fmt_f64(trace.tension))?;
    write_meta(w, "noise_sigma_m", fmt_f64(trace.noise_sigma))?;
    writeln!(w, "index,x_m,y_m,z_m")?;
    for (i, p) in trace.points.iter().enumerate() {
        writeln!(w, "{i},{}", join([p.x, p.y, p.z]))?;
    }
    Ok(())
}

pub fn read_trace_csv(text: &str) -> Result<PathTrace> {
    let t = Table::parse(text)?;
    t.expect_header(&["index", "x_m", "y_m", "z_m"])?;
    let points = (0..t.rows.len())
        .map(|i| t.floats(i).map(|r| Vector3::new(r[1], r[2], r[3])))
        .collect::<Result<Vec<_>>>()?;
    PathTrace::new(
        points,
        t.meta.get("label").cloned().unwrap_or_default(),
        t.meta_f64_or("tension_N", 0.0)?,
        t.meta_f64_or("noise_sigma_m", 0.0)?,
    )
}

/// Per-point deviation along the path index, with summary metadata.
pub fn write_residual_csv<W: Write>(w: &mut W, report: &ResidualReport) -> Result<()> {
    write_meta(w, "rms_m", fmt_f64(report.rms))?;
    write_meta(w, "max_m", fmt_f64(report.max))?;
    for (k, name) in ["x", "y", "z"].iter().enumerate() {
        let s = report.per_axis[k];
        write_meta(w, &format!("{name}_mean_m"), fmt_f64(s.mean))?;
        write_meta(w, &format!("{name}_std_m"), fmt_f64(s.std))?;
        write_meta(w, &format!("{name}_max_abs_m"), fmt_f64(s.max_abs))?;
    }
    writeln!(w, "index,dx_m,dy_m,dz_m,norm_m")?;
    for (i, d) in report.deviations.iter().enumerate() {
        writeln!(w, "{i},{}", join([d.x, d.y, d.z, d.norm()]))?;
    }
    Ok(())
}

/// Writes `contents` produced by `f` to `path`, creating parent dirs.
pub fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::{frf_synthesize, linear_grid, ModalModel};
    use proptest::prelude::*;

    fn to_string(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn frf_round_trip_is_bit_exact() {
        let m = ModalModel::new(Axis::X, 60.0, 0.03, 159.0, 0.0226).unwrap();
        let frf = frf_synthesize(&m, 500.0, &linear_grid(10.0, 400.0, 0.5).unwrap()).unwrap();
        let text = to_string(|w| write_frf_csv(w, &frf));
        assert!(text.starts_with("# axis=x\n"));
        assert_eq!(read_frf_csv(&text).unwrap(), frf);
    }

    #[test]
    fn impact_metadata_from_header_sidecar_or_time() {
        let mut force = vec![0.0; 64];
        force[3] = 100.0;
        let accel: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).sin()).collect();
        let rec = ImpactRecord::new(1000.0, force, accel, Axis::Y, "P2", 500.0).unwrap();
        let text = to_string(|w| write_impact_csv(w, &rec));
        assert_eq!(read_impact_csv(&text, None).unwrap(), rec);

        let bare: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
        let sidecar = r#"{"axis": "y", "position": "P2", "tension_N": 500.0}"#;
        let back = read_impact_csv(&bare, Some(sidecar)).unwrap();
        assert!((back.sample_rate - 1000.0).abs() < 1e-9);
        assert_eq!(back.force(), rec.force());

        assert!(read_impact_csv(&bare, None).is_err());
        assert!(read_impact_csv(&bare, Some(r#"{"axis":"y","position":"P2","tension_N":0,"gain":1}"#)).is_err());
    }

    #[test]
    fn table_reports_bad_numbers() {
        let err = read_trace_csv("index,x_m,y_m,z_m\n0,1,2,oops\n").unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.contains("z_m")), "{err}");
        assert!(read_trace_csv("a,b\n").is_err());
    }

    proptest! {
        #[test]
        fn trace_round_trip(points in proptest::collection::vec(proptest::array::uniform3(-1e3f64..1e3), 1..40),
                            sigma in 0.0f64..1e-3) {
            let pts = points.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
            let trace = PathTrace::new(pts, "tensioned run", 1000.0, sigma).unwrap();
            let text = to_string(|w| write_trace_csv(w, &trace));
            prop_assert_eq!(read_trace_csv(&text).unwrap(), trace);
        }
    }
}
