//! Lumped per-axis modal model with a tension-dependent natural frequency,
//! FRF synthesis, H1 estimation from impact records, peak picking and the
//! linear shift-versus-tension fit.

mod fit;
mod h1;
mod peaks;
mod sim;

pub use fit::{fit_shift, FitScope, ShiftFit};
pub use h1::{h1_estimate, ForceWindow, H1Options, ImpactRecord, ResponseWindow};
pub use peaks::{peak_pick, Peak};
pub use sim::{identify_shift, simulate_impact, ImpactSim, ShiftStudy};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::invalid(format!("unknown axis `{other}`"))),
        }
    }
}

/// Single-axis mass-spring-damper whose natural frequency rises linearly
/// with coupling tension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModalModelRepr", into = "ModalModelRepr")]
pub struct ModalModel {
    pub axis: Axis,
    pub mass: f64,
    pub damping_ratio: f64,
    pub f0: f64,
    pub sensitivity: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModalModelRepr {
    axis: Axis,
    mass_kg: f64,
    damping_ratio: f64,
    f0_hz: f64,
    sensitivity_hz_per_n: f64,
}

impl TryFrom<ModalModelRepr> for ModalModel {
    type Error = Error;
    fn try_from(r: ModalModelRepr) -> Result<Self> {
        ModalModel::new(r.axis, r.mass_kg, r.damping_ratio, r.f0_hz, r.sensitivity_hz_per_n)
    }
}

impl From<ModalModel> for ModalModelRepr {
    fn from(m: ModalModel) -> Self {
        ModalModelRepr {
            axis: m.axis,
            mass_kg: m.mass,
            damping_ratio: m.damping_ratio,
            f0_hz: m.f0,
            sensitivity_hz_per_n: m.sensitivity,
        }
    }
}

impl ModalModel {
    pub fn new(axis: Axis, mass: f64, damping_ratio: f64, f0: f64, sensitivity: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::invalid("modal mass must be > 0"));
        }
        if !(damping_ratio.is_finite() && (0.0..1.0).contains(&damping_ratio)) {
            return Err(Error::invalid("damping ratio must lie in [0, 1)"));
        }
        if !(f0.is_finite() && f0 > 0.0) {
            return Err(Error::invalid("f0 must be > 0"));
        }
        if !sensitivity.is_finite() {
            return Err(Error::invalid("sensitivity must be finite"));
        }
        Ok(Self {
            axis,
            mass,
            damping_ratio,
            f0,
            sensitivity,
        })
    }

    /// `f0 + sensitivity · tension` in Hz.
    pub fn natural_frequency(&self, tension: f64) -> Result<f64> {
        if !(tension.is_finite() && tension >= 0.0) {
            return Err(Error::invalid(format!("tension {tension} N must be finite and >= 0")));
        }
        let f = self.f0 + self.sensitivity * tension;
        if f <= 0.0 {
            return Err(Error::invalid(format!("model predicts non-positive frequency at {tension} N")));
        }
        Ok(f)
    }

    /// Effective stiffness `m · (2π f_n)²` in N/m.
    pub fn effective_stiffness(&self, tension: f64) -> Result<f64> {
        let w = 2.0 * PI * self.natural_frequency(tension)?;
        Ok(self.mass * w * w)
    }

    /// Viscous damping `2ζ√(k m)` in N·s/m.
    pub fn damping(&self, tension: f64) -> Result<f64> {
        Ok(2.0 * self.damping_ratio * (self.effective_stiffness(tension)? * self.mass).sqrt())
    }

    /// Frequency of maximum compliance, `f_n √(1 − 2ζ²)`.
    pub fn compliance_peak_frequency(&self, tension: f64) -> Result<f64> {
        let fn_ = self.natural_frequency(tension)?;
        Ok(fn_ * (1.0 - 2.0 * self.damping_ratio * self.damping_ratio).max(0.0).sqrt())
    }

    /// Compliance `1 / (k − mω² + icω)` at `freq_hz`.
    pub fn compliance(&self, tension: f64, freq_hz: f64) -> Result<Complex64> {
        let k = self.effective_stiffness(tension)?;
        let c = self.damping(tension)?;
        let w = 2.0 * PI * freq_hz;
        Ok(Complex64::new(k - self.mass * w * w, c * w).inv())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrfMeta {
    pub axis: Axis,
    pub position: String,
    pub tension: f64,
}

/// Complex compliance (m/N) on an ascending frequency grid (Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct FrfSeries {
    frequencies: Vec<f64>,
    values: Vec<Complex64>,
    pub meta: FrfMeta,
}

impl FrfSeries {
    pub fn new(frequencies: Vec<f64>, values: Vec<Complex64>, meta: FrfMeta) -> Result<Self> {
        if frequencies.len() != values.len() {
            return Err(Error::invalid("FRF frequency and value lengths differ"));
        }
        if frequencies.iter().any(|f| !f.is_finite()) || values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid("FRF contains non-finite entries"));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("FRF frequencies must be strictly ascending"));
        }
        Ok(Self {
            frequencies,
            values,
            meta,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

/// Evaluates the model's compliance on `grid` (Hz, strictly ascending, > 0).
pub fn frf_synthesize(model: &ModalModel, tension: f64, grid: &[f64]) -> Result<FrfSeries> {
    if grid.is_empty() {
        return Err(Error::invalid("frequency grid is empty"));
    }
    if grid.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::invalid("frequency grid must be positive"));
    }
    let values = grid
        .iter()
        .map(|f| model.compliance(tension, *f))
        .collect::<Result<Vec<_>>>()?;
    FrfSeries::new(
        grid.to_vec(),
        values,
        FrfMeta {
            axis: model.axis,
            position: "model".into(),
            tension,
        },
    )
}

/// `lo, lo + step, …` up to and including `hi` (within half a step).
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi > lo) {
        return Err(Error::invalid("grid requires lo < hi and step > 0"));
    }
    let n = ((hi - lo) / step + 0.5).floor() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}
