use std::f64::consts::PI;

use super::{fit_shift, h1_estimate, peak_pick, FitScope, H1Options, ImpactRecord, ModalModel, ShiftFit};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Time-domain impact test on a [`ModalModel`]: a half-sine hammer pulse
/// drives the single-DOF oscillator from rest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactSim {
    pub sample_rate: f64,
    pub samples: usize,
    pub pulse_peak: f64,
    pub pulse_width: f64,
    /// RK4 steps per sample interval.
    pub substeps: usize,
    pub position: String,
}

impl Default for ImpactSim {
    fn default() -> Self {
        Self {
            sample_rate: 4096.0,
            samples: 8192,
            pulse_peak: 500.0,
            pulse_width: 1.5e-3,
            substeps: 16,
            position: "P1".into(),
        }
    }
}

impl ImpactSim {
    fn force(&self, t: f64) -> f64 {
        if (0.0..=self.pulse_width).contains(&t) {
            self.pulse_peak * (PI * t / self.pulse_width).sin()
        } else {
            0.0
        }
    }

    /// FFT bin width of the simulated records.
    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.samples as f64
    }
}

/// Integrates `m x'' + c x' + k x = F(t)` with classical RK4 and samples
/// force and acceleration.
pub fn simulate_impact(model: &ModalModel, tension: f64, sim: &ImpactSim) -> Result<ImpactRecord> {
    if !(sim.sample_rate > 0.0 && sim.samples >= 2 && sim.substeps >= 1 && sim.pulse_width > 0.0) {
        return Err(Error::invalid("impact simulation parameters must be positive"));
    }
    let k = model.effective_stiffness(tension)?;
    let c = model.damping(tension)?;
    let m = model.mass;
    let accel = |t: f64, x: f64, v: f64| (sim.force(t) - c * v - k * x) / m;

    let dt = 1.0 / (sim.sample_rate * sim.substeps as f64);
    let (mut x, mut v) = (0.0f64, 0.0f64);
    let mut force = Vec::with_capacity(sim.samples);
    let mut acc = Vec::with_capacity(sim.samples);
    for n in 0..sim.samples {
        let t = n as f64 / sim.sample_rate;
        force.push(sim.force(t));
        acc.push(accel(t, x, v));
        for s in 0..sim.substeps {
            let t0 = t + s as f64 * dt;
            let (k1x, k1v) = (v, accel(t0, x, v));
            let (k2x, k2v) = (v + 0.5 * dt * k1v, accel(t0 + 0.5 * dt, x + 0.5 * dt * k1x, v + 0.5 * dt * k1v));
            let (k3x, k3v) = (v + 0.5 * dt * k2v, accel(t0 + 0.5 * dt, x + 0.5 * dt * k2x, v + 0.5 * dt * k2v));
            let (k4x, k4v) = (v + dt * k3v, accel(t0 + dt, x + dt * k3x, v + dt * k3v));
            x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
    }
    ImpactRecord::new(sim.sample_rate, force, acc, model.axis, sim.position.clone(), tension)
}

/// Settings for a simulated tension sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftStudy {
    pub sim: ImpactSim,
    pub h1: H1Options,
    pub band: (f64, f64),
    pub prominence_factor: f64,
    pub execution: Execution,
}

impl ShiftStudy {
    pub fn new(sim: ImpactSim, band: (f64, f64)) -> Self {
        let h1 = H1Options::new(sim.samples);
        Self {
            sim,
            h1,
            band,
            prominence_factor: 1.0,
            execution: Execution::default(),
        }
    }
}

/// Simulates an impact at every tension, estimates the FRF, takes the
/// strongest peak in the band and fits the frequency shift. Returns the
/// fit and the `(tension, peak frequency)` points it was built from.
pub fn identify_shift(model: &ModalModel, tensions: &[f64], study: &ShiftStudy) -> Result<(ShiftFit, Vec<(f64, f64)>)> {
    let points = par::map(study.execution, tensions, |t| -> Result<(f64, f64)> {
        let rec = simulate_impact(model, *t, &study.sim)?;
        let frf = h1_estimate(std::slice::from_ref(&rec), &study.h1)?;
        let peaks = peak_pick(&frf, study.band.0, study.band.1, study.prominence_factor)?;
        let best = peaks
            .iter()
            .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
            .ok_or_else(|| Error::DegenerateSignal(format!("no resonance found at {t} N")))?;
        Ok((*t, best.frequency))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let fit = fit_shift(&points, FitScope::Position(study.sim.position.clone()))?;
    Ok((fit, points))
}
