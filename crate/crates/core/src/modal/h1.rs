use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Axis, FrfMeta, FrfSeries};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// One impact-hammer test: force and acceleration sampled together.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactRecord {
    pub sample_rate: f64,
    force: Vec<f64>,
    acceleration: Vec<f64>,
    pub axis: Axis,
    pub position: String,
    pub tension: f64,
}

impl ImpactRecord {
    pub fn new(
        sample_rate: f64,
        force: Vec<f64>,
        acceleration: Vec<f64>,
        axis: Axis,
        position: impl Into<String>,
        tension: f64,
    ) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid("sample rate must be > 0"));
        }
        if force.len() != acceleration.len() || force.len() < 2 {
            return Err(Error::invalid("force and acceleration need equal lengths >= 2"));
        }
        if force.iter().chain(acceleration.iter()).any(|v| !v.is_finite()) || !tension.is_finite() {
            return Err(Error::invalid("impact record contains non-finite samples"));
        }
        let peak = force.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return Err(Error::DegenerateSignal("force channel is identically zero".into()));
        }
        let mut abs: Vec<f64> = force.iter().map(|v| v.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let median = abs[abs.len() / 2];
        if peak <= 10.0 * median {
            return Err(Error::invalid(
                "force channel has no dominant transient (peak <= 10x median)",
            ));
        }
        Ok(Self {
            sample_rate,
            force,
            acceleration,
            axis,
            position: position.into(),
            tension,
        })
    }

    pub fn force(&self) -> &[f64] {
        &self.force
    }

    pub fn acceleration(&self) -> &[f64] {
        &self.acceleration
    }

    pub fn len(&self) -> usize {
        self.force.len()
    }

    pub fn is_empty(&self) -> bool {
        self.force.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceWindow {
    None,
    /// Keeps samples from the first to the last one whose magnitude reaches
    /// `threshold` × peak, widened by `margin` samples; zeroes the rest.
    Rectangular { threshold: f64, margin: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseWindow {
    None,
    /// `end_fraction^(n / (N-1))`: decays to `end_fraction` at the last sample.
    Exponential { end_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H1Options {
    pub force_window: ForceWindow,
    pub response_window: ResponseWindow,
    /// Transform length; records are truncated or zero padded to it.
    pub nfft: usize,
    pub execution: Execution,
}

impl H1Options {
    pub fn new(nfft: usize) -> Self {
        Self {
            force_window: ForceWindow::Rectangular {
                threshold: 0.01,
                margin: 2,
            },
            response_window: ResponseWindow::Exponential { end_fraction: 0.01 },
            nfft,
            execution: Execution::default(),
        }
    }
}

fn window_force(force: &[f64], w: ForceWindow) -> Vec<f64> {
    match w {
        ForceWindow::None => force.to_vec(),
        ForceWindow::Rectangular { threshold, margin } => {
            let peak = force.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let level = threshold * peak;
            let first = force.iter().position(|v| v.abs() >= level).unwrap_or(0);
            let last = force.iter().rposition(|v| v.abs() >= level).unwrap_or(0);
            let lo = first.saturating_sub(margin);
            let hi = (last + margin).min(force.len() - 1);
            force
                .iter()
                .enumerate()
                .map(|(i, v)| if (lo..=hi).contains(&i) { *v } else { 0.0 })
                .collect()
        }
    }
}

fn window_response(resp: &[f64], w: ResponseWindow) -> Vec<f64> {
    match w {
        ResponseWindow::None => resp.to_vec(),
        ResponseWindow::Exponential { end_fraction } => {
            let last = (resp.len() - 1).max(1) as f64;
            resp.iter()
                .enumerate()
                .map(|(i, v)| v * end_fraction.powf(i as f64 / last))
                .collect()
        }
    }
}

fn spectrum(fft: &Arc<dyn Fft<f64>>, x: &[f64], nfft: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..nfft)
        .map(|i| Complex64::new(x.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    fft.process(&mut buf);
    buf
}

/// H1 compliance estimate averaged over `records`.
///
/// Per bin, `H1 = Σ conj(F)·A / Σ |F|²` gives accelerance, which is divided
/// by `−ω²`. The DC bin is dropped; bins run up to Nyquist.
pub fn h1_estimate(records: &[ImpactRecord], opts: &H1Options) -> Result<FrfSeries> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid("h1_estimate needs at least one record"))?;
    if opts.nfft < 2 {
        return Err(Error::invalid("nfft must be >= 2"));
    }
    for r in &records[1..] {
        if r.sample_rate != first.sample_rate
            || r.axis != first.axis
            || r.position != first.position
            || r.tension != first.tension
        {
            return Err(Error::invalid(
                "records differ in sample rate, axis, position or tension",
            ));
        }
    }
    if let ResponseWindow::Exponential { end_fraction } = opts.response_window {
        if !(end_fraction > 0.0 && end_fraction <= 1.0) {
            return Err(Error::invalid("exponential window end fraction must be in (0, 1]"));
        }
    }

    let nfft = opts.nfft;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let nbins = nfft / 2;

    let spectra = par::map(opts.execution, records, |r| {
        let f = spectrum(&fft, &window_force(r.force(), opts.force_window), nfft);
        let a = spectrum(&fft, &window_response(r.acceleration(), opts.response_window), nfft);
        let mut sfa = vec![Complex64::new(0.0, 0.0); nbins];
        let mut sff = vec![0.0; nbins];
        for k in 1..=nbins {
            sfa[k - 1] = f[k].conj() * a[k];
            sff[k - 1] = f[k].norm_sqr();
        }
        (sfa, sff)
    });

    let mut sfa = vec![Complex64::new(0.0, 0.0); nbins];
    let mut sff = vec![0.0; nbins];
    for (a, f) in &spectra {
        for k in 0..nbins {
            sfa[k] += a[k];
            sff[k] += f[k];
        }
    }

    let df = first.sample_rate / nfft as f64;
    let mut freqs = Vec::with_capacity(nbins);
    let mut values = Vec::with_capacity(nbins);
    for k in 0..nbins {
        if sff[k] == 0.0 {
            return Err(Error::DegenerateSignal(format!(
                "force auto-spectrum vanishes at bin {}",
                k + 1
            )));
        }
        let f = df * (k + 1) as f64;
        let w = 2.0 * PI * f;
        freqs.push(f);
        values.push(sfa[k] / sff[k] / (-w * w));
    }
    FrfSeries::new(
        freqs,
        values,
        FrfMeta {
            axis: first.axis,
            position: first.position.clone(),
            tension: first.tension,
        },
    )
}
