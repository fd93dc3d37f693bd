use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FitScope {
    Global,
    Position(String),
}

/// Least-squares line `frequency = intercept + slope · tension`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFit {
    /// Hz/N
    pub slope: f64,
    /// Hz
    pub intercept: f64,
    /// Observed minus fitted, Hz, in input order.
    pub residuals: Vec<f64>,
    pub scope: FitScope,
}

impl ShiftFit {
    pub fn predict(&self, tension: f64) -> f64 {
        self.intercept + self.slope * tension
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Ordinary least squares over `(tension N, frequency Hz)` points.
pub fn fit_shift(points: &[(f64, f64)], scope: FitScope) -> Result<ShiftFit> {
    if points.len() < 2 {
        return Err(Error::RankDeficient(format!(
            "need at least two points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(t, f)| !(t.is_finite() && f.is_finite())) {
        return Err(Error::invalid("shift points must be finite"));
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_f = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    if sxx == 0.0 || points.iter().all(|p| p.0 == points[0].0) {
        return Err(Error::RankDeficient("all tensions are identical".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_f)).sum();
    let slope = sxy / sxx;
    let intercept = mean_f - slope * mean_t;
    let residuals = points.iter().map(|(t, f)| f - (intercept + slope * t)).collect();
    Ok(ShiftFit {
        slope,
        intercept,
        residuals,
        scope,
    })
}
