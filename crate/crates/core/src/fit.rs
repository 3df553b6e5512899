//! Least-squares line fits used for decay rates and entropy scaling.

use ndarray as nd;
use ndarray_linalg::LeastSquaresSvd;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// Ordinary least squares `y ≈ intercept + slope · x`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParams(format!(
            "line fit needs matching inputs with at least 2 points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    let a = nd::Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { 1.0 } else { x[i] });
    let b = nd::Array1::from(y.to_vec());
    let sol = a.least_squares(&b)?.solution;
    let (intercept, slope) = (sol[0], sol[1]);
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - intercept - slope * xi).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { if ss_res == 0.0 { 1.0 } else { 0.0 } } else { 1.0 - ss_res / ss_tot };
    Ok(LineFit { slope, intercept, r2, n })
}

/// Fit of `ln y` against `x`. Non-positive samples are rejected.
pub fn log_linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidParams(format!("log fit needs positive samples, got {bad}")));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line_fit(x, &ly)
}

/// Decision on whether `y(x)` decays exponentially.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct DecayVerdict {
    pub exponential: LineFit,
    /// `ln y` against `ln x`, the competing algebraic hypothesis.
    pub power_law: Option<LineFit>,
    pub accepted: bool,
}

/// Accepts exponential decay when the log-linear slope is negative, its R²
/// exceeds `min_r2`, and it explains the data better than a power law.
pub fn exponential_decay(x: &[f64], y: &[f64], min_r2: f64) -> Result<DecayVerdict> {
    let exponential = log_linear_fit(x, y)?;
    let power_law = if x.iter().all(|v| *v > 0.0) {
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        Some(line_fit(&lx, &ly)?)
    } else {
        None
    };
    let beats_power = power_law.is_none_or(|p| exponential.r2 > p.r2);
    let accepted = exponential.slope < 0.0 && exponential.r2 > min_r2 && beats_power;
    Ok(DecayVerdict { exponential, power_law, accepted })
}
