use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least squares fit of `log₂ y = slope · log₂ h + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residuals.
    pub slope_stderr: f64,
}

pub fn fit_loglog_slope(steps: &[f64], values: &[f64]) -> Result<SlopeFit> {
    if steps.len() != values.len() {
        return Err(Error::domain("step sizes and values differ in length"));
    }
    if steps.len() < 3 {
        return Err(Error::domain(format!("need at least 3 levels for a slope, got {}", steps.len())));
    }
    if steps.iter().chain(values).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::domain("log-log fit needs strictly positive finite data"));
    }
    let xs: Vec<f64> = steps.iter().map(|h| h.log2()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.log2()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("step sizes must not all be equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = (ssr / (k - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, slope_stderr })
}
