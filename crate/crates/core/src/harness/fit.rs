use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least-squares line through `(log ε, log value)` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub quantity: String,
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

pub const MIN_FIT_POINTS: usize = 4;

/// OLS fit of `y = slope · x + intercept`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<RateFit> {
    fit_named("", points)
}

pub fn fit_named(quantity: &str, points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit(format!(
            "{quantity}: need at least {MIN_FIT_POINTS} points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateFit(format!("{quantity}: non-finite point")));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let scale = points.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
    if sxx <= 1e-24 * scale * scale * n {
        return Err(Error::DegenerateFit(format!("{quantity}: all x values coincide")));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateFit { quantity: quantity.to_string(), slope, intercept, stderr, r_squared, points: points.to_vec() })
}
