//! Least-squares power-law fits on log-log data.

use serde::Serialize;

use crate::{Error, Result};

/// `y ≈ prefactor · x^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Coefficient of determination of the log-log line.
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `log|y| = log c + p log x`. Points with `x ≤ 0` or `y = 0` are
/// rejected rather than skipped.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::domain("fit inputs differ in length"));
    }
    if xs.len() < 2 {
        return Err(Error::domain("a fit needs at least two points"));
    }
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(ys.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0 && x.is_finite() && y != 0.0 && y.is_finite()) {
            return Err(Error::domain(format!("cannot fit point ({x}, {y}) on log axes")));
        }
        lx.push(x.ln());
        ly.push(y.abs().ln());
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit abscissae are all equal"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(PowerLawFit { exponent: slope, prefactor: intercept.exp(), r_squared, points: xs.len() })
}
