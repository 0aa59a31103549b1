//! Least-squares line fits used by the scaling analyses.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope from the residual variance; 0 for exact fits.
    pub slope_stderr: f64,
}

/// Ordinary least squares of `y` on `x` with equal weights.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    weighted_line_fit(x, y, &vec![1.0; x.len()])
}

/// Weighted least squares. The slope error is the inverse-variance error
/// when the weights are inverse variances, scaled by the residual variance
/// when they are all equal.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return Err(Error::InsufficientData(format!(
            "line fit needs at least 2 matching points, got {n}"
        )));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::InsufficientData(
            "line fit needs at least two distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = (0..n)
        .map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let equal = w.iter().all(|&v| v == w[0]);
    let slope_stderr = if equal {
        if n > 2 {
            (ss_res / (n as f64 - 2.0) / sxx).sqrt()
        } else {
            0.0
        }
    } else {
        (1.0 / sxx).sqrt()
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
    })
}

/// Fits `y = c·V^p` in log-log space; `p` is the returned slope.
pub fn power_law_fit(volumes: &[f64], values: &[f64]) -> Result<LineFit> {
    let lx: Vec<f64> = volumes.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    line_fit(&lx, &ly)
}
