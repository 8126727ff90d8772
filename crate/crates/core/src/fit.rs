//! Log-log least squares.

use crate::error::{Error, Result};

/// Ordinary least squares of log(value) against log(scale).
///
/// Returns (slope, standard error of the slope). The standard error is 0
/// for exactly two samples.
pub fn loglog_slope(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(&(s, v)) = samples
        .iter()
        .find(|(s, v)| !(*s > 0.0 && *v > 0.0 && s.is_finite() && v.is_finite()))
    {
        return Err(Error::DegenerateInput(format!(
            "non-positive sample ({s}, {v})"
        )));
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-24 {
        return Err(Error::DegenerateInput("scales coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let stderr = if samples.len() > 2 {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - my - slope * (x - mx);
                r * r
            })
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, stderr))
}
