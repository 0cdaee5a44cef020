//! Log-log least-squares slope extraction for empirical convergence rates.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SlopeError {
    #[error("slope fit needs at least 3 points (got {0})")]
    TooFewPoints(usize),
    #[error("slope fit needs positive abscissae and ordinates")]
    NonPositiveData,
}

/// Least-squares line through `(log x, log y)` pairs.
#[derive(Clone, Debug)]
pub struct SlopeFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit, SlopeError> {
    if points.len() < 3 {
        return Err(SlopeError::TooFewPoints(points.len()));
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(SlopeError::NonPositiveData);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| {
            let fit = intercept + slope * p.0;
            (p.1 - fit) * (p.1 - fit)
        })
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(SlopeFit {
        points: logs,
        slope,
        intercept,
        r_squared,
    })
}
