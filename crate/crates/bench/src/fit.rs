//! Timing statistics: medians and the `t = C·I^S` regression.

use serde::Serialize;

/// Least-squares fit of `log t = log C + S log I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub c: f64,
    pub s: f64,
    pub window: (usize, usize),
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    /// The window asks for iterations that were not recorded.
    WindowOutOfRange { window: (usize, usize), recorded: usize },
    /// Fewer than two usable (positive) points.
    TooFewPoints,
}

impl std::fmt::Display for FitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitError::WindowOutOfRange { window, recorded } => write!(
                f,
                "fit window {}..{} exceeds the {recorded} recorded iterations",
                window.0, window.1
            ),
            FitError::TooFewPoints => f.write_str("fewer than two positive points to fit"),
        }
    }
}

impl std::error::Error for FitError {}

/// Log-log line through `(x, y)` pairs with both positive; returns
/// `(intercept, slope, R²)`.
pub fn loglog_fit(points: &[(f64, f64)]) -> Result<(f64, f64, f64), FitError> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(FitError::TooFewPoints);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::TooFewPoints);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((my - slope * mx, slope, r2))
}

impl ScalingFit {
    /// Fits cumulative time `times[i]` after iteration `i + 1` over the
    /// inclusive iteration window.
    pub fn from_cumulative(times: &[f64], window: (usize, usize)) -> Result<Self, FitError> {
        let (lo, hi) = window;
        if lo == 0 || lo >= hi || hi > times.len() {
            return Err(FitError::WindowOutOfRange {
                window,
                recorded: times.len(),
            });
        }
        let pts: Vec<(f64, f64)> = (lo..=hi).map(|i| (i as f64, times[i - 1])).collect();
        let (a, s, r_squared) = loglog_fit(&pts)?;
        Ok(Self {
            c: a.exp(),
            s,
            window,
            r_squared,
        })
    }
}

/// Median; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    match m {
        0 => f64::NAN,
        _ if m % 2 == 1 => v[m / 2],
        _ => 0.5 * (v[m / 2 - 1] + v[m / 2]),
    }
}

/// Element-wise median over equal-length series.
pub fn median_series(series: &[Vec<f64>]) -> Vec<f64> {
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| median(&series.iter().map(|s| s[i]).collect::<Vec<_>>()))
        .collect()
}
