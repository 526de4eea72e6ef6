use std::ops::Range;

use crate::error::{invalid, Error, Result};
use crate::trace::Trace;

/// Least-squares slope of `ln(F − F*)` against the round index over the
/// records whose round lies in `window`. More negative means faster.
pub fn fit_rate_slope(trace: &Trace, window: Range<usize>) -> Result<f64> {
    let mut points = Vec::new();
    for rec in trace.records.iter().filter(|r| window.contains(&r.round)) {
        let sub = rec
            .suboptimality
            .ok_or_else(|| Error::Missing(format!("round {} has no suboptimality", rec.round)))?;
        if !(sub > 0.0 && sub.is_finite()) {
            return Err(invalid(format!(
                "suboptimality {sub} at round {} is not positive; end the window before the floor",
                rec.round
            )));
        }
        points.push((rec.round as f64, sub.ln()));
    }
    slope(&points)
}

/// Ordinary least-squares slope of `(x, y)` pairs.
pub fn slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(invalid("a slope needs at least two points"));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("a slope needs at least two distinct rounds"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}
