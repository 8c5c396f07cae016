//! Log-log rate fits of the mean gradient norm against the horizon.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(ln T, ln median value)` per horizon, in increasing `T`.
    pub points: Vec<(f64, f64)>,
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares line through `(ln T, ln median_T)` where the median is over
/// all `(T, value)` samples sharing a horizon.
pub fn fit_rate(samples: &[(u64, f64)]) -> Result<RateFit> {
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for &(t, v) in samples {
        if t == 0 || !(v > 0.0 && v.is_finite()) {
            bail!("rate fit needs T >= 1 and positive finite values, got ({t}, {v})");
        }
        groups.entry(t).or_default().push(v);
    }
    if groups.len() < 3 {
        bail!("rate fit needs at least 3 distinct horizons, got {}", groups.len());
    }
    let points: Vec<(f64, f64)> = groups.iter().map(|(&t, vs)| ((t as f64).ln(), median(vs).ln())).collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared =
        if ss_tot <= f64::EPSILON * f64::EPSILON * n { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r_squared, points })
}
