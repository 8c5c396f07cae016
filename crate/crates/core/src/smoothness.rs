//! Pointwise and trajectory smoothness diagnostics.
//!
//! The second-order estimator at `w` along direction `d` is
//!
//! ```text
//! H(w) = max_{h in {delta, 2 delta, ..., 1}} ||g(w + h d) + g(w - h d) - 2 g(w)|| / (h^2 ||d||^2)
//! ```
//!
//! and the first-order analogue replaces the symmetric second difference by
//! `||g(w + h d) - g(w)|| / (h ||d||)` over the same grid.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::problems::{Objective, ObjectiveKind};
use crate::vector::ParamVec;

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_QUANTILE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothnessSample {
    pub step_index: usize,
    pub grad_norm: f64,
    pub local_h: f64,
    pub local_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineEnvelope {
    pub offset: f64,
    pub slope: f64,
    pub violation_count: usize,
    pub max_violation: f64,
    pub coverage: f64,
}

impl AffineEnvelope {
    pub fn bound(&self, grad_norm: f64) -> f64 {
        self.offset + self.slope * grad_norm
    }
}

/// The step grid `{delta, 2 delta, ..., K delta}` with `K = floor(1/delta)`;
/// the last point is exactly 1 when `1/delta` is an integer.
pub fn step_grid(delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta must lie in (0, 1]"));
    }
    let ratio = 1.0 / delta;
    let k = (ratio + 1e-9).floor() as usize;
    let integral = (ratio - ratio.round()).abs() <= 1e-9;
    Ok((1..=k).map(|i| if i == k && integral { 1.0 } else { i as f64 * delta }).collect())
}

/// `||grad f(y) - grad f(x)|| / ||y - x||`.
pub fn estimate_local_l(obj: &Objective, x: &ParamVec, y: &ParamVec) -> Result<f64> {
    let dist = x.distance(y);
    y.ensure_dim(x.dim())?;
    if dist == 0.0 {
        return Err(Error::invalid("estimate_local_l requires x != y"));
    }
    Ok(obj.eval_grad(y)?.sub(&obj.eval_grad(x)?)?.norm_l2() / dist)
}

fn check_dir(dir: &ParamVec) -> Result<f64> {
    let n2 = dir.norm_sq();
    if n2 == 0.0 {
        return Err(Error::invalid("direction must be nonzero"));
    }
    Ok(n2)
}

/// Symmetric second-difference estimate of local Hessian smoothness.
pub fn estimate_local_h(obj: &Objective, w: &ParamVec, dir: &ParamVec, delta: f64) -> Result<f64> {
    let dir_sq = check_dir(dir)?;
    let g0 = obj.eval_grad(w)?;
    local_h_with(obj, w, dir, dir_sq, &g0, &step_grid(delta)?)
}

fn local_h_with(
    obj: &Objective,
    w: &ParamVec,
    dir: &ParamVec,
    dir_sq: f64,
    g0: &ParamVec,
    grid: &[f64],
) -> Result<f64> {
    let mut best = 0.0_f64;
    for &h in grid {
        let gp = obj.eval_grad(&w.axpy(h, dir)?)?;
        let gm = obj.eval_grad(&w.axpy(-h, dir)?)?;
        let num = gp
            .iter()
            .zip(gm.iter())
            .zip(g0.iter())
            .map(|((p, m), c)| {
                let v = p + m - 2.0 * c;
                v * v
            })
            .sum::<f64>()
            .sqrt();
        best = best.max(num / (h * h * dir_sq));
    }
    Ok(best)
}

fn local_l_with(
    obj: &Objective,
    w: &ParamVec,
    dir: &ParamVec,
    dir_norm: f64,
    g0: &ParamVec,
    grid: &[f64],
) -> Result<f64> {
    let mut best = 0.0_f64;
    for &h in grid {
        let gp = obj.eval_grad(&w.axpy(h, dir)?)?;
        best = best.max(gp.sub(g0)?.norm_l2() / (h * dir_norm));
    }
    Ok(best)
}

/// One-sided first-order analogue over the same grid.
pub fn estimate_local_l_along(obj: &Objective, w: &ParamVec, dir: &ParamVec, delta: f64) -> Result<f64> {
    let dir_sq = check_dir(dir)?;
    let g0 = obj.eval_grad(w)?;
    local_l_with(obj, w, dir, dir_sq.sqrt(), &g0, &step_grid(delta)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessTrace {
    pub samples: Vec<SmoothnessSample>,
    /// Consecutive duplicate points that were skipped.
    pub skipped: usize,
}

/// Estimates `(||grad f(w^t)||, H(w^t), L(w^t))` along `d^t = w^{t+1} - w^t`.
pub fn trajectory_smoothness(
    obj: &Objective,
    trajectory: &[ParamVec],
    delta: f64,
    exec: Execution,
) -> Result<SmoothnessTrace> {
    if trajectory.len() < 2 {
        return Err(Error::invalid("trajectory needs at least 2 points"));
    }
    let grid = step_grid(delta)?;
    let per_step = exec.map_indexed(trajectory.len() - 1, |t| -> Result<Option<SmoothnessSample>> {
        let w = &trajectory[t];
        let dir = trajectory[t + 1].sub(w)?;
        let dir_sq = dir.norm_sq();
        if dir_sq == 0.0 {
            return Ok(None);
        }
        let g0 = obj.eval_grad(w)?;
        Ok(Some(SmoothnessSample {
            step_index: t,
            grad_norm: g0.norm_l2(),
            local_h: local_h_with(obj, w, &dir, dir_sq, &g0, &grid)?,
            local_l: local_l_with(obj, w, &dir, dir_sq.sqrt(), &g0, &grid)?,
        }))
    });
    let mut samples = Vec::new();
    let mut skipped = 0;
    for s in per_step {
        match s? {
            Some(s) => samples.push(s),
            None => skipped += 1,
        }
    }
    Ok(SmoothnessTrace { samples, skipped })
}

fn quantile_upper(sorted: &[f64], q: f64) -> f64 {
    // Smallest value v such that at least a q fraction of entries is <= v.
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

fn violation_tol(bound: f64) -> f64 {
    1e-12 * (1.0 + bound.abs())
}

/// Least-squares fit of `local_h` on `grad_norm`, then the offset is raised
/// until at least a `quantile` fraction of samples lies under the line.
pub fn fit_affine_envelope(samples: &[SmoothnessSample], quantile: f64) -> Result<AffineEnvelope> {
    if samples.len() < 2 {
        return Err(Error::invalid("envelope fit needs at least 2 samples"));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::invalid("quantile must lie in (0, 1]"));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.grad_norm).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.local_h).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.grad_norm - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.grad_norm - mx) * (s.local_h - my)).sum();

    let (slope, offset) = if sxx <= f64::EPSILON * (1.0 + mx * mx) * n {
        let mut hs: Vec<f64> = samples.iter().map(|s| s.local_h).collect();
        hs.sort_by(f64::total_cmp);
        (0.0, quantile_upper(&hs, quantile))
    } else {
        let slope = sxy / sxx;
        let base = my - slope * mx;
        let mut resid: Vec<f64> = samples.iter().map(|s| s.local_h - (base + slope * s.grad_norm)).collect();
        resid.sort_by(f64::total_cmp);
        (slope, base + quantile_upper(&resid, quantile).max(0.0))
    };

    let mut env = AffineEnvelope { offset, slope, violation_count: 0, max_violation: 0.0, coverage: 1.0 };
    for s in samples {
        let bound = env.bound(s.grad_norm);
        let excess = s.local_h - bound;
        if excess > violation_tol(bound) {
            env.violation_count += 1;
            env.max_violation = env.max_violation.max(excess);
        }
    }
    env.coverage = 1.0 - env.violation_count as f64 / n;
    Ok(env)
}

/// Third-derivative bound `||D^3 f(x)||_F <= hhat1 ||grad f(x)|| + hhat2` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThirdOrderCheck {
    pub lhs: f64,
    pub grad_norm: f64,
    pub hhat1: f64,
    pub hhat2: f64,
}

impl ThirdOrderCheck {
    pub fn rhs(&self) -> f64 {
        self.hhat1 * self.grad_norm + self.hhat2
    }

    /// `rhs - lhs` with a rounding allowance; nonnegative iff the bound holds.
    pub fn slack(&self) -> f64 {
        self.rhs() * (1.0 + 1e-12) + 1e-12 - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.slack() >= 0.0
    }
}

/// Evaluates both sides of the third-derivative form of the weak second-order
/// smoothness condition. The affine coefficients are the objective's
/// closed-form ones.
pub fn check_third_order_bound(obj: &Objective, x: &ParamVec) -> Result<ThirdOrderCheck> {
    if matches!(obj.kind(), ObjectiveKind::PenaltyNet(_)) {
        return Err(Error::Unsupported("third-order check for penalty_net".into()));
    }
    let c = obj.smoothness();
    let hhat1 = c.hhat1.ok_or(Error::MissingConstant("Hhat1"))?;
    let hhat2 = c.hhat2.ok_or(Error::MissingConstant("Hhat2"))?;
    Ok(ThirdOrderCheck {
        lhs: obj.third_derivative_frobenius(x)?,
        grad_norm: obj.eval_grad(x)?.norm_l2(),
        hhat1,
        hhat2,
    })
}

/// Writes `step_index,grad_norm,local_H,local_L` rows.
pub fn write_samples_csv<W: Write>(mut out: W, samples: &[SmoothnessSample]) -> std::io::Result<()> {
    writeln!(out, "step_index,grad_norm,local_H,local_L")?;
    for s in samples {
        writeln!(out, "{},{},{},{}", s.step_index, s.grad_norm, s.local_h, s.local_l)?;
    }
    Ok(())
}
