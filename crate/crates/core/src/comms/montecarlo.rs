//! Monte-Carlo estimates of the compressed-mean error bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{ordered_sum, Execution};
use crate::problems::WorkerOracle;
use crate::vector::ParamVec;

use super::{fcc, fixed_order_mean, FccConfig};

pub const MIN_MC_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McReport {
    pub samples: usize,
    pub lhs_mean: f64,
    pub rhs: f64,
    pub stderr: f64,
}

impl McReport {
    /// `lhs_mean <= rhs + 3 stderr`.
    pub fn passes(&self) -> bool {
        self.lhs_mean <= self.rhs + 3.0 * self.stderr
    }

    /// `rhs + 3 stderr - lhs_mean`.
    pub fn margin(&self) -> f64 {
        self.rhs + 3.0 * self.stderr - self.lhs_mean
    }
}

fn summarize(values: &[f64], rhs: f64) -> McReport {
    let n = values.len() as f64;
    let mean = ordered_sum(values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = ordered_sum(&sq) / (n - 1.0);
    McReport { samples: values.len(), lhs_mean: mean, rhs, stderr: (var / n).sqrt() }
}

/// Error of the compressed worker mean at `x` for one `(t, seed)` key.
fn mean_error(oracle: &WorkerOracle, cfg: &FccConfig, x: &ParamVec, t: u64, seed: u64) -> Result<ParamVec> {
    let sent =
        (0..oracle.workers()).map(|i| fcc(&oracle.sample_local(i, x, t, seed)?, cfg)).collect::<Result<Vec<_>>>()?;
    fixed_order_mean(&sent)?.sub(&oracle.base().eval_grad(x)?)
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::invalid(format!("need at least {MIN_MC_SAMPLES} samples, got {samples}")));
    }
    Ok(())
}

fn noise_term(oracle: &WorkerOracle, cfg: &FccConfig) -> f64 {
    let (s, sb) = (oracle.sigma(), oracle.sigma_bar());
    (2.0 * s * s + 4.0 * sb * sb) * cfg.contraction()
}

/// `E ||(1/n) sum_i FCC(g_i(x)) - grad f(x)||^2` against
/// `(2 sigma^2 + 4 sigma_bar^2) q + 2 sigma^2 / n + 4 q ||grad f(x)||^2`, `q = (1 - delta)^u`.
pub fn mc_check_mean_error(
    oracle: &WorkerOracle,
    cfg: &FccConfig,
    x: &ParamVec,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<McReport> {
    check_samples(samples)?;
    let values = exec
        .map_indexed(samples, |s| Ok(mean_error(oracle, cfg, x, s as u64 + 1, seed)?.norm_sq()))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let grad_sq = oracle.base().eval_grad(x)?.norm_sq();
    let sigma = oracle.sigma();
    let rhs =
        noise_term(oracle, cfg) + 2.0 * sigma * sigma / oracle.workers() as f64 + 4.0 * cfg.contraction() * grad_sq;
    Ok(summarize(&values, rhs))
}

/// `E <e(x), e(y)>` for independently sampled compressed-mean errors at `x`
/// and `y`, against `(2 sigma^2 + 4 sigma_bar^2) q + 2 q (||grad f(x)||^2 + ||grad f(y)||^2)`.
pub fn mc_check_cross_term(
    oracle: &WorkerOracle,
    cfg: &FccConfig,
    x: &ParamVec,
    y: &ParamVec,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<McReport> {
    check_samples(samples)?;
    let values = exec
        .map_indexed(samples, |s| {
            let s = s as u64;
            let ex = mean_error(oracle, cfg, x, 2 * s + 1, seed)?;
            let ey = mean_error(oracle, cfg, y, 2 * s + 2, seed)?;
            Ok(ex.dot(&ey))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let gx = oracle.base().eval_grad(x)?.norm_sq();
    let gy = oracle.base().eval_grad(y)?.norm_sq();
    let rhs = noise_term(oracle, cfg) + 2.0 * cfg.contraction() * (gx + gy);
    Ok(summarize(&values, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comms::Compressor;
    use crate::problems::{split_workers, Objective};

    fn setup(n: usize, sigma: f64, sigma_bar: f64) -> (WorkerOracle, ParamVec, ParamVec) {
        let obj = Objective::rank_one_spiked(10, 2.0, 1).unwrap();
        let oracle = split_workers(&obj, n, sigma_bar, 3).unwrap().with_noise(sigma).unwrap();
        (oracle, ParamVec::filled(10, 0.3), ParamVec::filled(10, -0.2))
    }

    #[test]
    fn identity_compressor_variance() {
        let (oracle, x, y) = setup(4, 1.0, 0.0);
        let cfg = FccConfig::new(Compressor::identity(10), 1).unwrap();
        let r = mc_check_mean_error(&oracle, &cfg, &x, 4000, 1, Execution::Parallel).unwrap();
        assert_eq!(r.rhs, 0.5);
        assert!((r.lhs_mean - 0.25).abs() < 4.0 * r.stderr, "{r:?}");
        assert!(r.passes());
        let r4 = mc_check_cross_term(&oracle, &cfg, &x, &y, 4000, 1, Execution::Parallel).unwrap();
        assert_eq!(r4.rhs, 0.0);
        assert!(r4.lhs_mean.abs() < 4.0 * r4.stderr);
    }

    #[test]
    fn noiseless_is_zero() {
        let (oracle, x, y) = setup(3, 0.0, 0.0);
        let cfg = FccConfig::new(Compressor::identity(10), 1).unwrap();
        let r = mc_check_mean_error(&oracle, &cfg, &x, 1000, 0, Execution::Sequential).unwrap();
        assert_eq!((r.lhs_mean, r.rhs), (0.0, 0.0));
        let r4 = mc_check_cross_term(&oracle, &cfg, &x, &y, 1000, 0, Execution::Sequential).unwrap();
        assert_eq!(r4.lhs_mean, 0.0);
    }

    #[test]
    fn compressed_bounds_hold() {
        let (oracle, x, y) = setup(4, 1.0, 1.0);
        let cfg = FccConfig::new(Compressor::top_k(2, 10).unwrap(), 2).unwrap();
        assert!(mc_check_mean_error(&oracle, &cfg, &x, 2000, 5, Execution::Parallel).unwrap().passes());
        let cfg1 = FccConfig::new(Compressor::top_k(2, 10).unwrap(), 1).unwrap();
        assert!(mc_check_cross_term(&oracle, &cfg1, &x, &y, 2000, 5, Execution::Parallel).unwrap().passes());
    }

    #[test]
    fn sample_floor_and_execution_agreement() {
        let (oracle, x, _) = setup(2, 1.0, 0.5);
        let cfg = FccConfig::new(Compressor::top_k(3, 10).unwrap(), 2).unwrap();
        assert!(mc_check_mean_error(&oracle, &cfg, &x, 999, 0, Execution::Parallel).is_err());
        let a = mc_check_mean_error(&oracle, &cfg, &x, 1000, 2, Execution::Parallel).unwrap();
        let b = mc_check_mean_error(&oracle, &cfg, &x, 1000, 2, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }
}
