//! Seeded stochastic gradient oracles.

use crate::error::{Error, Result};
use crate::rng::{standard_normal_vec, Purpose};
use crate::vector::ParamVec;

use super::objective::Objective;

/// Source of (possibly noisy) gradients keyed by `(t, worker, seed)`.
pub trait GradientOracle: Sync {
    fn objective(&self) -> &Objective;

    fn dim(&self) -> usize {
        self.objective().dim()
    }

    /// A gradient sample at `x`. Identical keys give bit-identical samples.
    fn sample(&self, x: &ParamVec, t: u64, worker: u64, seed: u64) -> Result<ParamVec>;
}

/// Zero-mean Gaussian noise with covariance `(sigma^2 / d) I`, so that
/// `E ||z||^2 = sigma^2` exactly.
pub fn gaussian_noise(dim: usize, sigma: f64, t: u64, worker: u64, seed: u64) -> Vec<f64> {
    let scale = sigma / (dim as f64).sqrt();
    standard_normal_vec(dim, seed, t, worker, Purpose::GradientNoise).into_iter().map(|z| scale * z).collect()
}

fn add_noise(base: ParamVec, sigma: f64, t: u64, worker: u64, seed: u64) -> Result<ParamVec> {
    if sigma == 0.0 {
        return Ok(base);
    }
    let noise = gaussian_noise(base.dim(), sigma, t, worker, seed);
    let out = base.iter().zip(&noise).map(|(g, z)| g + z).collect();
    ParamVec::from_computed(out, "stochastic gradient")
}

/// `grad f(x) + z` with bounded-variance Gaussian noise.
#[derive(Debug, Clone)]
pub struct StochasticOracle {
    objective: Objective,
    sigma: f64,
}

impl StochasticOracle {
    pub fn new(objective: Objective, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma must be finite and >= 0"));
        }
        Ok(Self { objective, sigma })
    }

    pub fn exact(objective: Objective) -> Self {
        Self { objective, sigma: 0.0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sample_grad(&self, x: &ParamVec, t: u64, worker: u64, seed: u64) -> Result<ParamVec> {
        let g = self.objective.eval_grad(x)?;
        add_noise(g, self.sigma, t, worker, seed)
    }
}

impl GradientOracle for StochasticOracle {
    fn objective(&self) -> &Objective {
        &self.objective
    }

    fn sample(&self, x: &ParamVec, t: u64, worker: u64, seed: u64) -> Result<ParamVec> {
        self.sample_grad(x, t, worker, seed)
    }
}

/// Multiplies every sample of the wrapped oracle by a constant.
#[derive(Debug, Clone)]
pub struct ScaledOracle<O> {
    inner: O,
    factor: f64,
}

impl<O: GradientOracle> ScaledOracle<O> {
    pub fn new(inner: O, factor: f64) -> Self {
        Self { inner, factor }
    }
}

impl<O: GradientOracle> GradientOracle for ScaledOracle<O> {
    fn objective(&self) -> &Objective {
        self.inner.objective()
    }

    fn sample(&self, x: &ParamVec, t: u64, worker: u64, seed: u64) -> Result<ParamVec> {
        self.inner.sample(x, t, worker, seed)?.scale(self.factor)
    }
}

/// `n` heterogeneous local objectives `f_i(x) = f(x) + <b_i, x>` with
/// `sum_i b_i = 0`, each with its own gradient noise.
#[derive(Debug, Clone)]
pub struct WorkerOracle {
    base: Objective,
    biases: Vec<ParamVec>,
    sigma_bar: f64,
    sigma: f64,
}

/// Builds `n` worker biases that are centered and rescaled so that
/// `(1/n) sum_i ||b_i||^2 = sigma_bar^2`.
pub fn split_workers(obj: &Objective, n: usize, sigma_bar: f64, seed: u64) -> Result<WorkerOracle> {
    if n == 0 {
        return Err(Error::invalid("worker count must be >= 1"));
    }
    if !(sigma_bar >= 0.0 && sigma_bar.is_finite()) {
        return Err(Error::invalid("sigma_bar must be finite and >= 0"));
    }
    let d = obj.dim();
    if sigma_bar == 0.0 {
        return Ok(WorkerOracle { base: obj.clone(), biases: vec![ParamVec::zeros(d); n], sigma_bar, sigma: 0.0 });
    }
    if n == 1 {
        return Err(Error::invalid("a single worker has zero heterogeneity; sigma_bar must be 0 when n = 1"));
    }
    let mut raw: Vec<Vec<f64>> =
        (0..n).map(|i| standard_normal_vec(d, seed, 0, i as u64, Purpose::WorkerBias)).collect();
    for j in 0..d {
        let mean = raw.iter().map(|b| b[j]).sum::<f64>() / n as f64;
        raw.iter_mut().for_each(|b| b[j] -= mean);
    }
    let spread = raw.iter().flatten().map(|v| v * v).sum::<f64>() / n as f64;
    if spread <= 0.0 {
        return Err(Error::invalid("degenerate worker bias draw"));
    }
    let scale = sigma_bar / spread.sqrt();
    let biases = raw
        .into_iter()
        .map(|b| ParamVec::from_computed(b.into_iter().map(|v| v * scale).collect(), "worker bias"))
        .collect::<Result<Vec<_>>>()?;
    Ok(WorkerOracle { base: obj.clone(), biases, sigma_bar, sigma: 0.0 })
}

impl WorkerOracle {
    /// Sets the per-worker gradient noise level.
    pub fn with_noise(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma must be finite and >= 0"));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn base(&self) -> &Objective {
        &self.base
    }

    pub fn workers(&self) -> usize {
        self.biases.len()
    }

    pub fn biases(&self) -> &[ParamVec] {
        &self.biases
    }

    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Exact local gradient `grad f(x) + b_i`.
    pub fn local_grad(&self, worker: usize, x: &ParamVec) -> Result<ParamVec> {
        let g = self.base.eval_grad(x)?;
        if self.sigma_bar == 0.0 {
            return Ok(g);
        }
        g.add(&self.biases[worker])
    }

    pub fn local_value(&self, worker: usize, x: &ParamVec) -> Result<f64> {
        Ok(self.base.eval_value(x)? + self.biases[worker].dot(x))
    }

    /// Stochastic local gradient; noise keyed by `(seed, t, worker)`.
    pub fn sample_local(&self, worker: usize, x: &ParamVec, t: u64, seed: u64) -> Result<ParamVec> {
        let g = self.local_grad(worker, x)?;
        add_noise(g, self.sigma, t, worker as u64, seed)
    }

    /// `(1/n) sum_i ||grad f_i(x) - grad f(x)||^2`.
    pub fn heterogeneity(&self, x: &ParamVec) -> Result<f64> {
        let g = self.base.eval_grad(x)?;
        let mut acc = 0.0;
        for i in 0..self.workers() {
            acc += self.local_grad(i, x)?.sub(&g)?.norm_sq();
        }
        Ok(acc / self.workers() as f64)
    }
}
