//! Contractive compression, multi-round FCC compression, the compressed
//! parameter-server simulator and Monte-Carlo checks of its variance bounds.

mod montecarlo;
mod presets;
mod sim;

pub use montecarlo::{mc_check_cross_term, mc_check_mean_error, McReport, MIN_MC_SAMPLES};
pub use presets::{auto_rounds, distributed_presets, fcc_rounds};
pub use sim::{casign_round, fixed_order_mean, run_distributed, DistributedOptions, RoundTraffic};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vector::ParamVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CompressorKind {
    TopK { k: usize },
    Identity,
}

/// A deterministic contractive compressor on `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Compressor {
    pub kind: CompressorKind,
    pub dim: usize,
}

impl Compressor {
    pub fn top_k(k: usize, dim: usize) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(Error::invalid(format!("top-k needs 1 <= k <= d, got k = {k}, d = {dim}")));
        }
        Ok(Self { kind: CompressorKind::TopK { k }, dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self { kind: CompressorKind::Identity, dim }
    }

    /// Contraction factor: `k/d` for top-k, 1 for the identity.
    pub fn delta(&self) -> f64 {
        match self.kind {
            CompressorKind::TopK { k } => k as f64 / self.dim as f64,
            CompressorKind::Identity => 1.0,
        }
    }

    /// Scalars transmitted per application: `2k` (values and indices) or `d`.
    pub fn cost(&self) -> u64 {
        match self.kind {
            CompressorKind::TopK { k } => 2 * k as u64,
            CompressorKind::Identity => self.dim as u64,
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            CompressorKind::TopK { k } => format!("top_{k}"),
            CompressorKind::Identity => "identity".to_string(),
        }
    }

    pub fn apply(&self, x: &ParamVec) -> Result<ParamVec> {
        x.ensure_dim(self.dim)?;
        match self.kind {
            CompressorKind::TopK { k } => topk_compress(x, k),
            CompressorKind::Identity => Ok(x.clone()),
        }
    }
}

/// Keeps the `k` largest-magnitude entries (ties to the lowest index).
pub fn topk_compress(x: &ParamVec, k: usize) -> Result<ParamVec> {
    let d = x.dim();
    if k == 0 || k > d {
        return Err(Error::invalid(format!("top-k needs 1 <= k <= d, got k = {k}, d = {d}")));
    }
    let v = x.as_slice();
    let mut order: Vec<usize> = (0..d).collect();
    if k < d {
        order.select_nth_unstable_by(k - 1, |&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    }
    let mut out = vec![0.0; d];
    for &i in &order[..k] {
        out[i] = v[i];
    }
    ParamVec::from_computed(out, "top-k")
}

/// FCC settings: `u` compressor rounds on the running residual.
///
/// When the compressor has `delta = 1` and `u = 0` the vector is sent
/// verbatim in a single round (pass-through mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FccConfig {
    pub compressor: Compressor,
    pub u: u32,
}

impl FccConfig {
    pub fn new(compressor: Compressor, u: u32) -> Result<Self> {
        if u == 0 && compressor.delta() < 1.0 {
            return Err(Error::invalid("FCC needs u >= 1 for a compressor with delta < 1"));
        }
        Ok(Self { compressor, u })
    }

    pub fn pass_through(dim: usize) -> Self {
        Self { compressor: Compressor::identity(dim), u: 0 }
    }

    pub fn is_pass_through(&self) -> bool {
        self.u == 0
    }

    /// `(1 - delta)^u`, the guaranteed residual contraction (0 in pass-through mode).
    pub fn contraction(&self) -> f64 {
        let delta = self.compressor.delta();
        if self.is_pass_through() || delta >= 1.0 {
            0.0
        } else {
            (1.0 - delta).powi(self.u as i32)
        }
    }

    /// Rounds and scalars used for one vector.
    pub fn traffic(&self) -> (u64, u64) {
        if self.is_pass_through() {
            (1, self.compressor.dim as u64)
        } else {
            (self.u as u64, self.u as u64 * self.compressor.cost())
        }
    }
}

/// `FCC_u(x) = sum_k c^k` with `v^0 = 0`, `c^k = C(x - v^k)`, `v^{k+1} = v^k + c^k`.
pub fn fcc(x: &ParamVec, cfg: &FccConfig) -> Result<ParamVec> {
    x.ensure_dim(cfg.compressor.dim)?;
    if cfg.is_pass_through() {
        return Ok(x.clone());
    }
    let mut v = ParamVec::zeros(x.dim());
    for _ in 0..cfg.u {
        let residual = x.sub(&v)?;
        if residual.is_zero() {
            // Remaining rounds would only add zeros.
            break;
        }
        v = v.add(&cfg.compressor.apply(&residual)?)?;
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WorkerTraffic {
    pub rounds: u64,
    pub scalars: u64,
}

/// Cumulative communication of a distributed run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommLedger {
    pub compressor: String,
    pub u: u32,
    pub rounds: u64,
    pub scalars_sent: u64,
    pub per_worker: Vec<WorkerTraffic>,
}

impl CommLedger {
    pub fn new(cfg: &FccConfig, workers: usize) -> Self {
        Self {
            compressor: cfg.compressor.name(),
            u: cfg.u,
            rounds: 0,
            scalars_sent: 0,
            per_worker: vec![WorkerTraffic::default(); workers],
        }
    }

    pub fn record(&mut self, worker: usize, rounds: u64, scalars: u64) {
        let w = &mut self.per_worker[worker];
        w.rounds += rounds;
        w.scalars += scalars;
        self.rounds += rounds;
        self.scalars_sent += scalars;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVec {
        ParamVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn topk_examples() {
        let x = pv(&[3.0, -1.0, 2.0]);
        let c = topk_compress(&x, 2).unwrap();
        assert_eq!(c.as_slice(), &[3.0, 0.0, 2.0]);
        assert!(x.sub(&c).unwrap().norm_sq() <= (1.0 / 3.0) * x.norm_sq());
        assert_eq!(topk_compress(&x, 3).unwrap(), x);
        assert_eq!(topk_compress(&pv(&[1.0, 1.0, 1.0]), 1).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(topk_compress(&pv(&[1.0, -4.0, 4.0, 4.0]), 2).unwrap().as_slice(), &[0.0, -4.0, 4.0, 0.0]);
        assert!(topk_compress(&x, 0).is_err());
        assert!(topk_compress(&x, 4).is_err());
    }

    #[test]
    fn fcc_examples() {
        let x = pv(&[3.0, 4.0]);
        let cfg = FccConfig::new(Compressor::top_k(1, 2).unwrap(), 2).unwrap();
        assert_eq!(fcc(&x, &cfg).unwrap(), x);
        let one = FccConfig::new(Compressor::top_k(1, 2).unwrap(), 1).unwrap();
        assert_eq!(fcc(&x, &one).unwrap().as_slice(), &[0.0, 4.0]);
        let ident = FccConfig::new(Compressor::identity(2), 1).unwrap();
        assert_eq!(fcc(&x, &ident).unwrap(), x);
        assert_eq!(fcc(&x, &FccConfig::pass_through(2)).unwrap(), x);
        assert!(FccConfig::new(Compressor::top_k(1, 2).unwrap(), 0).is_err());
    }

    #[test]
    fn traffic_and_contraction() {
        let cfg = FccConfig::new(Compressor::top_k(2, 10).unwrap(), 3).unwrap();
        assert_eq!(cfg.traffic(), (3, 12));
        assert!((cfg.contraction() - 0.8f64.powi(3)).abs() < 1e-15);
        assert_eq!(FccConfig::pass_through(7).traffic(), (1, 7));
        assert_eq!(FccConfig::pass_through(7).contraction(), 0.0);
        let mut ledger = CommLedger::new(&cfg, 2);
        ledger.record(1, 3, 12);
        ledger.record(1, 3, 12);
        assert_eq!((ledger.rounds, ledger.scalars_sent), (6, 24));
        assert_eq!(ledger.per_worker[0], WorkerTraffic::default());
    }
}
