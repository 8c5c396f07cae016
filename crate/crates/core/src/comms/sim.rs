//! Parameter-server simulation of compressed accelerated SignSGD.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::optim::record::{base_meta, drive};
use crate::optim::{OptimizerKind, OptimizerState, RunOptions, RunRecord};
use crate::problems::WorkerOracle;
use crate::vector::ParamVec;

use super::{fcc, CommLedger, FccConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributedOptions {
    pub fcc: FccConfig,
    /// Sample worker gradients at the extrapolated point `v^t` instead of `w^t`.
    pub eval_at_v: bool,
    pub exec: Execution,
}

/// Per-worker traffic of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTraffic {
    pub per_worker: Vec<(u64, u64)>,
}

/// Mean of equally sized vectors computed as `x_0 + (sum_{i>0} (x_i - x_0)) / n`
/// in ascending index order. Identical inputs give back `x_0` exactly.
pub fn fixed_order_mean(vectors: &[ParamVec]) -> Result<ParamVec> {
    let first = vectors.first().ok_or_else(|| Error::invalid("mean of zero vectors"))?;
    if vectors.len() == 1 {
        return Ok(first.clone());
    }
    let n = vectors.len() as f64;
    let mut dev = vec![0.0; first.dim()];
    for v in &vectors[1..] {
        v.ensure_dim(first.dim())?;
        for ((acc, a), b) in dev.iter_mut().zip(v.iter()).zip(first.iter()) {
            *acc += a - b;
        }
    }
    let out = first.iter().zip(&dev).map(|(f, s)| f + s / n).collect();
    ParamVec::from_computed(out, "worker mean")
}

/// One synchronous round: every worker samples its local gradient, sends
/// the FCC-compressed result, and the server takes a momentum sign step on
/// the mean.
pub fn casign_round(
    server: &OptimizerState,
    oracles: &WorkerOracle,
    opts: &DistributedOptions,
    seed: u64,
) -> Result<(OptimizerState, RoundTraffic)> {
    if !matches!(server.kind, OptimizerKind::SignSgd | OptimizerKind::ASignSgd) || !server.hyper.operator.is_sign() {
        return Err(Error::invalid("the server must run a sign-based momentum update"));
    }
    let point = if opts.eval_at_v { server.lookahead()? } else { server.w.clone() };
    point.ensure_dim(oracles.base().dim())?;
    let t = server.t + 1;
    let sent = opts
        .exec
        .map_indexed(oracles.workers(), |i| fcc(&oracles.sample_local(i, &point, t, seed)?, &opts.fcc))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mean = fixed_order_mean(&sent)?;
    let next = server.apply_gradient(&mean)?;
    let per_worker = vec![opts.fcc.traffic(); oracles.workers()];
    Ok((next, RoundTraffic { per_worker }))
}

/// Runs `opts.steps` rounds and logs the global objective at the server
/// iterate, with cumulative communication columns.
pub fn run_distributed(
    oracles: &WorkerOracle,
    state0: OptimizerState,
    run: &RunOptions,
    opts: &DistributedOptions,
) -> Result<RunRecord> {
    if opts.fcc.compressor.dim != oracles.base().dim() {
        return Err(Error::DimensionMismatch { expected: oracles.base().dim(), got: opts.fcc.compressor.dim });
    }
    let mut meta = base_meta(&state0, oracles.base(), run);
    meta.kind = "ca_sign_sgd".to_string();
    let mut ledger = CommLedger::new(&opts.fcc, oracles.workers());
    let mut record = drive(oracles.base(), state0, run, meta, |s| {
        let (next, traffic) = casign_round(s, oracles, opts, run.seed)?;
        for (i, (rounds, scalars)) in traffic.per_worker.iter().enumerate() {
            ledger.record(i, *rounds, *scalars);
        }
        Ok((next, Some((ledger.rounds, ledger.scalars_sent))))
    })?;
    record.meta.comm = Some(ledger);
    Ok(record)
}
