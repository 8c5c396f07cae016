//! Trajectory driver and per-step records.

use std::io::Write;

use serde::Serialize;

use crate::comms::CommLedger;
use crate::error::{Error, Result};
use crate::problems::{GradientOracle, Objective};
use crate::vector::ParamVec;

use super::OptimizerState;

pub const CSV_HEADER: &str = "t,f,grad_l1,grad_l2,eps_l2,step_len,comm_rounds,comm_scalars";

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub steps: u64,
    pub seed: u64,
    /// Also log `||m^t - grad f(w^t)||_2` (one extra exact gradient per step).
    pub exact_grad_logging: bool,
    /// Keep every iterate `w^1 ..= w^{T+1}`.
    pub keep_trajectory: bool,
}

impl RunOptions {
    pub fn new(steps: u64, seed: u64) -> Self {
        Self { steps, seed, ..Self::default() }
    }
}

/// One row per iteration `t`, measured at `w^t` before the step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRow {
    pub t: u64,
    pub f: f64,
    pub grad_l1: f64,
    pub grad_l2: f64,
    pub eps_l2: Option<f64>,
    pub step_len: f64,
    /// Cumulative communication after this step (distributed runs only).
    pub comm_rounds: Option<u64>,
    pub comm_scalars: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub kind: String,
    pub operator: String,
    pub gamma: f64,
    pub theta: f64,
    pub zeta: f64,
    pub lambda: f64,
    pub seed: u64,
    #[serde(rename = "T")]
    pub steps: u64,
    pub problem: String,
    pub dim: usize,
    pub mean_grad_l1: Option<f64>,
    pub failure: Option<String>,
    pub warnings: Vec<String>,
    pub comm: Option<CommLedger>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub rows: Vec<StepRow>,
    pub meta: RunMeta,
    pub trajectory: Option<Vec<ParamVec>>,
    pub final_state: OptimizerState,
}

impl RunRecord {
    pub fn is_partial(&self) -> bool {
        self.meta.failure.is_some()
    }

    /// `(1/T) sum_t ||grad f(w^t)||_1` over the logged rows.
    pub fn mean_grad_l1(&self) -> Option<f64> {
        mean(self.rows.iter().map(|r| r.grad_l1))
    }

    /// Mean `grad_l1` over rows in the fractional window `[from, to)` of the run.
    pub fn window_mean_grad_l1(&self, from: f64, to: f64) -> Option<f64> {
        let n = self.rows.len() as f64;
        let lo = (from * n).floor() as usize;
        let hi = ((to * n).ceil() as usize).min(self.rows.len());
        mean(self.rows.get(lo..hi)?.iter().map(|r| r.grad_l1))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.t,
                r.f,
                r.grad_l1,
                r.grad_l2,
                opt(r.eps_l2),
                r.step_len,
                opt(r.comm_rounds),
                opt(r.comm_scalars),
            )?;
        }
        Ok(())
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| crate::exec::ordered_sum(&v) / v.len() as f64)
}

pub(crate) fn base_meta(state: &OptimizerState, objective: &Objective, opts: &RunOptions) -> RunMeta {
    let h = &state.hyper;
    RunMeta {
        kind: state.kind.name().to_string(),
        operator: h.operator.name().to_string(),
        gamma: h.gamma,
        theta: h.theta,
        zeta: h.zeta,
        lambda: h.lambda,
        seed: opts.seed,
        steps: opts.steps,
        problem: objective.kind().name().to_string(),
        dim: objective.dim(),
        mean_grad_l1: None,
        failure: None,
        warnings: Vec::new(),
        comm: None,
    }
}

/// Output of one step of a driver: the new state and cumulative comm counters.
pub(crate) type Advance = (OptimizerState, Option<(u64, u64)>);

/// Shared loop for single-node and distributed runs.
pub(crate) fn drive(
    objective: &Objective,
    state0: OptimizerState,
    opts: &RunOptions,
    mut meta: RunMeta,
    mut advance: impl FnMut(&OptimizerState) -> Result<Advance>,
) -> Result<RunRecord> {
    if opts.steps == 0 {
        return Err(Error::invalid("T must be >= 1"));
    }
    state0.w.ensure_dim(objective.dim())?;
    let mut rows = Vec::with_capacity(opts.steps as usize);
    let mut trajectory = opts.keep_trajectory.then(|| vec![state0.w.clone()]);
    let mut state = state0;
    for t in 1..=opts.steps {
        let outcome = (|| -> Result<(StepRow, Advance)> {
            let f = objective.eval_value(&state.w)?;
            let g = objective.eval_grad(&state.w)?;
            let (next, comm) = advance(&state)?;
            let eps_l2 = if opts.exact_grad_logging { Some(next.m.sub(&g)?.norm_l2()) } else { None };
            let row = StepRow {
                t,
                f,
                grad_l1: g.norm_l1(),
                grad_l2: g.norm_l2(),
                eps_l2,
                step_len: next.w.distance(&state.w),
                comm_rounds: comm.map(|c| c.0),
                comm_scalars: comm.map(|c| c.1),
            };
            Ok((row, (next, comm)))
        })();
        match outcome {
            Ok((row, (next, _))) => {
                rows.push(row);
                if let Some(traj) = trajectory.as_mut() {
                    traj.push(next.w.clone());
                }
                state = next;
            }
            Err(e) => {
                meta.failure = Some(format!("step {t}: {e}"));
                break;
            }
        }
    }
    meta.mean_grad_l1 = mean(rows.iter().map(|r| r.grad_l1));
    Ok(RunRecord { rows, meta, trajectory, final_state: state })
}

/// Runs `opts.steps` iterations of `state0.kind` against `oracle`.
///
/// A failing step ends the run early; the record keeps the rows logged so
/// far and carries the error in `meta.failure`.
pub fn run<O: GradientOracle + ?Sized>(oracle: &O, state0: OptimizerState, opts: &RunOptions) -> Result<RunRecord> {
    let meta = base_meta(&state0, oracle.objective(), opts);
    drive(oracle.objective(), state0, opts, meta, |s| Ok((s.step(oracle, opts.seed)?, None)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{Hyper, OptimizerKind};
    use crate::problems::StochasticOracle;

    fn sign_state(dim: usize, gamma: f64, w0: f64) -> OptimizerState {
        OptimizerState::new(
            OptimizerKind::SignSgd,
            Hyper::sign(dim, gamma, 0.0, 0.0).unwrap(),
            ParamVec::filled(dim, w0),
        )
    }

    #[test]
    fn deterministic_descent_then_ball() {
        let oracle = StochasticOracle::exact(Objective::isotropic_quadratic(3).unwrap());
        let gamma = 0.01;
        let rec = run(&oracle, sign_state(3, gamma, 1.0), &RunOptions::new(300, 0)).unwrap();
        assert_eq!(rec.rows.len(), 300);
        let radius = gamma * 3f64.sqrt();
        let mut entered = false;
        for pair in rec.rows.windows(2) {
            let inside = pair[0].grad_l2 <= radius;
            entered |= inside;
            if !entered {
                assert!(pair[1].grad_l1 < pair[0].grad_l1);
            } else {
                assert!(pair[1].grad_l2 <= 2.0 * radius);
            }
        }
        assert!(entered);
    }

    #[test]
    fn reproducible_and_logged() {
        let obj = Objective::rank_one_spiked(5, 2.0, 9).unwrap();
        let oracle = StochasticOracle::new(obj, 1.0).unwrap();
        let opts = RunOptions { steps: 50, seed: 4, exact_grad_logging: true, keep_trajectory: true };
        let a = run(&oracle, sign_state(5, 0.01, 0.3), &opts).unwrap();
        let b = run(&oracle, sign_state(5, 0.01, 0.3), &opts).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.trajectory, b.trajectory);
        assert!(a.rows.iter().all(|r| r.eps_l2.is_some()));
        assert_eq!(a.trajectory.as_ref().unwrap().len(), 51);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 51);
        assert!(text.lines().nth(1).unwrap().ends_with(",,"));
        assert!((a.meta.mean_grad_l1.unwrap() - a.mean_grad_l1().unwrap()).abs() == 0.0);
    }

    #[test]
    fn failure_yields_partial_record() {
        let oracle = StochasticOracle::exact(Objective::scalar_power(4, 1).unwrap());
        let s =
            OptimizerState::new(OptimizerKind::Sgd, Hyper::sign(1, 1.0, 0.0, 0.0).unwrap(), ParamVec::filled(1, 10.0));
        let rec = run(&oracle, s, &RunOptions::new(100, 0)).unwrap();
        assert!(rec.is_partial());
        assert!(rec.rows.len() < 100);
        assert!(run(&oracle, sign_state(1, 0.1, 0.0), &RunOptions::new(0, 0)).is_err());
    }

    #[test]
    fn windows() {
        let oracle = StochasticOracle::exact(Objective::isotropic_quadratic(2).unwrap());
        let rec = run(&oracle, sign_state(2, 0.1, 1.0), &RunOptions::new(10, 0)).unwrap();
        assert_eq!(rec.window_mean_grad_l1(0.0, 0.1), Some(rec.rows[0].grad_l1));
        assert_eq!(rec.window_mean_grad_l1(0.0, 1.0), rec.mean_grad_l1());
    }
}
