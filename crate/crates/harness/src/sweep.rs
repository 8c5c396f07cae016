//! Executing runs and sweeps, and writing their CSV / JSON outputs.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use signopt_core::comms::run_distributed;
use signopt_core::optim::{run, RunRecord};
use signopt_core::smoothness::{
    fit_affine_envelope, trajectory_smoothness, write_samples_csv, AffineEnvelope, SmoothnessTrace, DEFAULT_DELTA,
    DEFAULT_QUANTILE,
};
use signopt_core::Execution;

use crate::config::{Experiment, RunPlan};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: String,
    pub t: u64,
    pub seed: u64,
    pub record: RunRecord,
    pub smoothness: Option<(SmoothnessTrace, AffineEnvelope)>,
}

impl RunOutcome {
    pub fn mean_grad_l1(&self) -> Option<f64> {
        self.record.mean_grad_l1()
    }

    /// JSON metadata: the run's own metadata plus identifiers and any envelope fit.
    pub fn meta_json(&self) -> Value {
        let mut meta = serde_json::to_value(&self.record.meta).expect("metadata serializes");
        let obj = meta.as_object_mut().expect("metadata is an object");
        obj.insert("run_id".into(), json!(self.run_id));
        obj.insert("rows".into(), json!(self.record.rows.len()));
        if let Some((trace, env)) = &self.smoothness {
            obj.insert(
                "smoothness".into(),
                json!({ "samples": trace.samples.len(), "skipped": trace.skipped, "envelope": env }),
            );
        }
        meta
    }

    /// Writes `<run_id>.csv`, `<run_id>.meta.json` and, with a smoothness
    /// trace, `<run_id>.smoothness.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let csv = dir.join(format!("{}.csv", self.run_id));
        let file = fs::File::create(&csv).with_context(|| format!("creating {}", csv.display()))?;
        self.record.write_csv(BufWriter::new(file))?;
        let meta = dir.join(format!("{}.meta.json", self.run_id));
        fs::write(&meta, format!("{}\n", self.meta_json()))?;
        if let Some((trace, _)) = &self.smoothness {
            let path = dir.join(format!("{}.smoothness.csv", self.run_id));
            write_samples_csv(BufWriter::new(fs::File::create(&path)?), &trace.samples)?;
        }
        Ok(csv)
    }
}

/// Executes one planned run.
pub fn execute(exp: &Experiment, plan: RunPlan) -> Result<RunOutcome> {
    let RunPlan { run_id, state0, options, distributed, warnings } = plan;
    let mut record = match (&distributed, exp.workers()) {
        (Some(opts), Some(workers)) => run_distributed(workers, state0, &options, opts)?,
        _ => run(&exp.single_oracle(), state0, &options)?,
    };
    record.meta.warnings.extend(warnings);
    let smoothness = match record.trajectory.as_deref() {
        Some(traj) if exp.config.logging.smoothness_trace => {
            let delta = exp.config.logging.smoothness_delta.unwrap_or(DEFAULT_DELTA);
            let trace = trajectory_smoothness(&exp.objective, traj, delta, Execution::default())?;
            let env = fit_affine_envelope(&trace.samples, DEFAULT_QUANTILE)?;
            Some((trace, env))
        }
        _ => None,
    };
    if smoothness.is_some() {
        record.trajectory = None;
    }
    Ok(RunOutcome { run_id, t: options.steps, seed: options.seed, record, smoothness })
}

/// Every `(T, seed)` pair of the experiment, horizons outermost.
pub fn jobs(exp: &Experiment) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for t in exp.horizons() {
        for &seed in &exp.config.seeds {
            out.push((t, seed));
        }
    }
    out
}

fn pool_size(jobs: usize) -> usize {
    let hw = if Execution::parallel_available() {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        1
    };
    hw.min(jobs).max(1)
}

/// Runs every `(T, seed)` pair on a bounded pool of worker threads. A single
/// collector writes each finished run to `out` (when given) as it arrives.
/// Outcomes come back in job order.
pub fn run_sweep(exp: &Experiment, out: Option<&Path>) -> Result<Vec<RunOutcome>> {
    let jobs = jobs(exp);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<RunOutcome>)>();
    let mut results: Vec<Option<RunOutcome>> = vec![None; jobs.len()];
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..pool_size(jobs.len()) {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(t, seed)) = jobs.get(i) else { break };
                let outcome = exp.plan(t, seed).map_err(anyhow::Error::from).and_then(|plan| execute(exp, plan));
                if tx.send((i, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, outcome) in rx {
            let outcome = outcome?;
            if let Some(dir) = out {
                outcome.write_to(dir)?;
            }
            results[i] = Some(outcome);
        }
        Ok(())
    })?;
    Ok(results.into_iter().map(|r| r.expect("every job reports")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn exp(extra: &str) -> Experiment {
        parse_config(&format!(
            r#"{{"problem":{{"kind":"rank_one","d":4}},"init":{{"kind":"near_minimizer","offset":0.2}},
            "optimizer":{{"kind":"a_sign_sgd","gamma":0.001,"theta":0.9}},"noise":{{"sigma":1}} {extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn one_record_per_seed_and_horizon() {
        let e = exp(r#","T":100,"seeds":[0,1,2]"#);
        let out = run_sweep(&e, None).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|o| o.record.rows.len() == 100));
        let grid = exp(r#","T":[128,512,2048],"seeds":[0,1]"#);
        let out = run_sweep(&grid, None).unwrap();
        assert_eq!(out.iter().map(|o| o.t).collect::<Vec<_>>(), vec![128, 128, 512, 512, 2048, 2048]);
    }

    #[test]
    fn smoothness_trace_is_attached() {
        let e = exp(r#","T":50,"seeds":[3],"logging":{"smoothness_trace":true}"#);
        let out = run_sweep(&e, None).unwrap();
        let (trace, env) = out[0].smoothness.as_ref().unwrap();
        assert_eq!(trace.samples.len() + trace.skipped, 50);
        assert!(env.coverage >= 0.95);
        assert!(out[0].record.trajectory.is_none());
        assert!(out[0].meta_json()["smoothness"]["envelope"]["coverage"].as_f64().unwrap() >= 0.95);
    }
}
