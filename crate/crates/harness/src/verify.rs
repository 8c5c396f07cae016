//! Verification suites: randomized and deterministic checks of the operator
//! contract, compression bounds, descent inequalities, compressed-mean
//! error bounds and the smoothness estimators.

use std::str::FromStr;

use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::{json, Value};
use signopt_core::comms::{fcc, mc_check_cross_term, mc_check_mean_error, Compressor, FccConfig};
use signopt_core::optim::{run, trace_descent, DescentRule, Hyper, OptimizerKind, OptimizerState, RunOptions};
use signopt_core::problems::{split_workers, Objective, StochasticOracle};
use signopt_core::rng::{standard_normal_vec, Purpose};
use signopt_core::signcore::{verify_operator_contract, DescentOperator};
use signopt_core::smoothness::{
    check_third_order_bound, estimate_local_h, fit_affine_envelope, trajectory_smoothness, DEFAULT_DELTA,
    DEFAULT_QUANTILE,
};
use signopt_core::{Execution, ParamVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    #[serde(rename = "condition1")]
    OperatorContract,
    Contraction,
    Descent,
    #[serde(rename = "lemmas")]
    CompressedMean,
    Smoothness,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::OperatorContract, Suite::Contraction, Suite::Descent, Suite::CompressedMean, Suite::Smoothness];

    pub fn name(self) -> &'static str {
        match self {
            Suite::OperatorContract => "condition1",
            Suite::Contraction => "contraction",
            Suite::Descent => "descent",
            Suite::CompressedMean => "lemmas",
            Suite::Smoothness => "smoothness",
        }
    }

    /// Vectors, steps or Monte-Carlo samples used when `--trials` is absent.
    pub fn default_trials(self) -> usize {
        match self {
            Suite::Descent | Suite::Smoothness => 500,
            _ => 10_000,
        }
    }
}

impl FromStr for Suite {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|suite| suite.name() == s).ok_or_else(|| {
            anyhow::anyhow!("unknown suite '{s}' (expected condition1, contraction, descent, lemmas or smoothness)")
        })
    }
}

/// One named check. `margin >= 0` means it passed with room to spare.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: Value,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, margin: f64, detail: Value) -> Self {
        Self { name: name.into(), passed, margin, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub passes: usize,
    pub failures: usize,
    pub worst_margin: f64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn from_checks(suite: Suite, trials: usize, seed: u64, checks: Vec<Check>) -> Self {
        let passes = checks.iter().filter(|c| c.passed).count();
        let worst_margin = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        Self { suite, trials, seed, passes, failures: checks.len() - passes, worst_margin, checks }
    }

    pub fn all_passed(&self) -> bool {
        self.failures == 0
    }
}

pub fn run_suite(suite: Suite, trials: Option<usize>, seed: u64, exec: Execution) -> Result<VerifyReport> {
    let trials = trials.unwrap_or(suite.default_trials());
    if trials == 0 {
        bail!("trials must be >= 1");
    }
    let checks = match suite {
        Suite::OperatorContract => operator_contract_checks(trials, seed, exec)?,
        Suite::Contraction => contraction_checks(trials, seed, exec)?,
        Suite::Descent => descent_checks(trials)?,
        Suite::CompressedMean => compressed_mean_checks(trials, seed, exec)?,
        Suite::Smoothness => smoothness_checks(trials, seed, exec)?,
    };
    Ok(VerifyReport::from_checks(suite, trials, seed, checks))
}

pub const CONTRACT_DIM: usize = 16;
pub const CONTRACT_REL_TOL: f64 = 1e-12;

/// Sign and l2 normalization: `<x, T x> >= l ||x||_diamond` and `||T x|| <= U`.
pub fn operator_contract_checks(trials: usize, seed: u64, exec: Execution) -> Result<Vec<Check>> {
    [DescentOperator::sign(CONTRACT_DIM), DescentOperator::l2_normalize()]
        .iter()
        .map(|op| {
            let r = verify_operator_contract(op, CONTRACT_DIM, trials, seed, exec)?;
            // The sign bound is exact; normalization carries one rounding.
            let norm_tol = if op.is_sign() { 0.0 } else { CONTRACT_REL_TOL };
            let margin = (CONTRACT_REL_TOL - (r.min_ratio - 1.0).abs()).min(op.u * (1.0 + norm_tol) - r.max_norm);
            Ok(Check::new(
                format!("condition1/{}", r.operator),
                r.passed() && margin >= 0.0,
                margin,
                json!({ "min_ratio": r.min_ratio, "max_norm": r.max_norm, "violations": r.violations }),
            ))
        })
        .collect()
}

pub const CONTRACTION_DIM: usize = 32;
pub const CONTRACTION_KS: [usize; 3] = [1, 8, 32];

fn verification_vector(dim: usize, seed: u64, counter: u64, lane: u64) -> ParamVec {
    ParamVec::new(standard_normal_vec(dim, seed, counter, lane, Purpose::Verification))
        .expect("gaussian draw is finite")
}

/// Per-vector outcome of the contraction and FCC checks for one `k`.
struct ContractionTrial {
    /// `(bound - residual) / ||x||^2` for plain top-k and FCC with `u = 1, 2, 3`.
    margins: [f64; 4],
    /// `residual / ||x||^2` of plain top-k.
    ratio: f64,
    recursion_exact: bool,
}

fn contraction_trial(x: &ParamVec, k: usize) -> Result<ContractionTrial> {
    let d = x.dim();
    let comp = Compressor::top_k(k, d)?;
    let norm_sq = x.norm_sq();
    let delta = comp.delta();
    let residual = x.sub(&comp.apply(x)?)?.norm_sq();
    let mut margins = [(1.0 - delta) * norm_sq - residual, 0.0, 0.0, 0.0];
    let mut recursion_exact = true;
    let mut prev = ParamVec::zeros(d);
    for u in 1..=3u32 {
        let cur = fcc(x, &FccConfig::new(comp, u)?)?;
        let res = x.sub(&cur)?.norm_sq();
        margins[u as usize] = (1.0 - delta).powi(u as i32) * norm_sq - res;
        recursion_exact &= cur.sub(&prev)? == comp.apply(&x.sub(&prev)?)?;
        prev = cur;
    }
    Ok(ContractionTrial { margins: margins.map(|m| m / norm_sq), ratio: residual / norm_sq, recursion_exact })
}

/// Top-k residual bound, FCC geometric residual bound for `u = 1, 2, 3` and
/// the FCC recursion identity, all without tolerance.
pub fn contraction_checks(trials: usize, seed: u64, exec: Execution) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for k in CONTRACTION_KS {
        let per = exec
            .map_indexed(trials, |i| {
                contraction_trial(&verification_vector(CONTRACTION_DIM, seed, i as u64, k as u64), k)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let labels = ["topk".to_string(), "fcc_u1".into(), "fcc_u2".into(), "fcc_u3".into()];
        for (j, label) in labels.iter().enumerate() {
            let violations = per.iter().filter(|p| p.margins[j] < 0.0).count();
            let worst = per.iter().map(|p| p.margins[j]).fold(f64::INFINITY, f64::min);
            let mut detail = json!({ "k": k, "d": CONTRACTION_DIM, "violations": violations });
            if j == 0 {
                detail["max_residual_ratio"] = json!(per.iter().map(|p| p.ratio).fold(0.0, f64::max));
            }
            checks.push(Check::new(format!("{label}/k{k}"), violations == 0, worst, detail));
        }
        let broken = per.iter().filter(|p| !p.recursion_exact).count();
        checks.push(Check::new(
            format!("fcc_recursion/k{k}"),
            broken == 0,
            if broken == 0 { 0.0 } else { -1.0 },
            json!({ "k": k, "mismatches": broken }),
        ));
    }
    Ok(checks)
}

/// The quadratic and rank-one settings of the descent checks.
pub fn descent_problems() -> Result<Vec<(&'static str, Objective, ParamVec)>> {
    let diag: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let quad = Objective::quadratic_diag(&diag)?;
    let start = ParamVec::new((0..10).map(|i| if i % 2 == 0 { 1.5 } else { -2.0 }).collect())?;
    let rank = Objective::rank_one_spiked(10, 2.0, 0)?;
    let center = rank.minimizer().expect("rank-one minimizer");
    let offsets = standard_normal_vec(10, 17, 0, 0, Purpose::Initialization);
    let near = ParamVec::new(center.iter().zip(&offsets).map(|(c, z)| c + 0.25 * z.signum()).collect())?;
    Ok(vec![("quadratic", quad, start), ("rank_one", rank, near)])
}

/// Largest step admissible for the rule, halved for slack.
fn descent_gamma(obj: &Objective, op: &DescentOperator, rule: DescentRule) -> f64 {
    let k = obj.smoothness();
    let (l1, l2, r) = (k.l1.unwrap_or(1.0), k.l2.unwrap_or(0.0), k.r.unwrap_or(f64::INFINITY));
    let d = obj.dim() as f64;
    let cap = match rule {
        DescentRule::Sign => (1.0 / (l2 * d)).min(r / d.sqrt()),
        DescentRule::Operator => (op.norm_equiv.0 * op.l / (op.u * op.u * l2)).min(r / op.u),
    };
    0.5 * cap.min(0.02 / l1.max(1.0))
}

/// Exact-gradient trajectories checked step by step against the sign and
/// general-operator one-step descent inequalities.
pub fn descent_checks(steps: usize) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (name, obj, w0) in descent_problems()? {
        for (rule, kind, op) in [
            (DescentRule::Sign, OptimizerKind::ASignSgd, DescentOperator::sign(obj.dim())),
            (DescentRule::Operator, OptimizerKind::GSignSgd, DescentOperator::l2_normalize()),
        ] {
            let gamma = descent_gamma(&obj, &op, rule);
            let hyper = Hyper::new(gamma, 0.9, 0.0, 0.0, op)?;
            let summary = trace_descent(&obj, &OptimizerState::new(kind, hyper, w0.clone()), steps, rule)?;
            let label = match rule {
                DescentRule::Sign => "sign",
                DescentRule::Operator => "l2_normalize",
            };
            checks.push(Check::new(
                format!("descent/{label}/{name}"),
                summary.violations == 0,
                summary.worst_slack,
                json!({ "gamma": gamma, "steps": summary.steps, "violations": summary.violations,
                        "max_grad_norm": summary.max_grad_norm }),
            ));
        }
    }
    Ok(checks)
}

/// Settings of the compressed-mean Monte-Carlo checks: `n = 4`, `d = 10`,
/// `sigma = sigma_bar = 1`, top-2.
pub fn compressed_mean_checks(samples: usize, seed: u64, exec: Execution) -> Result<Vec<Check>> {
    let obj = Objective::rank_one_spiked(10, 2.0, 0)?;
    let workers = split_workers(&obj, 4, 1.0, seed)?.with_noise(1.0)?;
    let x =
        ParamVec::new(standard_normal_vec(10, seed, 1, 0, Purpose::Verification).iter().map(|v| 0.5 * v).collect())?;
    let y =
        ParamVec::new(standard_normal_vec(10, seed, 2, 0, Purpose::Verification).iter().map(|v| 0.5 * v).collect())?;
    let mut checks = Vec::new();
    for u in [1u32, 2] {
        let cfg = FccConfig::new(Compressor::top_k(2, 10)?, u)?;
        let r3 = mc_check_mean_error(&workers, &cfg, &x, samples, seed, exec)?;
        checks.push(Check::new(format!("mean_error/top2_u{u}"), r3.passes(), r3.margin(), json!(r3)));
        let r4 = mc_check_cross_term(&workers, &cfg, &x, &y, samples, seed, exec)?;
        checks.push(Check::new(format!("cross_term/top2_u{u}"), r4.passes(), r4.margin(), json!(r4)));
    }
    let ident = FccConfig::new(Compressor::identity(10), 1)?;
    let r = mc_check_mean_error(&workers, &ident, &x, samples, seed, exec)?;
    checks.push(Check::new("mean_error/identity", r.passes(), r.margin(), json!(r)));
    Ok(checks)
}

pub const SMOOTHNESS_TOL: f64 = 1e-9;

/// Second-difference estimator on cubic and quadratic fixtures, third-order
/// bounds at random points, and the affine envelope of a rank-one trajectory.
pub fn smoothness_checks(steps: usize, seed: u64, exec: Execution) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let one = ParamVec::filled(1, 1.0);
    let h = estimate_local_h(&Objective::cubic(1)?, &one, &one, DEFAULT_DELTA)?;
    checks.push(Check::new(
        "local_h/cubic",
        (h - 6.0).abs() <= SMOOTHNESS_TOL,
        SMOOTHNESS_TOL - (h - 6.0).abs(),
        json!({ "estimate": h }),
    ));
    let quad = Objective::quadratic_diag(&[3.0, 0.5, 1.0])?;
    let w = verification_vector(3, seed, 0, 1);
    let dir = verification_vector(3, seed, 1, 1);
    let hq = estimate_local_h(&quad, &w, &dir, DEFAULT_DELTA)?;
    checks.push(Check::new(
        "local_h/quadratic",
        hq.abs() <= SMOOTHNESS_TOL,
        SMOOTHNESS_TOL - hq.abs(),
        json!({ "estimate": hq }),
    ));

    for obj in [
        Objective::rank_one_spiked(6, 2.0, seed)?,
        Objective::scalar_power(4, 6)?,
        Objective::scalar_exp(6)?,
        Objective::cubic(6)?,
    ] {
        let mut worst = f64::INFINITY;
        let mut ok = true;
        for i in 0..100u64 {
            let x = verification_vector(6, seed, 100 + i, 2);
            let c = check_third_order_bound(&obj, &x)?;
            worst = worst.min(c.slack() / (1.0 + c.rhs()));
            ok &= c.holds();
        }
        checks.push(Check::new(format!("third_order/{}", obj.kind().name()), ok, worst, json!({ "points": 100 })));
    }

    let obj = Objective::rank_one_spiked(10, 2.0, 0)?;
    let oracle = StochasticOracle::new(obj.clone(), 1.0)?;
    let center = obj.minimizer().expect("rank-one minimizer");
    let w0 = center.axpy(0.25, &ParamVec::filled(10, 1.0))?;
    let state = OptimizerState::new(OptimizerKind::ASignSgd, Hyper::sign(10, 1e-3, 0.9, 0.0)?, w0);
    let opts = RunOptions { steps: steps as u64, seed, exact_grad_logging: false, keep_trajectory: true };
    let record = run(&oracle, state, &opts)?;
    let traj = record.trajectory.as_deref().expect("trajectory kept");
    let trace = trajectory_smoothness(&obj, traj, DEFAULT_DELTA, exec)?;
    let env = fit_affine_envelope(&trace.samples, DEFAULT_QUANTILE)?;
    checks.push(Check::new(
        "envelope/rank_one",
        env.coverage >= DEFAULT_QUANTILE,
        env.coverage - DEFAULT_QUANTILE,
        json!({ "samples": trace.samples.len(), "skipped": trace.skipped, "envelope": env }),
    ));
    Ok(checks)
}
