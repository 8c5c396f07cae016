//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use signopt_core::comms::{
    distributed_presets, mc_check_cross_term, mc_check_mean_error, run_distributed, Compressor, DistributedOptions,
    FccConfig,
};
use signopt_core::nalgebra::DMatrix;
use signopt_core::optim::{run, single_node_presets, Hyper, OptimizerKind, OptimizerState, RunOptions, RunRecord};
use signopt_core::problems::{
    fd_gradient, split_workers, Objective, PenaltyNet, ScaledOracle, SmoothnessConstants, StochasticOracle,
};
use signopt_core::rng::{standard_normal_vec, Purpose};
use signopt_core::signcore::{l2_normalize, sign, DescentOperator};
use signopt_core::smoothness::{
    estimate_local_h, fit_affine_envelope, trajectory_smoothness, DEFAULT_DELTA, DEFAULT_QUANTILE,
};
use signopt_core::{Execution, ParamVec};
use signopt_harness::median;
use signopt_harness::verify::{contraction_checks, descent_checks, Check};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn gaussian(dim: usize, seed: u64, counter: u64, scale: f64) -> ParamVec {
    let v = standard_normal_vec(dim, seed, counter, 0, Purpose::Verification);
    ParamVec::new(v.into_iter().map(|z| scale * z).collect()).unwrap()
}

fn within(elapsed: Duration, limit_s: f64, summary: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    if secs < limit_s {
        Ok(format!("{summary} ({secs:.2} s)"))
    } else {
        Err(format!("{summary}, but took {secs:.2} s (limit {limit_s} s)"))
    }
}

fn all_pass(checks: &[Check], filter: impl Fn(&Check) -> bool) -> Outcome {
    let selected: Vec<&Check> = checks.iter().filter(|c| filter(c)).collect();
    let failed: Vec<&str> = selected.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let worst = selected.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    if selected.is_empty() {
        Err("no checks selected".into())
    } else if failed.is_empty() {
        Ok(format!("{} checks, worst margin {worst:.3e}", selected.len()))
    } else {
        Err(format!("failed: {}", failed.join(", ")))
    }
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let net = PenaltyNet::new(vec![0.5, -1.0, 0.25], vec![1.0, -0.5], 4, 1.0).map_err(|e| e.to_string())?;
    let a = DMatrix::from_fn(5, 5, |i, j| if i == j { 2.0 + i as f64 } else { 0.3 });
    let objectives = [
        Objective::quadratic(a, vec![1.0, -2.0, 0.5, 0.0, 3.0]).unwrap(),
        Objective::rank_one_spiked(10, 2.0, 0).unwrap(),
        Objective::scalar_power(4, 6).unwrap(),
        Objective::scalar_exp(6).unwrap(),
        Objective::cubic(6).unwrap(),
        Objective::penalty_net(net).unwrap(),
    ];
    let mut worst = 0.0_f64;
    for (k, obj) in objectives.iter().enumerate() {
        for i in 0..100 {
            let x = gaussian(obj.dim(), 1000 + k as u64, i, 1.0);
            let g = obj.eval_grad(&x).unwrap();
            let fd = fd_gradient(obj, &x, 1e-5).unwrap();
            let rel = g.sub(&fd).unwrap().norm_l2() / g.norm_l2().max(f64::MIN_POSITIVE);
            if rel.is_nan() || rel >= 1e-5 {
                return Err(format!("{} at point {i}: relative error {rel:.3e}", obj.kind().name()));
            }
            worst = worst.max(rel);
        }
    }
    within(start.elapsed(), 5.0, format!("6 kinds x 100 points, max relative error {worst:.2e}"))
}

fn operator_identity() -> Outcome {
    let start = Instant::now();
    let (mut sign_err, mut sign_norm, mut l2_err, mut l2_norm) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..10_000 {
        let x = gaussian(16, 2, i, 1.0);
        let s = sign(&x);
        sign_err = sign_err.max((x.dot(&s) - x.norm_l1()).abs() / x.norm_l1());
        sign_norm = sign_norm.max(s.norm_l2());
        let n = l2_normalize(&x);
        l2_err = l2_err.max((x.dot(&n) - x.norm_l2()).abs() / x.norm_l2());
        l2_norm = l2_norm.max(n.norm_l2());
    }
    let ok = sign_err < 1e-12 && sign_norm <= 4.0 && l2_err < 1e-12 && (l2_norm - 1.0) < 1e-12;
    let summary = format!(
        "sign: rel err {sign_err:.1e}, max norm {sign_norm}; l2_normalize: rel err {l2_err:.1e}, max norm {l2_norm}"
    );
    if ok {
        within(start.elapsed(), 1.0, summary)
    } else {
        Err(summary)
    }
}

fn contraction(prefix: &'static [&'static str]) -> Outcome {
    let checks = contraction_checks(10_000, 3, Execution::default()).map_err(|e| e.to_string())?;
    all_pass(&checks, |c| prefix.iter().any(|p| c.name.starts_with(p)))
}

fn descent(label: &'static str) -> Outcome {
    let checks = descent_checks(500).map_err(|e| e.to_string())?;
    all_pass(&checks, |c| c.name.starts_with(label))
}

fn compressed_mean_bounds() -> Outcome {
    let start = Instant::now();
    let obj = Objective::rank_one_spiked(10, 2.0, 0).unwrap();
    let workers = split_workers(&obj, 4, 1.0, 5).unwrap().with_noise(1.0).unwrap();
    let cfg = FccConfig::new(Compressor::top_k(2, 10).unwrap(), 2).unwrap();
    let x = gaussian(10, 4, 0, 0.5);
    let y = gaussian(10, 4, 1, 0.5);
    let r3 = mc_check_mean_error(&workers, &cfg, &x, 10_000, 6, Execution::default()).map_err(|e| e.to_string())?;
    let r4 = mc_check_cross_term(&workers, &cfg, &x, &y, 10_000, 7, Execution::default()).map_err(|e| e.to_string())?;
    let summary = format!(
        "mean error {:.4} <= {:.4} + 3*{:.4}; cross term {:.4} <= {:.4} + 3*{:.4}",
        r3.lhs_mean, r3.rhs, r3.stderr, r4.lhs_mean, r4.rhs, r4.stderr
    );
    if r3.passes() && r4.passes() {
        within(start.elapsed(), 30.0, summary)
    } else {
        Err(summary)
    }
}

fn start_point(obj: &Objective, seed: u64) -> ParamVec {
    let center = obj.minimizer().unwrap();
    let z = standard_normal_vec(obj.dim(), seed, 0, 0, Purpose::Initialization);
    ParamVec::new(center.iter().zip(&z).map(|(c, z)| c + 0.25 * z.signum()).collect()).unwrap()
}

fn same_path(a: &RunRecord, b: &RunRecord) -> bool {
    a.trajectory == b.trajectory && a.rows.iter().zip(&b.rows).all(|(x, y)| x.grad_l1 == y.grad_l1 && x.f == y.f)
}

fn traced(steps: u64, seed: u64) -> RunOptions {
    RunOptions { steps, seed, exact_grad_logging: false, keep_trajectory: true }
}

fn equivalences() -> Outcome {
    let obj = Objective::rank_one_spiked(10, 2.0, 0).unwrap();
    let oracle = StochasticOracle::new(obj.clone(), 1.0).unwrap();
    let w0 = start_point(&obj, 9);
    let opts = traced(1000, 9);
    let with = |kind, zeta: f64, op: DescentOperator| {
        let hyper = Hyper::new(0.002, 0.9, zeta, 0.0, op).unwrap();
        run(&oracle, OptimizerState::new(kind, hyper, w0.clone()), &opts).unwrap()
    };
    let asign0 = with(OptimizerKind::ASignSgd, 0.0, DescentOperator::sign(10));
    let lion = with(OptimizerKind::Lion, 0.0, DescentOperator::sign(10));
    let asign = with(OptimizerKind::ASignSgd, 9.0, DescentOperator::sign(10));
    let gsign = with(OptimizerKind::GSignSgd, 9.0, DescentOperator::sign(10));
    let workers = split_workers(&obj, 1, 0.0, 0).unwrap().with_noise(1.0).unwrap();
    let dist = DistributedOptions { fcc: FccConfig::pass_through(10), eval_at_v: true, exec: Execution::default() };
    let hyper = Hyper::new(0.002, 0.9, 9.0, 0.0, DescentOperator::sign(10)).unwrap();
    let ca = run_distributed(&workers, OptimizerState::new(OptimizerKind::ASignSgd, hyper, w0.clone()), &opts, &dist)
        .map_err(|e| e.to_string())?;
    let results = [
        ("lion(lambda=0) = a_sign(zeta=0)", same_path(&lion, &asign0)),
        ("g_sign(sign) = a_sign", same_path(&gsign, &asign)),
        ("ca_sign(n=1, pass-through) = a_sign", same_path(&ca, &asign)),
    ];
    let text = results.iter().map(|(n, ok)| format!("{n}: {ok}")).collect::<Vec<_>>().join("; ");
    if results.iter().all(|r| r.1) {
        Ok(format!("1000 steps bit-exact; {text}"))
    } else {
        Err(text)
    }
}

fn scale_invariance() -> Outcome {
    let obj = Objective::rank_one_spiked(10, 2.0, 0).unwrap();
    let base = StochasticOracle::new(obj.clone(), 1.0).unwrap();
    let scaled = ScaledOracle::new(base.clone(), 7.0);
    let mut compared = 0;
    for seed in 0..3 {
        let w0 = start_point(&obj, seed);
        let opts = traced(1000, seed);
        for kind in [OptimizerKind::SignSgd, OptimizerKind::ASignSgd, OptimizerKind::Lion, OptimizerKind::GSignSgd] {
            let zeta = if matches!(kind, OptimizerKind::ASignSgd | OptimizerKind::GSignSgd) { 4.0 } else { 0.0 };
            let theta = if kind == OptimizerKind::SignSgd { 0.0 } else { 0.8 };
            let hyper = Hyper::new(0.002, theta, zeta, 0.0, DescentOperator::sign(10)).unwrap();
            let a = run(&base, OptimizerState::new(kind, hyper.clone(), w0.clone()), &opts).unwrap();
            let b = run(&scaled, OptimizerState::new(kind, hyper, w0.clone()), &opts).unwrap();
            if !same_path(&a, &b) {
                return Err(format!("{} seed {seed}: trajectories differ", kind.name()));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} runs (4 optimizers x 3 seeds, 1000 steps) bit-identical under c = 7"))
}

fn presets() -> Outcome {
    let l1 = SmoothnessConstants { l1: Some(1.0), ..Default::default() };
    let c1 = SmoothnessConstants { l1: Some(1.0), h1: Some(1.0), h2: Some(1.0), ..Default::default() };
    let p1 = single_node_presets(10_000, &l1, false, 10).map_err(|e| e.to_string())?;
    let pa = single_node_presets(128, &c1, true, 10).map_err(|e| e.to_string())?;
    let (p2, _) = distributed_presets(10_000, 4, 10, 0.2, &l1, false).map_err(|e| e.to_string())?;
    let summary = format!(
        "single-node ({}, {}); accelerated ({}, {}, {}); distributed 1-theta {}, gamma {}",
        p1.theta,
        p1.gamma,
        pa.theta,
        pa.gamma,
        pa.zeta,
        1.0 - p2.theta,
        p2.gamma
    );
    let ok = p1.theta == 0.99
        && p1.gamma == 0.001
        && pa.theta == 0.9375
        && pa.gamma == 0.03125
        && pa.zeta == 15.0
        && (1.0 - p2.theta - 0.02).abs() <= 1e-12
        && (p2.gamma - 2f64.sqrt() / 1000.0).abs() <= 1e-12;
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn benchmark() -> (Objective, StochasticOracle, SmoothnessConstants) {
    let obj = Objective::rank_one_spiked(10, 2.0, 0).unwrap();
    let oracle = StochasticOracle::new(obj.clone(), 1.0).unwrap();
    let k = *obj.smoothness();
    (obj, oracle, k)
}

fn convergence_sanity() -> Outcome {
    let start = Instant::now();
    let (obj, oracle, k) = benchmark();
    let preset = single_node_presets(10_000, &k, false, 10).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = (0..5)
        .map(|seed| {
            let hyper = preset.clone().into_hyper(DescentOperator::sign(10)).unwrap();
            let rec = run(
                &oracle,
                OptimizerState::new(OptimizerKind::ASignSgd, hyper, start_point(&obj, seed)),
                &RunOptions::new(10_000, seed),
            )
            .unwrap();
            rec.window_mean_grad_l1(0.9, 1.0).unwrap() / rec.window_mean_grad_l1(0.0, 0.1).unwrap()
        })
        .collect();
    let m = median(&ratios);
    let summary = format!("median final/first window ratio {m:.4} (< 0.2)");
    if m < 0.2 {
        within(start.elapsed(), 60.0, summary)
    } else {
        Err(summary)
    }
}

fn acceleration_ordering() -> Outcome {
    let (obj, _, k) = benchmark();
    let t = 1u64 << 14;
    let workers = split_workers(&obj, 1, 0.0, 0).unwrap().with_noise(1.0).unwrap();
    let dist = DistributedOptions { fcc: FccConfig::pass_through(10), eval_at_v: true, exec: Execution::Sequential };
    let mut medians = [0.0; 2];
    for (slot, accelerated) in [false, true].into_iter().enumerate() {
        let preset = single_node_presets(t, &k, accelerated, 10).map_err(|e| e.to_string())?;
        let means: Vec<f64> = (0..5)
            .map(|seed| {
                let hyper = preset.clone().into_hyper(DescentOperator::sign(10)).unwrap();
                let state = OptimizerState::new(OptimizerKind::ASignSgd, hyper, start_point(&obj, seed));
                run_distributed(&workers, state, &RunOptions::new(t, seed), &dist).unwrap().mean_grad_l1().unwrap()
            })
            .collect();
        medians[slot] = median(&means);
    }
    let summary = format!("accelerated {:.4} vs non-accelerated {:.4} at T = 2^14", medians[1], medians[0]);
    if medians[1] <= medians[0] {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn linear_speedup() -> Outcome {
    let (obj, _, k) = benchmark();
    let t = 4096;
    let comp = Compressor::top_k(2, 10).unwrap();
    let mut finals = Vec::new();
    for n in [1usize, 4, 16] {
        let sigma_bar = if n == 1 { 0.0 } else { 1.0 };
        let workers = split_workers(&obj, n, sigma_bar, 11).unwrap().with_noise(1.0).unwrap();
        let (preset, u) = distributed_presets(t, n, 10, comp.delta(), &k, false).map_err(|e| e.to_string())?;
        let dist =
            DistributedOptions { fcc: FccConfig::new(comp, u).unwrap(), eval_at_v: false, exec: Execution::Sequential };
        let values: Vec<f64> = (0..5)
            .map(|seed| {
                let hyper = preset.clone().into_hyper(DescentOperator::sign(10)).unwrap();
                let state = OptimizerState::new(OptimizerKind::ASignSgd, hyper, start_point(&obj, seed));
                run_distributed(&workers, state, &RunOptions::new(t, seed), &dist)
                    .unwrap()
                    .window_mean_grad_l1(0.9, 1.0)
                    .unwrap()
            })
            .collect();
        finals.push((n, median(&values)));
    }
    let summary = finals.iter().map(|(n, v)| format!("n={n}: {v:.4}")).collect::<Vec<_>>().join(", ");
    if finals.windows(2).all(|w| w[1].1 <= w[0].1) {
        Ok(format!("final-window medians {summary}"))
    } else {
        Err(format!("not non-increasing: {summary}"))
    }
}

fn smoothness_estimator() -> Outcome {
    let one = ParamVec::filled(1, 1.0);
    let h = estimate_local_h(&Objective::cubic(1).unwrap(), &one, &one, DEFAULT_DELTA).unwrap();
    let mut quad_worst = 0.0_f64;
    let quads = [
        Objective::quadratic_diag(&[3.0, 0.5, 1.0]).unwrap(),
        Objective::isotropic_quadratic(8).unwrap(),
        Objective::quadratic(DMatrix::from_fn(4, 4, |i, j| if i == j { 4.0 } else { 1.0 }), vec![1.0; 4]).unwrap(),
    ];
    for (k, q) in quads.iter().enumerate() {
        for i in 0..20 {
            let w = gaussian(q.dim(), 20 + k as u64, 2 * i, 2.0);
            let dir = gaussian(q.dim(), 20 + k as u64, 2 * i + 1, 1.0);
            quad_worst = quad_worst.max(estimate_local_h(q, &w, &dir, DEFAULT_DELTA).unwrap().abs());
        }
    }
    let (obj, oracle, k) = benchmark();
    let preset = single_node_presets(2000, &k, false, 10).map_err(|e| e.to_string())?;
    let state = OptimizerState::new(
        OptimizerKind::ASignSgd,
        preset.into_hyper(DescentOperator::sign(10)).unwrap(),
        start_point(&obj, 0),
    );
    let rec = run(&oracle, state, &traced(2000, 0)).unwrap();
    let trace = trajectory_smoothness(&obj, rec.trajectory.as_deref().unwrap(), DEFAULT_DELTA, Execution::default())
        .map_err(|e| e.to_string())?;
    let env = fit_affine_envelope(&trace.samples, DEFAULT_QUANTILE).map_err(|e| e.to_string())?;
    let summary = format!(
        "cubic H(1) = {h}, max |H| on quadratics {quad_worst:.1e}, rank_one envelope {:.3} + {:.3}*||g|| covers {:.3} of {} samples",
        env.offset,
        env.slope,
        env.coverage,
        trace.samples.len()
    );
    if (h - 6.0).abs() <= 1e-9 && quad_worst <= 1e-9 && env.coverage >= 0.95 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("gradient correctness", gradient_correctness),
        ("operator contract identity", operator_identity),
        ("top-k contraction", || contraction(&["topk/"])),
        ("multi-round compression bound", || contraction(&["fcc_u", "fcc_recursion"])),
        ("sign descent inequality", || descent("descent/sign/")),
        ("operator descent inequality", || descent("descent/l2_normalize/")),
        ("compressed-mean Monte-Carlo bounds", compressed_mean_bounds),
        ("optimizer equivalences", equivalences),
        ("scale invariance", scale_invariance),
        ("hyperparameter presets", presets),
        ("convergence sanity", convergence_sanity),
        ("acceleration ordering", acceleration_ordering),
        ("linear-speedup trend", linear_speedup),
        ("smoothness estimator", smoothness_estimator),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{:02}] {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL [{:02}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
