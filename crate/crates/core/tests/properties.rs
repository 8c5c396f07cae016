use proptest::collection::vec;
use proptest::prelude::*;
use signopt_core::comms::{fcc, fixed_order_mean, topk_compress, Compressor, FccConfig};
use signopt_core::optim::{root_pow, single_node_presets, Hyper, OptimizerKind, OptimizerState};
use signopt_core::problems::{fd_gradient, Objective, SmoothnessConstants, StochasticOracle};
use signopt_core::ParamVec;

fn finite(len: std::ops::Range<usize>) -> impl Strategy<Value = ParamVec> {
    vec(-100.0f64..100.0, len).prop_map(|v| ParamVec::new(v).unwrap())
}

proptest! {
    #[test]
    fn top_k_keeps_the_k_largest_magnitudes(x in finite(1..40), k_frac in 0.0f64..1.0) {
        let k = ((x.dim() as f64 * k_frac) as usize).max(1);
        let c = topk_compress(&x, k).unwrap();
        let kept: Vec<usize> = (0..x.dim()).filter(|&i| c[i] != 0.0).collect();
        prop_assert!(kept.len() <= k);
        for &i in &kept {
            prop_assert_eq!(c[i], x[i]);
        }
        let smallest_kept = kept.iter().map(|&i| x[i].abs()).fold(f64::INFINITY, f64::min);
        let dropped_nonzero = (0..x.dim()).filter(|&i| c[i] == 0.0 && x[i] != 0.0).count();
        if dropped_nonzero > 0 {
            prop_assert_eq!(kept.len(), k);
            for i in (0..x.dim()).filter(|&i| c[i] == 0.0) {
                prop_assert!(x[i].abs() <= smallest_kept);
            }
        }
        prop_assert!(c.norm_sq() <= x.norm_sq());
    }

    #[test]
    fn multi_round_residual_contracts_geometrically(x in finite(1..33), k in 1usize..8, u in 1u32..6) {
        let comp = Compressor::top_k(k.min(x.dim()), x.dim()).unwrap();
        let cfg = FccConfig::new(comp, u).unwrap();
        let out = fcc(&x, &cfg).unwrap();
        prop_assert!(x.sub(&out).unwrap().norm_sq() <= cfg.contraction() * x.norm_sq() * (1.0 + 1e-12));
        let (rounds, scalars) = cfg.traffic();
        prop_assert_eq!(rounds, u as u64);
        prop_assert_eq!(scalars, u as u64 * comp.cost());
    }

    #[test]
    fn full_top_k_and_identity_are_lossless(x in finite(1..20)) {
        let d = x.dim();
        prop_assert_eq!(topk_compress(&x, d).unwrap(), x.clone());
        prop_assert_eq!(fcc(&x, &FccConfig::pass_through(d)).unwrap(), x.clone());
        prop_assert_eq!(fcc(&x, &FccConfig::new(Compressor::identity(d), 3).unwrap()).unwrap(), x);
    }

    #[test]
    fn mean_of_identical_vectors_is_exact(x in finite(1..12), n in 1usize..40) {
        prop_assert_eq!(fixed_order_mean(&vec![x.clone(); n]).unwrap(), x);
    }

    #[test]
    fn mean_is_close_to_naive_average(xs in vec(finite(5..6), 1..10)) {
        let m = fixed_order_mean(&xs).unwrap();
        for j in 0..5 {
            let naive = xs.iter().map(|x| x[j]).sum::<f64>() / xs.len() as f64;
            prop_assert!((m[j] - naive).abs() <= 1e-9 * (1.0 + naive.abs()));
        }
    }

    #[test]
    fn sign_steps_move_each_coordinate_by_gamma(w in finite(4..5), seed in 0u64..1000, gamma in 1e-4f64..0.5) {
        let obj = Objective::rank_one_spiked(4, 2.0, 1).unwrap();
        let oracle = StochasticOracle::new(obj, 1.0).unwrap();
        let state = OptimizerState::new(OptimizerKind::ASignSgd, Hyper::sign(4, gamma, 0.5, 1.0).unwrap(), w.clone());
        let next = state.step(&oracle, seed).unwrap();
        for i in 0..4 {
            let moved = (next.w[i] - w[i]).abs();
            prop_assert!(moved == 0.0 || (moved - gamma).abs() <= 1e-12 * (1.0 + w[i].abs()));
        }
    }

    #[test]
    fn single_node_presets_are_in_range(t in 1u64..10_000_000, l1 in 0.01f64..100.0) {
        let k = SmoothnessConstants { l1: Some(l1), h1: Some(l1 * l1), h2: Some(1.0), ..Default::default() };
        for accelerated in [false, true] {
            let p = single_node_presets(t, &k, accelerated, 10).unwrap();
            prop_assert!((0.0..1.0).contains(&p.theta));
            prop_assert!(p.gamma > 0.0 && p.gamma.is_finite());
            prop_assert!(p.zeta >= 0.0);
        }
    }

    #[test]
    fn root_pow_inverts_perfect_powers(base in 1u32..60, num in 1i32..6, den in 1i32..8) {
        let t = (base as f64).powi(den);
        prop_assume!(t < 2f64.powi(52));
        prop_assert_eq!(root_pow(t, num, den), (base as f64).powi(num));
    }

    #[test]
    fn rank_one_gradient_matches_differences(x in vec(-2.0f64..2.0, 6), seed in 0u64..50) {
        let obj = Objective::rank_one_spiked(6, 2.0, seed).unwrap();
        let x = ParamVec::new(x).unwrap();
        let g = obj.eval_grad(&x).unwrap();
        let fd = fd_gradient(&obj, &x, 1e-5).unwrap();
        prop_assert!(g.sub(&fd).unwrap().norm_l2() <= 1e-6 * (1.0 + g.norm_l2()));
    }
}
