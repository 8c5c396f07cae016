//! The sign operator and general descent operators.
//!
//! A descent operator `T` is described by a lower-bound constant `l`, a norm
//! bound `U` and a "diamond" norm such that `<x, T(x)> >= l ||x||_diamond` and
//! `||T(x)||_2 <= U` for every `x`. The constants `(a, b)` record how the
//! diamond norm compares to the Euclidean norm: `a ||x|| <= ||x||_diamond <= b ||x||`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{standard_normal_vec, Purpose};
use crate::vector::ParamVec;

/// Coordinate-wise sign with `sign(0) = 0`.
pub fn sign(v: &ParamVec) -> ParamVec {
    let out = v
        .iter()
        .map(|&x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    ParamVec::new(out).expect("sign of a finite vector is finite")
}

/// `v / ||v||_2`, and `0` for the zero vector.
pub fn l2_normalize(v: &ParamVec) -> ParamVec {
    let n = v.norm_l2();
    if n == 0.0 {
        return ParamVec::zeros(v.dim());
    }
    ParamVec::new(v.iter().map(|x| x / n).collect()).expect("normalized vector is finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiamondNorm {
    L1,
    L2,
}

impl DiamondNorm {
    pub fn eval(self, v: &ParamVec) -> f64 {
        match self {
            DiamondNorm::L1 => v.norm_l1(),
            DiamondNorm::L2 => v.norm_l2(),
        }
    }
}

pub type CustomMap = Arc<dyn Fn(&ParamVec) -> ParamVec + Send + Sync>;

#[derive(Clone)]
pub enum OperatorKind {
    Sign,
    L2Normalize,
    Custom { name: String, map: CustomMap },
}

impl fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::Sign => write!(f, "Sign"),
            OperatorKind::L2Normalize => write!(f, "L2Normalize"),
            OperatorKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescentOperator {
    pub kind: OperatorKind,
    pub l: f64,
    pub u: f64,
    pub diamond: DiamondNorm,
    /// `(a, b)` with `a ||x||_2 <= ||x||_diamond <= b ||x||_2`.
    pub norm_equiv: (f64, f64),
}

impl DescentOperator {
    /// Sign in dimension `dim`: `l = 1`, `U = sqrt(d)`, diamond = l1, `(a, b) = (1, sqrt(d))`.
    pub fn sign(dim: usize) -> Self {
        let root = (dim as f64).sqrt();
        Self { kind: OperatorKind::Sign, l: 1.0, u: root, diamond: DiamondNorm::L1, norm_equiv: (1.0, root) }
    }

    /// Euclidean normalization: `l = 1`, `U = 1`, diamond = l2, `(a, b) = (1, 1)`.
    pub fn l2_normalize() -> Self {
        Self { kind: OperatorKind::L2Normalize, l: 1.0, u: 1.0, diamond: DiamondNorm::L2, norm_equiv: (1.0, 1.0) }
    }

    pub fn custom(
        name: impl Into<String>,
        map: CustomMap,
        l: f64,
        u: f64,
        diamond: DiamondNorm,
        norm_equiv: (f64, f64),
    ) -> Result<Self> {
        if !(l > 0.0 && u > 0.0 && norm_equiv.0 > 0.0 && norm_equiv.1 > 0.0) {
            return Err(Error::invalid("operator constants l, U, a, b must be > 0"));
        }
        Ok(Self { kind: OperatorKind::Custom { name: name.into(), map }, l, u, diamond, norm_equiv })
    }

    /// Looks up a built-in operator by its config name.
    pub fn by_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "sign" => Ok(Self::sign(dim)),
            "l2_normalize" => Ok(Self::l2_normalize()),
            other => Err(Error::invalid(format!("unknown descent operator '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            OperatorKind::Sign => "sign",
            OperatorKind::L2Normalize => "l2_normalize",
            OperatorKind::Custom { name, .. } => name,
        }
    }

    pub fn is_sign(&self) -> bool {
        matches!(self.kind, OperatorKind::Sign)
    }

    pub fn apply(&self, v: &ParamVec) -> ParamVec {
        match &self.kind {
            OperatorKind::Sign => sign(v),
            OperatorKind::L2Normalize => l2_normalize(v),
            OperatorKind::Custom { map, .. } => map(v),
        }
    }
}

/// Outcome of an empirical check of the operator contract.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractReport {
    pub operator: String,
    pub trials: usize,
    /// `min <x, T(x)> / ||x||_diamond` over the sampled vectors.
    pub min_ratio: f64,
    /// `max ||T(x)||_2` over the sampled vectors.
    pub max_norm: f64,
    pub violations: usize,
    /// Smallest of `min_ratio - l` and `U - max_norm`, relative to the declared constants.
    pub worst_margin: f64,
}

impl ContractReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Relative tolerance for declared-constant violations.
pub const CONTRACT_TOL: f64 = 1e-10;

/// Samples `trials` Gaussian vectors in `R^dim` and checks both inequalities.
pub fn verify_operator_contract(
    op: &DescentOperator,
    dim: usize,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<ContractReport> {
    if trials == 0 || dim == 0 {
        return Err(Error::invalid("verify_operator_contract needs trials >= 1 and dim >= 1"));
    }
    let per_trial = exec.map_indexed(trials, |i| {
        let mut x = standard_normal_vec(dim, seed, i as u64, 0, Purpose::Verification);
        // A few trials carry exact zeros so the sign(0) convention is exercised.
        if i % 7 == 3 {
            x[i % dim] = 0.0;
        }
        let x = ParamVec::new(x).expect("gaussian draw is finite");
        let tx = op.apply(&x);
        let dn = op.diamond.eval(&x);
        let ratio = if dn > 0.0 { x.dot(&tx) / dn } else { f64::INFINITY };
        (ratio, tx.norm_l2())
    });
    let mut min_ratio = f64::INFINITY;
    let mut max_norm = 0.0_f64;
    let mut violations = 0;
    let mut worst_margin = f64::INFINITY;
    for (ratio, norm) in per_trial {
        min_ratio = min_ratio.min(ratio);
        max_norm = max_norm.max(norm);
        let lower = (ratio - op.l) / op.l;
        let upper = (op.u - norm) / op.u;
        worst_margin = worst_margin.min(lower).min(upper);
        if lower < -CONTRACT_TOL || upper < -CONTRACT_TOL {
            violations += 1;
        }
    }
    Ok(ContractReport { operator: op.name().to_string(), trials, min_ratio, max_norm, violations, worst_margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVec {
        ParamVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sign_examples() {
        assert_eq!(sign(&pv(&[2.5, -0.1, 0.0])).as_slice(), &[1.0, -1.0, 0.0]);
        assert!(sign(&ParamVec::zeros(5)).is_zero());
    }

    #[test]
    fn l2_normalize_examples() {
        let n = l2_normalize(&pv(&[3.0, 4.0]));
        assert!((n[0] - 0.6).abs() < 1e-15 && (n[1] - 0.8).abs() < 1e-15);
        assert!(l2_normalize(&ParamVec::zeros(3)).is_zero());
        let op = DescentOperator::l2_normalize();
        assert_eq!(op.apply(&pv(&[3.0, 4.0])), n);
    }

    #[test]
    fn sign_contract_holds_exactly() {
        let r = verify_operator_contract(&DescentOperator::sign(16), 16, 2000, 1, Execution::Sequential).unwrap();
        assert_eq!(r.min_ratio, 1.0);
        assert!(r.max_norm <= 4.0);
        assert!(r.passed());
        let r = verify_operator_contract(&DescentOperator::l2_normalize(), 16, 2000, 1, Execution::Sequential).unwrap();
        assert!((r.min_ratio - 1.0).abs() < 1e-12 && (r.max_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_zero_coordinates_gives_full_norm() {
        let x = ParamVec::new((1..=16).map(|i| if i % 2 == 0 { i as f64 } else { -(i as f64) }).collect()).unwrap();
        assert_eq!(sign(&x).norm_l2(), 4.0);
    }

    #[test]
    fn declared_constants_too_strong_are_reported() {
        let mut op = DescentOperator::sign(8);
        op.u = 1.0;
        let r = verify_operator_contract(&op, 8, 100, 0, Execution::Sequential).unwrap();
        assert!(!r.passed());
        assert!(r.worst_margin < 0.0);
    }

    #[test]
    fn custom_operator_is_checked() {
        let op = DescentOperator::custom(
            "half_sign",
            Arc::new(|v: &ParamVec| sign(v).scale(0.5).unwrap()),
            0.5,
            2.0,
            DiamondNorm::L1,
            (1.0, 2.0),
        )
        .unwrap();
        let r = verify_operator_contract(&op, 4, 500, 2, Execution::Parallel).unwrap();
        assert!(r.passed());
        assert_eq!(r.min_ratio, 0.5);
    }

    proptest! {
        #[test]
        fn inner_product_with_sign_is_l1_norm(v in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
            let x = ParamVec::new(v).unwrap();
            prop_assert_eq!(x.dot(&sign(&x)), x.norm_l1());
        }

        #[test]
        fn sign_norm_counts_nonzeros(v in proptest::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 1..40)) {
            let x = ParamVec::new(v).unwrap();
            let nnz = x.iter().filter(|&&c| c != 0.0).count();
            prop_assert_eq!(sign(&x).norm_sq(), nnz as f64);
        }

        #[test]
        fn sign_is_positively_homogeneous(v in proptest::collection::vec(-1e3f64..1e3, 1..20), c in 1e-6f64..1e6) {
            let x = ParamVec::new(v).unwrap();
            prop_assert_eq!(sign(&x.scale(c).unwrap()), sign(&x));
        }
    }
}
