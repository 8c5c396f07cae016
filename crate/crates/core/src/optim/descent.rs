//! Pointwise one-step descent inequalities for sign and general descent
//! operators, checked along exact-gradient trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problems::{Objective, SmoothnessConstants, StochasticOracle};
use crate::signcore::{sign, DescentOperator};
use crate::vector::ParamVec;

use super::OptimizerState;

/// Absolute tolerance on the inequality slack.
pub const DESCENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentCheck {
    /// `f(w+) - f(w)`.
    pub lhs: f64,
    pub rhs: f64,
}

impl DescentCheck {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.slack() >= -DESCENT_TOL
    }
}

fn l2_and_r(constants: &SmoothnessConstants) -> Result<(f64, f64)> {
    let l2 = constants.l2.ok_or(Error::MissingConstant("L2"))?;
    let r = constants.r.ok_or(Error::MissingConstant("r"))?;
    Ok((l2, r))
}

/// Whether `gamma` keeps a sign step inside the region where the weak
/// first-order bound applies: `gamma <= 1 / (L2 d)` and `gamma sqrt(d) <= r`.
pub fn sign_step_admissible(gamma: f64, dim: usize, constants: &SmoothnessConstants) -> Result<bool> {
    let (l2, r) = l2_and_r(constants)?;
    let d = dim as f64;
    Ok(gamma * l2 * d <= 1.0 && gamma * d.sqrt() <= r)
}

/// Operator analogue: `gamma <= a l / (U^2 L2)` and `gamma U <= r`.
pub fn operator_step_admissible(gamma: f64, op: &DescentOperator, constants: &SmoothnessConstants) -> Result<bool> {
    let (l2, r) = l2_and_r(constants)?;
    let a = op.norm_equiv.0;
    Ok(gamma * op.u * op.u * l2 <= a * op.l && gamma * op.u <= r)
}

/// `f(w - gamma sign(m)) - f(w) <= -(gamma/2)|g|_1 + 2 gamma sqrt(d) |m - g|_2 + (L1/2) gamma^2 d`
/// with `g = grad f(w)`.
pub fn sign_descent_check(obj: &Objective, w: &ParamVec, m: &ParamVec, gamma: f64) -> Result<DescentCheck> {
    let l1 = obj.smoothness().require_l1()?;
    let d = w.dim() as f64;
    let g = obj.eval_grad(w)?;
    let next = w.axpy(-gamma, &sign(m))?;
    let lhs = obj.eval_value(&next)? - obj.eval_value(w)?;
    let eps = m.sub(&g)?.norm_l2();
    let rhs = -0.5 * gamma * g.norm_l1() + 2.0 * gamma * d.sqrt() * eps + 0.5 * l1 * gamma * gamma * d;
    Ok(DescentCheck { lhs, rhs })
}

/// `f(w - gamma T(m)) - f(w) <= -(gamma l/2)|g|_diamond + (U + b) gamma |m - g|_2 + (L1 U^2/2) gamma^2`.
pub fn operator_descent_check(
    obj: &Objective,
    w: &ParamVec,
    m: &ParamVec,
    gamma: f64,
    op: &DescentOperator,
) -> Result<DescentCheck> {
    let l1 = obj.smoothness().require_l1()?;
    let g = obj.eval_grad(w)?;
    let next = w.axpy(-gamma, &op.apply(m))?;
    let lhs = obj.eval_value(&next)? - obj.eval_value(w)?;
    let eps = m.sub(&g)?.norm_l2();
    let b = op.norm_equiv.1;
    let rhs =
        -0.5 * gamma * op.l * op.diamond.eval(&g) + (op.u + b) * gamma * eps + 0.5 * l1 * op.u * op.u * gamma * gamma;
    Ok(DescentCheck { lhs, rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentRule {
    /// The sign-specific inequality.
    Sign,
    /// The general descent-operator inequality using the state's operator.
    Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentSummary {
    pub steps: usize,
    pub violations: usize,
    /// Smallest slack `rhs - lhs` seen.
    pub worst_slack: f64,
    /// Largest gradient norm met along the way.
    pub max_grad_norm: f64,
}

/// Runs `steps` exact-gradient steps from `state0`, checking the chosen
/// inequality at every `(w^t, m^t)` pair. Errors if the step size violates
/// the rule's admissibility condition or weight decay is active.
pub fn trace_descent(
    obj: &Objective,
    state0: &OptimizerState,
    steps: usize,
    rule: DescentRule,
) -> Result<DescentSummary> {
    let hyper = &state0.hyper;
    if hyper.lambda != 0.0 {
        return Err(Error::invalid("descent checks need lambda = 0"));
    }
    let admissible = match rule {
        DescentRule::Sign => sign_step_admissible(hyper.gamma, obj.dim(), obj.smoothness())?,
        DescentRule::Operator => operator_step_admissible(hyper.gamma, &hyper.operator, obj.smoothness())?,
    };
    if !admissible {
        return Err(Error::invalid(format!("gamma = {} violates the step-size precondition", hyper.gamma)));
    }
    let oracle = StochasticOracle::exact(obj.clone());
    let mut state = state0.clone();
    let mut summary = DescentSummary { steps: 0, violations: 0, worst_slack: f64::INFINITY, max_grad_norm: 0.0 };
    for _ in 0..steps {
        let next = state.step(&oracle, 0)?;
        let check = match rule {
            DescentRule::Sign => sign_descent_check(obj, &state.w, &next.m, hyper.gamma)?,
            DescentRule::Operator => operator_descent_check(obj, &state.w, &next.m, hyper.gamma, &hyper.operator)?,
        };
        summary.steps += 1;
        summary.worst_slack = summary.worst_slack.min(check.slack());
        summary.max_grad_norm = summary.max_grad_norm.max(obj.eval_grad(&state.w)?.norm_l2());
        if !check.holds() {
            summary.violations += 1;
        }
        state = next;
    }
    Ok(summary)
}
