//! Single-node sign-based optimizers and SGD baselines.
//!
//! All sign-family updates share one shape:
//!
//! ```text
//! v      = w + zeta (w - w_prev)
//! m'     = theta m + (1 - theta) g(v)
//! w'     = w - gamma lambda w - gamma T(m')
//! ```
//!
//! with `T = sign` for SignSGD / A-SignSGD / LION and a general descent
//! operator for G-SignSGD. LION evaluates the gradient at `w` (no
//! extrapolation) and uses `lambda` as decoupled decay.

mod descent;
pub(crate) mod presets;
pub(crate) mod record;

pub use descent::{
    operator_descent_check, operator_step_admissible, sign_descent_check, sign_step_admissible, trace_descent,
    DescentCheck, DescentRule, DescentSummary, DESCENT_TOL,
};
pub use presets::{root_pow, single_node_presets, PresetHyper};
pub use record::{run, RunMeta, RunOptions, RunRecord, StepRow, CSV_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::GradientOracle;
use crate::signcore::DescentOperator;
use crate::vector::ParamVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SignSgd,
    ASignSgd,
    Lion,
    GSignSgd,
    Sgd,
    Sgdm,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::SignSgd => "sign_sgd",
            OptimizerKind::ASignSgd => "a_sign_sgd",
            OptimizerKind::Lion => "lion",
            OptimizerKind::GSignSgd => "g_sign_sgd",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Sgdm => "sgdm",
        }
    }

    pub fn is_sign_based(self) -> bool {
        !matches!(self, OptimizerKind::Sgd | OptimizerKind::Sgdm)
    }
}

#[derive(Debug, Clone)]
pub struct Hyper {
    pub gamma: f64,
    pub theta: f64,
    pub zeta: f64,
    pub lambda: f64,
    pub operator: DescentOperator,
}

impl Hyper {
    pub fn new(gamma: f64, theta: f64, zeta: f64, lambda: f64, operator: DescentOperator) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma must be > 0"));
        }
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::invalid("theta must lie in [0, 1)"));
        }
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return Err(Error::invalid("zeta must be >= 0"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda must be >= 0"));
        }
        Ok(Self { gamma, theta, zeta, lambda, operator })
    }

    /// Sign operator hyperparameters without decay.
    pub fn sign(dim: usize, gamma: f64, theta: f64, zeta: f64) -> Result<Self> {
        Self::new(gamma, theta, zeta, 0.0, DescentOperator::sign(dim))
    }

    /// `theta / (1 - theta)`, the extrapolation of the accelerated variant.
    pub fn accelerated_zeta(theta: f64) -> f64 {
        theta / (1.0 - theta)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub w: ParamVec,
    pub w_prev: ParamVec,
    pub m: ParamVec,
    pub t: u64,
    pub hyper: Hyper,
    pub kind: OptimizerKind,
}

impl OptimizerState {
    /// `w^0 = w^1 = w0`, `m^0 = 0`, `t = 0`.
    pub fn new(kind: OptimizerKind, hyper: Hyper, w0: ParamVec) -> Self {
        let d = w0.dim();
        Self { w_prev: w0.clone(), w: w0, m: ParamVec::zeros(d), t: 0, hyper, kind }
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    /// Extrapolated evaluation point `w + zeta (w - w_prev)`.
    pub fn lookahead(&self) -> Result<ParamVec> {
        extrapolate(&self.w, &self.w_prev, self.hyper.zeta)
    }

    /// One step of whichever update `kind` selects.
    pub fn step<O: GradientOracle + ?Sized>(&self, oracle: &O, seed: u64) -> Result<OptimizerState> {
        match self.kind {
            OptimizerKind::SignSgd | OptimizerKind::ASignSgd => asign_step(self, oracle, seed),
            OptimizerKind::Lion => lion_step(self, oracle, seed),
            OptimizerKind::GSignSgd => gsign_step(self, oracle, seed),
            OptimizerKind::Sgd | OptimizerKind::Sgdm => baseline_step(self, oracle, seed),
        }
    }

    /// Advances with a gradient estimate supplied by the caller (used by the
    /// parameter-server simulation).
    pub(crate) fn apply_gradient(&self, g: &ParamVec) -> Result<OptimizerState> {
        let m = momentum_update(&self.m, g, self.hyper.theta)?;
        let direction = self.hyper.operator.apply(&m);
        let w = descend(&self.w, &direction, self.hyper.gamma, self.hyper.lambda)?;
        Ok(self.advanced(w, m))
    }

    fn advanced(&self, w: ParamVec, m: ParamVec) -> OptimizerState {
        OptimizerState { w_prev: self.w.clone(), w, m, t: self.t + 1, hyper: self.hyper.clone(), kind: self.kind }
    }

    fn check_kind(&self, allowed: &[OptimizerKind], op: &str) -> Result<()> {
        if allowed.contains(&self.kind) {
            Ok(())
        } else {
            Err(Error::invalid(format!("{op} cannot advance a {} state", self.kind.name())))
        }
    }
}

pub(crate) fn extrapolate(w: &ParamVec, w_prev: &ParamVec, zeta: f64) -> Result<ParamVec> {
    w.zip_with(w_prev, |a, b| a + zeta * (a - b))
}

pub(crate) fn momentum_update(m: &ParamVec, g: &ParamVec, theta: f64) -> Result<ParamVec> {
    m.zip_with(g, |mi, gi| theta * mi + (1.0 - theta) * gi)
}

/// `w - gamma lambda w - gamma dir`.
pub(crate) fn descend(w: &ParamVec, dir: &ParamVec, gamma: f64, lambda: f64) -> Result<ParamVec> {
    w.zip_with(dir, |wi, di| wi - gamma * lambda * wi - gamma * di)
}

fn sign_family_step<O: GradientOracle + ?Sized>(
    state: &OptimizerState,
    oracle: &O,
    seed: u64,
    at: ParamVec,
) -> Result<OptimizerState> {
    at.ensure_dim(oracle.dim())?;
    let g = oracle.sample(&at, state.t + 1, 0, seed)?;
    state.apply_gradient(&g)
}

/// Accelerated SignSGD (SignSGD with momentum when `zeta = 0`).
pub fn asign_step<O: GradientOracle + ?Sized>(state: &OptimizerState, oracle: &O, seed: u64) -> Result<OptimizerState> {
    state.check_kind(&[OptimizerKind::SignSgd, OptimizerKind::ASignSgd], "asign_step")?;
    if !state.hyper.operator.is_sign() {
        return Err(Error::invalid("asign_step requires the sign operator"));
    }
    sign_family_step(state, oracle, seed, state.lookahead()?)
}

/// Simplified LION: gradient at `w`, decoupled decay `gamma lambda w`.
pub fn lion_step<O: GradientOracle + ?Sized>(state: &OptimizerState, oracle: &O, seed: u64) -> Result<OptimizerState> {
    state.check_kind(&[OptimizerKind::Lion], "lion_step")?;
    if !state.hyper.operator.is_sign() {
        return Err(Error::invalid("lion_step requires the sign operator"));
    }
    sign_family_step(state, oracle, seed, state.w.clone())
}

/// General sign SGD with an arbitrary descent operator.
pub fn gsign_step<O: GradientOracle + ?Sized>(state: &OptimizerState, oracle: &O, seed: u64) -> Result<OptimizerState> {
    state.check_kind(&[OptimizerKind::GSignSgd], "gsign_step")?;
    sign_family_step(state, oracle, seed, state.lookahead()?)
}

/// Plain SGD and heavy-ball SGDM (`m' = theta m + g`, `w' = w - gamma m'`).
pub fn baseline_step<O: GradientOracle + ?Sized>(
    state: &OptimizerState,
    oracle: &O,
    seed: u64,
) -> Result<OptimizerState> {
    state.check_kind(&[OptimizerKind::Sgd, OptimizerKind::Sgdm], "baseline_step")?;
    let g = oracle.sample(&state.w, state.t + 1, 0, seed)?;
    let h = &state.hyper;
    let m = match state.kind {
        OptimizerKind::Sgdm => state.m.zip_with(&g, |mi, gi| h.theta * mi + gi)?,
        _ => g,
    };
    let w = descend(&state.w, &m, h.gamma, h.lambda)?;
    Ok(state.advanced(w, m))
}
