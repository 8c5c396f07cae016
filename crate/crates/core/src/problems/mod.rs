//! Synthetic objectives, gradient oracles and the finite-difference oracle.

mod objective;
mod oracle;

pub use objective::{fd_gradient, Objective, ObjectiveKind, PenaltyNet, SmoothnessConstants, MAX_HESSIAN_DIM};
pub use oracle::{gaussian_noise, split_workers, GradientOracle, ScaledOracle, StochasticOracle, WorkerOracle};
