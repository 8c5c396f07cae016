//! Sign-based stochastic optimization toolkit.
//!
//! The crate is organized around five pieces:
//!
//! - [`problems`]: synthetic objectives with closed-form derivatives, seeded
//!   stochastic and heterogeneous gradient oracles, and a central-difference
//!   gradient oracle.
//! - [`smoothness`]: trajectory estimators for local first- and second-order
//!   smoothness plus an affine envelope fit against the gradient norm.
//! - [`signcore`]: the sign operator and general descent operators with an
//!   empirical check of their inner-product/norm contract.
//! - [`optim`]: SignSGD, accelerated SignSGD, simplified LION, general sign
//!   SGD and SGD baselines, with horizon-dependent hyperparameter presets.
//! - [`comms`]: top-k compression, the multi-round residual compressor and a
//!   parameter-server simulation of compressed accelerated SignSGD.
//!
//! Data-parallel loops (Monte-Carlo checks, trajectory scans, verification
//! trials) run on rayon when the `parallel` feature is enabled and fall back
//! to a plain sequential loop otherwise. Results never depend on which path
//! ran: every random draw is keyed by a counter, and reductions happen in
//! index order.

pub mod comms;
pub mod error;
pub mod exec;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod signcore;
pub mod smoothness;
pub mod vector;

pub use error::{Error, Result};
pub use exec::Execution;
pub use nalgebra;
pub use vector::ParamVec;
