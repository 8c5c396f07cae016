//! Deterministic synthetic objectives.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::rng::{standard_normal_vec, Purpose};
use crate::vector::ParamVec;

/// Largest dimension accepted by the dense Hessian eigen-decomposition.
pub const MAX_HESSIAN_DIM: usize = 256;

/// Two-layer penalty formulation of a tiny regression network.
///
/// Parameters are packed as `[z (h), W1 (h x p, row-major), W2 (q x h, row-major)]`
/// and the activation is `tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyNet {
    pub a0: Vec<f64>,
    pub y: Vec<f64>,
    pub hidden: usize,
    pub rho_bar: f64,
}

impl PenaltyNet {
    pub fn new(a0: Vec<f64>, y: Vec<f64>, hidden: usize, rho_bar: f64) -> Result<Self> {
        if !(rho_bar > 0.0 && rho_bar.is_finite()) {
            return Err(Error::invalid("penalty_net requires rho_bar > 0"));
        }
        if a0.is_empty() || y.is_empty() || hidden == 0 {
            return Err(Error::invalid("penalty_net requires non-empty a0, y and hidden >= 1"));
        }
        if a0.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "penalty_net data" });
        }
        Ok(Self { a0, y, hidden, rho_bar })
    }

    pub fn dim(&self) -> usize {
        let (p, q, h) = (self.a0.len(), self.y.len(), self.hidden);
        h + h * p + q * h
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (p, h) = (self.a0.len(), self.hidden);
        let (z, rest) = x.split_at(h);
        let (w1, w2) = rest.split_at(h * p);
        (z, w1, w2)
    }

    /// Returns `(W2 z - y, tanh(W1 a0))`.
    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (p, q, h) = (self.a0.len(), self.y.len(), self.hidden);
        let (z, w1, w2) = self.split(x);
        let act: Vec<f64> = (0..h)
            .map(|j| {
                let u: f64 = (0..p).map(|k| w1[j * p + k] * self.a0[k]).sum();
                u.tanh()
            })
            .collect();
        let resid: Vec<f64> = (0..q).map(|i| (0..h).map(|j| w2[i * h + j] * z[j]).sum::<f64>() - self.y[i]).collect();
        (resid, act)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (z, _, _) = self.split(x);
        let (resid, act) = self.forward(x);
        let fit: f64 = resid.iter().map(|r| r * r).sum();
        let pen: f64 = z.iter().zip(&act).map(|(zj, sj)| (zj - sj) * (zj - sj)).sum();
        0.5 * fit + 0.5 * self.rho_bar * pen
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (p, q, h) = (self.a0.len(), self.y.len(), self.hidden);
        let (z, _, w2) = self.split(x);
        let (resid, act) = self.forward(x);
        let mut g = vec![0.0; self.dim()];
        // d/dz = W2^T r + rho (z - s)
        for j in 0..h {
            let back: f64 = (0..q).map(|i| w2[i * h + j] * resid[i]).sum();
            g[j] = back + self.rho_bar * (z[j] - act[j]);
        }
        // d/dW1 = rho * diag(s') (s - z) a0^T
        for j in 0..h {
            let coeff = self.rho_bar * (1.0 - act[j] * act[j]) * (act[j] - z[j]);
            for k in 0..p {
                g[h + j * p + k] = coeff * self.a0[k];
            }
        }
        // d/dW2 = r z^T
        let off = h + h * p;
        for i in 0..q {
            for j in 0..h {
                g[off + i * h + j] = resid[i] * z[j];
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveKind {
    /// `1/2 ||x x^T - Y||_F^2` with symmetric `Y`.
    RankOne {
        y: DMatrix<f64>,
    },
    PenaltyNet(PenaltyNet),
    /// Separable `sum_i x_i^n`, `n >= 4`.
    ScalarPower {
        exponent: u32,
    },
    /// Separable `sum_i exp(x_i)`.
    ScalarExp,
    /// Separable `sum_i x_i^3`. Test fixture for the second-difference estimator.
    Cubic,
    /// `1/2 x^T A x - b^T x` with `A` symmetric positive definite.
    Quadratic {
        a: DMatrix<f64>,
        b: Vec<f64>,
    },
}

impl ObjectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::RankOne { .. } => "rank_one",
            ObjectiveKind::PenaltyNet(_) => "penalty_net",
            ObjectiveKind::ScalarPower { .. } => "scalar_power",
            ObjectiveKind::ScalarExp => "scalar_exp",
            ObjectiveKind::Cubic => "cubic",
            ObjectiveKind::Quadratic { .. } => "quadratic",
        }
    }
}

/// Known smoothness constants of an objective. Absent fields are unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothnessConstants {
    #[serde(rename = "L1", default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(rename = "L2", default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(rename = "H1", default, skip_serializing_if = "Option::is_none")]
    pub h1: Option<f64>,
    #[serde(rename = "H2", default, skip_serializing_if = "Option::is_none")]
    pub h2: Option<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub big_r: Option<f64>,
    #[serde(rename = "Hhat1", default, skip_serializing_if = "Option::is_none")]
    pub hhat1: Option<f64>,
    #[serde(rename = "Hhat2", default, skip_serializing_if = "Option::is_none")]
    pub hhat2: Option<f64>,
}

impl SmoothnessConstants {
    /// First-order constants implied by a Hessian bound
    /// `||hess f(x)|| <= k0 + k1 ||grad f(x)||`, using the `c = 1` radius of
    /// the standard (L0, L1)-smoothness transfer: `L1 = 2 k0`,
    /// `L2 = (e - 1) k1`, `r = 1 / k1`.
    pub fn from_hessian_bound(k0: f64, k1: f64) -> Self {
        Self {
            l1: Some(2.0 * k0),
            l2: Some((E - 1.0) * k1),
            r: Some(if k1 > 0.0 { 1.0 / k1 } else { f64::INFINITY }),
            ..Self::default()
        }
    }

    /// Fills the second-order fields from a third-derivative bound
    /// `||D^3 f(x)||_F <= hhat1 ||grad f(x)|| + hhat2`, integrated over the
    /// first-order ball of radius `r`.
    pub fn with_third_order(mut self, hhat1: f64, hhat2: f64) -> Self {
        let l1 = self.l1.unwrap_or(0.0);
        let l2 = self.l2.unwrap_or(0.0);
        let r = self.r.unwrap_or(f64::INFINITY);
        let (h1, h2) = if r.is_finite() {
            (hhat2 + hhat1 * l1 * r, hhat1 * (1.0 + l2 * r))
        } else {
            // Constant Hessian bound only makes sense when the third derivative vanishes.
            (hhat2.max(l1 * l1), hhat1)
        };
        self.hhat1 = Some(hhat1);
        self.hhat2 = Some(hhat2);
        self.h1 = Some(h1);
        self.h2 = Some(h2);
        self.big_r = Some(r);
        self
    }

    pub fn require_l1(&self) -> Result<f64> {
        self.l1.ok_or(Error::MissingConstant("L1"))
    }

    /// `C = max{sqrt(H1), sqrt(H2), L1}`.
    pub fn c(&self) -> Result<f64> {
        let l1 = self.require_l1()?;
        let h1 = self.h1.ok_or(Error::MissingConstant("H1"))?;
        let h2 = self.h2.ok_or(Error::MissingConstant("H2"))?;
        Ok(h1.sqrt().max(h2.sqrt()).max(l1))
    }

    /// Checks signs: everything positive except `L2`, `H2`, `Hhat*` which may be 0.
    pub fn validate(&self) -> Result<()> {
        let positive = [("L1", self.l1), ("r", self.r), ("H1", self.h1), ("R", self.big_r)];
        for (name, v) in positive {
            if let Some(v) = v {
                if v.is_nan() || v <= 0.0 {
                    return Err(Error::invalid(format!("smoothness constant {name} must be > 0")));
                }
            }
        }
        let nonneg = [("L2", self.l2), ("H2", self.h2), ("Hhat1", self.hhat1), ("Hhat2", self.hhat2)];
        for (name, v) in nonneg {
            if let Some(v) = v {
                if v.is_nan() || v < 0.0 {
                    return Err(Error::invalid(format!("smoothness constant {name} must be >= 0")));
                }
            }
        }
        Ok(())
    }
}

/// A deterministic objective with exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    kind: ObjectiveKind,
    dim: usize,
    smoothness: SmoothnessConstants,
}

fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale))
}

impl Objective {
    pub fn rank_one(y: DMatrix<f64>) -> Result<Self> {
        let dim = y.nrows();
        if dim == 0 || y.ncols() != dim {
            return Err(Error::invalid("rank_one requires a non-empty square Y"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "rank_one Y" });
        }
        if !is_symmetric(&y) {
            return Err(Error::invalid("rank_one requires symmetric Y"));
        }
        let y_norm = spectral_norm_sym(&y);
        let root = (3.0 * dim as f64 + 6.0).sqrt();
        let smoothness = if y_norm > 0.0 {
            // ||Y||_op = 8 a^2 in the notation of the Hessian bound.
            let a = (y_norm / 2.0).sqrt() / 2.0;
            SmoothnessConstants::from_hessian_bound(40.0 * a * a, 3.0 / a)
                .with_third_order(root / (4.0 * a * a), 16.0 * a * root)
        } else {
            SmoothnessConstants::from_hessian_bound(6.0, 3.0).with_third_order(2.0 * root, 4.0 * root)
        };
        Ok(Self { kind: ObjectiveKind::RankOne { y }, dim, smoothness })
    }

    /// `Y = y_norm * v v^T` with a seeded random unit vector `v`.
    pub fn rank_one_spiked(dim: usize, y_norm: f64, seed: u64) -> Result<Self> {
        if dim == 0 || !(y_norm >= 0.0 && y_norm.is_finite()) {
            return Err(Error::invalid("rank_one_spiked requires dim >= 1 and y_norm >= 0"));
        }
        let v = standard_normal_vec(dim, seed, 0, 0, Purpose::Problem);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v = DVector::from_iterator(dim, v.iter().map(|x| x / norm));
        Self::rank_one(&v * v.transpose() * y_norm)
    }

    pub fn penalty_net(net: PenaltyNet) -> Result<Self> {
        let dim = net.dim();
        Ok(Self { kind: ObjectiveKind::PenaltyNet(net), dim, smoothness: SmoothnessConstants::default() })
    }

    pub fn scalar_power(exponent: u32, dim: usize) -> Result<Self> {
        if exponent < 4 {
            return Err(Error::invalid("scalar_power requires exponent n >= 4"));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let n = exponent as f64;
        let smoothness = SmoothnessConstants::from_hessian_bound(n * (n - 1.0), n - 1.0)
            .with_third_order((n - 1.0) * (n - 2.0), n * (n - 1.0) * (n - 2.0) * (dim as f64).sqrt());
        Ok(Self { kind: ObjectiveKind::ScalarPower { exponent }, dim, smoothness })
    }

    pub fn scalar_exp(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(Self {
            kind: ObjectiveKind::ScalarExp,
            dim,
            smoothness: SmoothnessConstants::from_hessian_bound(1.0, 1.0).with_third_order(1.0, 0.0),
        })
    }

    pub fn cubic(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(Self {
            kind: ObjectiveKind::Cubic,
            dim,
            smoothness: SmoothnessConstants::from_hessian_bound(6.0, 2.0)
                .with_third_order(0.0, 6.0 * (dim as f64).sqrt()),
        })
    }

    pub fn quadratic(a: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        let dim = a.nrows();
        if dim == 0 || a.ncols() != dim || b.len() != dim {
            return Err(Error::invalid("quadratic requires square A and matching b"));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "quadratic data" });
        }
        if !is_symmetric(&a) || a.clone().cholesky().is_none() {
            return Err(Error::invalid("quadratic requires symmetric positive definite A"));
        }
        let l1 = spectral_norm_sym(&a);
        let smoothness = SmoothnessConstants {
            l1: Some(l1),
            l2: Some(0.0),
            r: Some(f64::INFINITY),
            // Any H1 > 0 is valid for a constant Hessian; L1^2 keeps C = L1.
            h1: Some(l1 * l1),
            h2: Some(0.0),
            big_r: Some(f64::INFINITY),
            hhat1: Some(0.0),
            hhat2: Some(0.0),
        };
        Ok(Self { kind: ObjectiveKind::Quadratic { a, b }, dim, smoothness })
    }

    pub fn quadratic_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::quadratic(DMatrix::from_diagonal(&DVector::from_column_slice(diag)), vec![0.0; n])
    }

    /// `1/2 ||x||^2`.
    pub fn isotropic_quadratic(dim: usize) -> Result<Self> {
        Self::quadratic(DMatrix::identity(dim, dim), vec![0.0; dim])
    }

    pub fn kind(&self) -> &ObjectiveKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> &SmoothnessConstants {
        &self.smoothness
    }

    /// A global minimizer when one is known in closed form.
    ///
    /// For `rank_one` this is `sqrt(lambda) v` for the top eigenpair of `Y`
    /// (sign fixed so the largest entry is positive), or 0 if `Y` has no
    /// positive eigenvalue.
    pub fn minimizer(&self) -> Option<ParamVec> {
        match &self.kind {
            ObjectiveKind::RankOne { y } => {
                let eig = y.clone().symmetric_eigen();
                let (idx, &lambda) = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
                if lambda <= 0.0 {
                    return Some(ParamVec::zeros(self.dim));
                }
                let v = eig.eigenvectors.column(idx);
                let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs()))?;
                let scale = lambda.sqrt() * pivot.signum();
                ParamVec::new(v.iter().map(|c| scale * c).collect()).ok()
            }
            ObjectiveKind::Quadratic { a, b } => {
                let sol = a.clone().cholesky()?.solve(&DVector::from_column_slice(b));
                ParamVec::new(sol.iter().copied().collect()).ok()
            }
            ObjectiveKind::ScalarPower { exponent } if exponent % 2 == 0 => Some(ParamVec::zeros(self.dim)),
            _ => None,
        }
    }

    pub fn with_smoothness(mut self, constants: SmoothnessConstants) -> Result<Self> {
        constants.validate()?;
        self.smoothness = constants;
        Ok(self)
    }

    pub fn eval_value(&self, x: &ParamVec) -> Result<f64> {
        x.ensure_dim(self.dim)?;
        let xs = x.as_slice();
        let v = match &self.kind {
            ObjectiveKind::RankOne { y } => {
                let d = self.dim;
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let e = xs[i] * xs[j] - y[(i, j)];
                        acc += e * e;
                    }
                }
                0.5 * acc
            }
            ObjectiveKind::PenaltyNet(net) => net.value(xs),
            ObjectiveKind::ScalarPower { exponent } => xs.iter().map(|s| s.powi(*exponent as i32)).sum(),
            ObjectiveKind::ScalarExp => xs.iter().map(|s| s.exp()).sum(),
            ObjectiveKind::Cubic => xs.iter().map(|s| s * s * s).sum(),
            ObjectiveKind::Quadratic { a, b } => {
                let xv = DVector::from_column_slice(xs);
                0.5 * xv.dot(&(a * &xv)) - xs.iter().zip(b).map(|(p, q)| p * q).sum::<f64>()
            }
        };
        if !v.is_finite() {
            return Err(Error::NonFinite { context: "objective value" });
        }
        Ok(v)
    }

    pub fn eval_grad(&self, x: &ParamVec) -> Result<ParamVec> {
        x.ensure_dim(self.dim)?;
        let xs = x.as_slice();
        let g = match &self.kind {
            ObjectiveKind::RankOne { y } => {
                // 2 (x x^T - Y) x = 2 (||x||^2 x - Y x)
                let sq: f64 = xs.iter().map(|v| v * v).sum();
                (0..self.dim)
                    .map(|i| {
                        let yx: f64 = (0..self.dim).map(|j| y[(i, j)] * xs[j]).sum();
                        2.0 * (sq * xs[i] - yx)
                    })
                    .collect()
            }
            ObjectiveKind::PenaltyNet(net) => net.gradient(xs),
            ObjectiveKind::ScalarPower { exponent } => {
                let n = *exponent as f64;
                xs.iter().map(|s| n * s.powi(*exponent as i32 - 1)).collect()
            }
            ObjectiveKind::ScalarExp => xs.iter().map(|s| s.exp()).collect(),
            ObjectiveKind::Cubic => xs.iter().map(|s| 3.0 * s * s).collect(),
            ObjectiveKind::Quadratic { a, b } => {
                (0..self.dim).map(|i| (0..self.dim).map(|j| a[(i, j)] * xs[j]).sum::<f64>() - b[i]).collect()
            }
        };
        ParamVec::from_computed(g, "objective gradient")
    }

    /// Dense Hessian. Not available for `penalty_net`.
    pub fn eval_hessian(&self, x: &ParamVec) -> Result<DMatrix<f64>> {
        x.ensure_dim(self.dim)?;
        let xs = x.as_slice();
        let d = self.dim;
        let h = match &self.kind {
            ObjectiveKind::RankOne { y } => {
                let sq: f64 = xs.iter().map(|v| v * v).sum();
                DMatrix::from_fn(d, d, |i, j| {
                    let diag = if i == j { sq } else { 0.0 };
                    2.0 * (diag + 2.0 * xs[i] * xs[j] - y[(i, j)])
                })
            }
            ObjectiveKind::PenaltyNet(_) => {
                return Err(Error::Unsupported("penalty_net Hessian".into()));
            }
            ObjectiveKind::ScalarPower { exponent } => {
                let n = *exponent as f64;
                DMatrix::from_diagonal(&DVector::from_iterator(
                    d,
                    xs.iter().map(|s| n * (n - 1.0) * s.powi(*exponent as i32 - 2)),
                ))
            }
            ObjectiveKind::ScalarExp => DMatrix::from_diagonal(&DVector::from_iterator(d, xs.iter().map(|s| s.exp()))),
            ObjectiveKind::Cubic => DMatrix::from_diagonal(&DVector::from_iterator(d, xs.iter().map(|s| 6.0 * s))),
            ObjectiveKind::Quadratic { a, .. } => a.clone(),
        };
        Ok(h)
    }

    /// Spectral norm of the Hessian via dense symmetric eigen-decomposition.
    pub fn eval_hessian_opnorm(&self, x: &ParamVec) -> Result<f64> {
        if self.dim > MAX_HESSIAN_DIM {
            return Err(Error::Unsupported(format!("Hessian op-norm for dim {} > {MAX_HESSIAN_DIM}", self.dim)));
        }
        let h = self.eval_hessian(x)?;
        let v = spectral_norm_sym(&h);
        if !v.is_finite() {
            return Err(Error::NonFinite { context: "Hessian" });
        }
        Ok(v)
    }

    /// Frobenius norm of the third-derivative tensor, where available in closed form.
    pub fn third_derivative_frobenius(&self, x: &ParamVec) -> Result<f64> {
        x.ensure_dim(self.dim)?;
        let xs = x.as_slice();
        let d = self.dim as f64;
        let v = match &self.kind {
            // T_ijk = 4 (x_k d_ij + x_j d_ik + x_i d_jk); ||T||_F^2 = 16 (3d + 6) ||x||^2
            ObjectiveKind::RankOne { .. } => 4.0 * (3.0 * d + 6.0).sqrt() * x.norm_l2(),
            ObjectiveKind::ScalarPower { exponent } => {
                let n = *exponent as f64;
                let c = n * (n - 1.0) * (n - 2.0);
                xs.iter()
                    .map(|s| {
                        let t = c * s.abs().powi(*exponent as i32 - 3);
                        t * t
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            ObjectiveKind::ScalarExp => xs.iter().map(|s| (2.0 * s).exp()).sum::<f64>().sqrt(),
            ObjectiveKind::Cubic => 6.0 * d.sqrt(),
            ObjectiveKind::Quadratic { .. } => 0.0,
            ObjectiveKind::PenaltyNet(_) => {
                return Err(Error::Unsupported("penalty_net third derivative".into()));
            }
        };
        Ok(v)
    }
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`, independent of
/// any analytic gradient.
pub fn fd_gradient(obj: &Objective, x: &ParamVec, h: f64) -> Result<ParamVec> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("finite-difference step must be > 0"));
    }
    x.ensure_dim(obj.dim())?;
    let mut probe = x.as_slice().to_vec();
    let mut out = Vec::with_capacity(x.dim());
    for i in 0..x.dim() {
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = obj.eval_value(&ParamVec::new(probe.clone())?)?;
        probe[i] = orig - h;
        let fm = obj.eval_value(&ParamVec::new(probe.clone())?)?;
        probe[i] = orig;
        out.push((fp - fm) / (2.0 * h));
    }
    ParamVec::from_computed(out, "finite-difference gradient")
}
