//! Flat real vectors used for iterates, momenta and gradients.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite vector in `R^d`, `d >= 1`.
///
/// Every constructor rejects NaN and infinities, and every arithmetic helper
/// re-checks its output, so a `ParamVec` in hand is always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVec(Vec<f64>);

impl ParamVec {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("vector dimension must be at least 1"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "vector entries" });
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "vector dimension must be at least 1");
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        assert!(dim >= 1 && value.is_finite());
        Self(vec![value; dim])
    }

    /// Builds from values the caller has just computed; checks finiteness.
    pub(crate) fn from_computed(entries: Vec<f64>, context: &'static str) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context });
        }
        Ok(Self(entries))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch { expected, got: self.dim() });
        }
        Ok(())
    }

    pub fn dot(&self, other: &ParamVec) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_l1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// `self + other`.
    pub fn add(&self, other: &ParamVec) -> Result<ParamVec> {
        self.zip_with(other, |a, b| a + b)
    }

    /// `self - other`.
    pub fn sub(&self, other: &ParamVec) -> Result<ParamVec> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &ParamVec) -> Result<ParamVec> {
        self.zip_with(other, |a, b| a + c * b)
    }

    pub fn scale(&self, c: f64) -> Result<ParamVec> {
        ParamVec::from_computed(self.0.iter().map(|v| c * v).collect(), "scaled vector")
    }

    pub fn zip_with(&self, other: &ParamVec, f: impl Fn(f64, f64) -> f64) -> Result<ParamVec> {
        other.ensure_dim(self.dim())?;
        let out = self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect();
        ParamVec::from_computed(out, "vector arithmetic")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ParamVec> {
        ParamVec::from_computed(self.0.iter().map(|&v| f(v)).collect(), "vector map")
    }

    pub fn distance(&self, other: &ParamVec) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

impl Index<usize> for ParamVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ParamVec {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParamVec::new(v)
    }
}

impl From<ParamVec> for Vec<f64> {
    fn from(v: ParamVec) -> Vec<f64> {
        v.0
    }
}

impl AsRef<[f64]> for ParamVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(ParamVec::new(vec![]).is_err());
        assert!(ParamVec::new(vec![1.0, f64::NAN]).is_err());
        assert!(ParamVec::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn arithmetic_checks_overflow() {
        let big = ParamVec::new(vec![f64::MAX]).unwrap();
        assert!(big.add(&big).is_err());
    }

    #[test]
    fn norms() {
        let v = ParamVec::new(vec![3.0, -4.0]).unwrap();
        assert_eq!(v.norm_l1(), 7.0);
        assert_eq!(v.norm_l2(), 5.0);
        assert_eq!(v.norm_inf(), 4.0);
    }

    #[test]
    fn serde_rejects_nan_through_try_from() {
        let v: std::result::Result<ParamVec, _> = Vec::<f64>::new().try_into();
        assert!(v.is_err());
    }
}
