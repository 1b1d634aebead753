//! Flat parameter vectors and the robust-statistics kernels the aggregators
//! are built from.
//!
//! Distances are squared Euclidean throughout; no square roots are taken on
//! the distance path.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::math;
use crate::{Error, Result};

/// A model flattened into a vector of `d` finite scalars.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVec(Vec<f64>);

impl ParamVec {
    /// Wraps `data`, rejecting NaN and infinite entries.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().all(|x| x.is_finite()) {
            Ok(Self(data))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn from_slice(data: &[f64]) -> Result<Self> {
        Self::new(data.to_vec())
    }

    /// Internal constructor for vectors produced by arithmetic on already
    /// validated inputs.
    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        Self(data)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_sq())
    }

    pub fn dot(&self, other: &ParamVec) -> Result<f64> {
        check_same_dim(self, other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    /// Returns `c * self`.
    pub fn scaled(&self, c: f64) -> ParamVec {
        ParamVec(self.0.iter().map(|x| x * c).collect())
    }

    /// Returns `-self`.
    pub fn negated(&self) -> ParamVec {
        ParamVec(self.0.iter().map(|x| -x).collect())
    }

    pub fn add(&self, other: &ParamVec) -> Result<ParamVec> {
        check_same_dim(self, other)?;
        Ok(ParamVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &ParamVec) -> Result<ParamVec> {
        check_same_dim(self, other)?;
        Ok(ParamVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// `self += c * other`, in place.
    pub fn axpy(&mut self, c: f64, other: &ParamVec) -> Result<()> {
        check_same_dim(self, other)?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
        Ok(())
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl Deref for ParamVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVec {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParamVec::new(v)
    }
}

fn check_same_dim(a: &ParamVec, b: &ParamVec) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Validates a collection of models: nonempty, equal dimensions, all finite.
/// Returns the shared dimension.
pub fn check_models(models: &[ParamVec]) -> Result<usize> {
    let first = models.first().ok_or(Error::Empty("model collection"))?;
    let d = first.dim();
    for m in models {
        if m.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.dim(),
            });
        }
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
    }
    Ok(d)
}

/// Squared Euclidean distance `Σ_k (a_k - b_k)²`.
pub fn euclidean_dist_sq(a: &ParamVec, b: &ParamVec) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(a.0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| {
            let diff = x - y;
            diff * diff
        })
        .sum())
}

/// Cosine distance `1 - <a,b> / (|a| |b|)`, clamped to `[0, 2]`.
pub fn cosine_dist(a: &ParamVec, b: &ParamVec) -> Result<f64> {
    let dot = a.dot(b)?;
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

/// Like [`cosine_dist`], but a zero-norm input is maximally dissimilar (2).
pub fn cosine_dist_or_max(a: &ParamVec, b: &ParamVec) -> Result<f64> {
    match cosine_dist(a, b) {
        Err(Error::ZeroNorm) => Ok(2.0),
        other => other,
    }
}

/// Median of a scalar slice; even counts average the two middle values.
/// The slice is reordered.
pub fn median_in_place(values: &mut [f64]) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Empty("median of empty slice"));
    }
    let mid = n / 2;
    let (left, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Ok(upper)
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(0.5 * (lower + upper))
    }
}

/// Coordinate-wise median of `models`.
pub fn coordwise_median(models: &[ParamVec]) -> Result<ParamVec> {
    let d = check_models(models)?;
    let mut column = vec![0.0; models.len()];
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        for (slot, m) in column.iter_mut().zip(models) {
            *slot = m.0[k];
        }
        out.push(median_in_place(&mut column)?);
    }
    Ok(ParamVec(out))
}

/// Scales `v` by `min(1, cap / |v|)`. The zero vector passes through.
pub fn norm_clip(v: &ParamVec, cap: f64) -> Result<ParamVec> {
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::Precondition(alloc::format!(
            "clip cap must be positive and finite, got {cap}"
        )));
    }
    let norm = v.norm();
    if norm <= cap * (1.0 + 8.0 * f64::EPSILON) {
        return Ok(v.clone());
    }
    Ok(v.scaled(cap / norm))
}

/// Normalized weighted sum `Σ_j (w_j / Σw) θ_j`.
pub fn weighted_sum(models: &[ParamVec], weights: &[f64]) -> Result<ParamVec> {
    let d = check_models(models)?;
    if models.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "models vs weights",
            left: models.len(),
            right: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::DegenerateWeights);
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let mut out = vec![0.0; d];
    for (m, w) in models.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let c = w / total;
        for (o, x) in out.iter_mut().zip(&m.0) {
            *o += c * x;
        }
    }
    Ok(ParamVec(out))
}

/// Arithmetic mean of `models`.
pub fn mean(models: &[ParamVec]) -> Result<ParamVec> {
    let d = check_models(models)?;
    let mut out = vec![0.0; d];
    for m in models {
        for (o, x) in out.iter_mut().zip(&m.0) {
            *o += x;
        }
    }
    let inv = 1.0 / models.len() as f64;
    for o in &mut out {
        *o *= inv;
    }
    Ok(ParamVec(out))
}

/// Mean of the models at `indices`.
pub fn mean_of(models: &[ParamVec], indices: &[usize]) -> Result<ParamVec> {
    let picked: Vec<ParamVec> = indices.iter().map(|&i| models[i].clone()).collect();
    mean(&picked)
}
