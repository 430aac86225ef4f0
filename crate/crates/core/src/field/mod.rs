//! Vector-valued signed distances and the two intersection constraints on them.
//!
//! A point is inside object `k` when its entry is negative. The weak constraint asks for
//! at most one negative entry, i.e. the second smallest entry is non-negative. The MDF
//! constraint asks for the two smallest entries to sum to a non-negative value; it implies
//! the weak one and, unlike it, survives linear interpolation between samples.

mod grid;
mod scene;

pub use grid::{intersection_penalty, sample_grid, GridSpec, SampledMdfGrid};
pub use scene::{eval_scene, AnalyticScene, Primitive, SceneObject};

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Signed distances of one spatial point to each of `K >= 2` objects.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SdfVector(Vec<f64>);

impl SdfVector {
    /// Validates `K >= 2` and that every entry is finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid(format!(
                "an SDF vector needs at least 2 entries, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "SDF entry {pos} is not finite ({})",
                values[pos]
            )));
        }
        Ok(Self(values))
    }

    /// Skips validation; callers guarantee `K >= 2` and finiteness.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2);
        Self(values)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for SdfVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        SdfVector::new(values).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Vec<f64>> for SdfVector {
    type Error = crate::MdfError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl TryFrom<&[f64]> for SdfVector {
    type Error = crate::MdfError;
    fn try_from(v: &[f64]) -> Result<Self> {
        Self::new(v.to_vec())
    }
}

impl AsRef<[f64]> for SdfVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// The two smallest entries of an SDF vector and both constraint verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub min1: f64,
    pub min2: f64,
    pub argmin1: usize,
    pub argmin2: usize,
    /// `min1 + min2`.
    pub s2: f64,
    /// `min2 >= 0`: at most one object contains the point.
    pub feasible_min2: bool,
    /// `min1 + min2 >= 0`: the MDF constraint.
    pub feasible_s2: bool,
}

/// Smallest and second-smallest entries of `u`, counted with multiplicity.
///
/// Ties resolve to the lowest index for `argmin1` and the next lowest for `argmin2`.
/// Assumes `u.len() >= 2`.
pub(crate) fn two_smallest(u: &[f64]) -> (usize, usize) {
    debug_assert!(u.len() >= 2);
    let (mut a, mut b) = if u[1] < u[0] { (1, 0) } else { (0, 1) };
    for (k, &v) in u.iter().enumerate().skip(2) {
        if v < u[a] {
            b = a;
            a = k;
        } else if v < u[b] {
            b = k;
        }
    }
    (a, b)
}

/// `min1 + min2` of a raw slice with at least two entries.
#[inline]
pub(crate) fn s2_of(u: &[f64]) -> f64 {
    let (a, b) = two_smallest(u);
    u[a] + u[b]
}

pub fn min1_min2(u: &SdfVector) -> ConstraintReport {
    let v = u.as_slice();
    let (a, b) = two_smallest(v);
    let s2 = v[a] + v[b];
    ConstraintReport {
        min1: v[a],
        min2: v[b],
        argmin1: a,
        argmin2: b,
        s2,
        feasible_min2: v[b] >= 0.0,
        feasible_s2: s2 >= 0.0,
    }
}

/// Whether `min1(u) + min2(u) >= eps`. `eps = 0` is the plain MDF constraint.
pub fn check_mdf(u: &SdfVector, eps: f64) -> bool {
    check_mdf_slice(u.as_slice(), eps)
}

#[inline]
pub(crate) fn check_mdf_slice(u: &[f64], eps: f64) -> bool {
    s2_of(u) >= eps
}

/// Intersection penalty of a single SDF vector:
/// `1/(K-1) * sum_{k != argmin} max(0, -(u_min + u_k))`.
pub fn intersection_loss(u: &SdfVector) -> f64 {
    intersection_loss_slice(u.as_slice())
}

pub(crate) fn intersection_loss_slice(u: &[f64]) -> f64 {
    let (a, _) = two_smallest(u);
    let umin = u[a];
    let total: f64 = u
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != a)
        .map(|(_, &uk)| (-(umin + uk)).max(0.0))
        .sum();
    total / (u.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> SdfVector {
        SdfVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn fig1_pair_violates_s2() {
        let r = min1_min2(&v(&[-3.0, 2.0]));
        assert_eq!((r.min1, r.min2, r.s2), (-3.0, 2.0, -1.0));
        assert!(!r.feasible_s2);
        assert!(r.feasible_min2);
    }

    #[test]
    fn tie_at_zero_is_feasible() {
        let r = min1_min2(&v(&[0.0, 0.0, 5.0]));
        assert_eq!((r.min1, r.min2, r.s2), (0.0, 0.0, 0.0));
        assert_eq!((r.argmin1, r.argmin2), (0, 1));
        assert!(r.feasible_s2);
    }

    #[test]
    fn four_entries_sorted() {
        let r = min1_min2(&v(&[4.0, 1.0, 2.0, 3.0]));
        assert_eq!(
            (r.min1, r.min2, r.argmin1, r.argmin2, r.s2),
            (1.0, 2.0, 1, 2, 3.0)
        );
        assert!(r.feasible_s2);
    }

    #[test]
    fn ties_prefer_lowest_index() {
        let r = min1_min2(&v(&[3.0, -1.0, -1.0, -1.0]));
        assert_eq!((r.argmin1, r.argmin2), (1, 2));
        let r = min1_min2(&v(&[2.0, 2.0]));
        assert_eq!((r.argmin1, r.argmin2), (0, 1));
    }

    #[test]
    fn check_mdf_examples() {
        let d = 0.1;
        assert!(!check_mdf(&v(&[-1.0 - d, -d]), 0.0));
        assert!(check_mdf(&v(&[1.0, 1.0]), 0.0));
        assert!(!check_mdf(&v(&[-0.5, 0.5]), 1e-4));
        assert!(check_mdf(&v(&[-0.5, 0.5]), 0.0));
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(SdfVector::new(vec![1.0]).is_err());
        assert!(SdfVector::new(vec![]).is_err());
        assert!(SdfVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(SdfVector::new(vec![f64::INFINITY, 0.0]).is_err());
        assert!(serde_json::from_str::<SdfVector>("[1.0]").is_err());
        assert!(serde_json::from_str::<SdfVector>("[1.0, 2.0]").is_ok());
    }

    #[test]
    fn loss_examples() {
        assert_eq!(intersection_loss(&v(&[-3.0, 2.0])), 1.0);
        assert_eq!(intersection_loss(&v(&[-2.0, -1.0, 0.0])), 2.5);
        assert_eq!(intersection_loss(&v(&[1.0, 2.0, 3.0])), 0.0);
    }
}
