//! Closed-form enforcement of the MDF constraint.
//!
//! Shift-All adds the same constant to every entry of a violating vector so that the
//! two smallest entries sum to `eps`. It is feasible, exact on already-feasible vectors,
//! and preserves all pairwise differences. For two objects it is the Euclidean
//! projection onto the feasible set.

use crate::error::{invalid, MdfError, Result};
use crate::field::{s2_of, SampledMdfGrid, SdfVector};
use crate::qp;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Feasibility restoration strategy for grid projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ShiftAll,
    Qp,
}

impl FromStr for Method {
    type Err = MdfError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shift_all" | "shift-all" => Ok(Method::ShiftAll),
            "qp" => Ok(Method::Qp),
            other => Err(invalid(format!(
                "unknown method `{other}` (expected shift_all or qp)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::ShiftAll => "shift_all",
            Method::Qp => "qp",
        })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "eps must be finite and non-negative, got {eps}"
        )))
    }
}

/// In-place Shift-All on a raw slice; returns whether anything changed.
///
/// After the shift the computed `min1 + min2` is `>= eps` in floating point, not just
/// in exact arithmetic: the shift is nudged up by a few ulps when rounding falls short.
pub(crate) fn shift_all_in_place(u: &mut [f64], eps: f64) -> bool {
    let s2 = s2_of(u);
    if s2 >= eps {
        return false;
    }
    let base: Vec<f64> = u.to_vec();
    let mut c = (eps - s2) / 2.0;
    loop {
        for (d, &b) in u.iter_mut().zip(&base) {
            *d = b + c;
        }
        let got = s2_of(u);
        if got >= eps {
            return true;
        }
        let scale = base.iter().fold(c.abs(), |m, v| m.max(v.abs()));
        c += ((eps - got) / 2.0).max(scale * f64::EPSILON);
    }
}

/// Shift-All with margin `eps`: unchanged when `min1 + min2 >= eps`, otherwise every
/// entry is raised by `(eps - min1 - min2) / 2`.
pub fn shift_all(u: &SdfVector, eps: f64) -> Result<SdfVector> {
    check_eps(eps)?;
    let mut d = u.as_slice().to_vec();
    shift_all_in_place(&mut d, eps);
    Ok(SdfVector::from_vec_unchecked(d))
}

/// Analytical projection for two objects, derived from the KKT conditions.
///
/// Inactive when `u1 + u2 >= eps` (multiplier zero); otherwise the multiplier is
/// `eps - u1 - u2` and each entry moves by half of it.
pub fn project_k2(u: &SdfVector, eps: f64) -> Result<SdfVector> {
    check_eps(eps)?;
    let [u1, u2] = u.as_slice() else {
        return Err(invalid(format!(
            "project_k2 needs K = 2, got K = {}",
            u.len()
        )));
    };
    let sum = u1 + u2;
    if sum >= eps {
        return Ok(u.clone());
    }
    let lambda = eps - sum;
    let mut d = vec![u1 + lambda / 2.0, u2 + lambda / 2.0];
    // rounding guard, identical in spirit to shift_all
    if d[0] + d[1] < eps {
        shift_all_in_place(&mut d, eps);
    }
    Ok(SdfVector::from_vec_unchecked(d))
}

/// Projects every lattice vector of `grid` onto the feasible set with margin `eps`.
///
/// Feasible vectors are copied bit-for-bit. Solver failures carry the lattice index.
pub fn project_grid(grid: &SampledMdfGrid, method: Method, eps: f64) -> Result<SampledMdfGrid> {
    check_eps(eps)?;
    let kk = grid.channels();
    if kk < 2 {
        return Err(invalid("projection needs at least 2 channels"));
    }
    let spec = *grid.spec();
    let n = spec.num_points();

    let updates: Vec<(usize, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |buf, idx| -> Result<Option<(usize, Vec<f64>)>> {
            grid.vector_into(idx, buf);
            if s2_of(buf) >= eps {
                return Ok(None);
            }
            let d = match method {
                Method::ShiftAll => {
                    let mut d = buf.clone();
                    shift_all_in_place(&mut d, eps);
                    d
                }
                Method::Qp => {
                    let u = SdfVector::from_vec_unchecked(buf.clone());
                    qp::project_qp(&u, eps)
                        .map_err(|e| {
                            let (i, j, k) = spec.unlinear(idx);
                            MdfError::AtLattice {
                                i,
                                j,
                                k,
                                source: Box::new(e),
                            }
                        })?
                        .d
                        .into_vec()
                }
            };
            Ok(Some((idx, d)))
        })
        .filter_map(|r| r.transpose())
        .collect::<Result<_>>()?;

    let mut out = grid.clone();
    for (idx, d) in updates {
        out.set_vector(idx, &d)?;
    }
    Ok(out)
}

/// Number of lattice points whose vectors differ between two grids of the same shape.
pub fn count_modified(a: &SampledMdfGrid, b: &SampledMdfGrid) -> usize {
    let n = a.spec().num_points();
    (0..n)
        .filter(|&idx| {
            (0..a.channels())
                .any(|c| a.data()[c * n + idx].to_bits() != b.data()[c * n + idx].to_bits())
        })
        .count()
}

/// Number of lattice points violating `min1 + min2 >= eps`.
pub fn count_infeasible(grid: &SampledMdfGrid, eps: f64) -> usize {
    let n = grid.spec().num_points();
    (0..n)
        .into_par_iter()
        .map_init(Vec::new, |buf, idx| {
            grid.vector_into(idx, buf);
            usize::from(s2_of(buf) < eps)
        })
        .sum()
}
