//! Exact Euclidean projection onto `{d : d_i + d_j >= eps for all i < j}`.
//!
//! The feasible set is the same as `min1(d) + min2(d) >= eps`, written as `C(K,2)`
//! half-spaces so the projection becomes a convex QP with identity Hessian. The solver
//! is a primal active-set method started from the Shift-All point, which is feasible.
//! Every equality-constrained subproblem has a closed form: with working rows `A_W`
//! (each `e_i + e_j`), the step is the residual `u - d` projected onto `null(A_W)`.
//!
//! [`brute_force_project`] is an exhaustive active-set enumeration used to verify the
//! solver on small `K`.

use crate::error::{invalid, MdfError, Result};
use crate::field::{check_mdf_slice, SdfVector};
use crate::projection::shift_all_in_place;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest `K` accepted by [`project_qp`].
pub const MAX_OBJECTS: usize = 64;
/// Largest `K` accepted by [`brute_force_project`].
pub const MAX_BRUTE_FORCE_OBJECTS: usize = 8;

const FEAS_TOL: f64 = 1e-10;
const DUAL_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-9;

/// Result of [`project_qp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub d: SdfVector,
    /// Working-set pairs `(i, j)`, `i < j`, at the optimum.
    pub active: Vec<(usize, usize)>,
    /// KKT multiplier for each entry of `active`.
    pub duals: Vec<f64>,
    /// `||d - u||^2`.
    pub objective: f64,
    pub iterations: usize,
}

/// All pairs `(i, j)` with `i < j`, in lexicographic order.
pub fn pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect()
}

/// Inner product of two constraint rows `e_i + e_j` and `e_k + e_l`.
#[inline]
fn row_dot(a: (usize, usize), b: (usize, usize)) -> f64 {
    let mut s = 0.0;
    for x in [a.0, a.1] {
        if x == b.0 {
            s += 1.0;
        }
        if x == b.1 {
            s += 1.0;
        }
    }
    s
}

/// Dense Cholesky factor of the Gram matrix of a working set.
struct GramFactor {
    n: usize,
    l: Vec<f64>,
}

impl GramFactor {
    /// `None` when the rows are (numerically) linearly dependent.
    fn new(rows: &[(usize, usize)]) -> Option<Self> {
        let n = rows.len();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = row_dot(rows[i], rows[j]);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= PIVOT_TOL {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Self { n, l })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = rhs.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

/// Splits `r` into `A_W^T mu + p` with `p` in the null space of the working rows.
/// Returns `(p, mu)`.
fn null_space_split(
    rows: &[(usize, usize)],
    factor: &GramFactor,
    r: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let rhs: Vec<f64> = rows.iter().map(|&(i, j)| r[i] + r[j]).collect();
    let mu = factor.solve(&rhs);
    let mut p = r.to_vec();
    for (&(i, j), &m) in rows.iter().zip(&mu) {
        p[i] -= m;
        p[j] -= m;
    }
    (p, mu)
}

fn validate(u: &SdfVector, eps: f64, max_k: usize) -> Result<()> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(invalid(format!(
            "eps must be finite and non-negative, got {eps}"
        )));
    }
    if u.len() > max_k {
        return Err(invalid(format!(
            "K = {} exceeds the supported maximum {max_k}",
            u.len()
        )));
    }
    Ok(())
}

/// Minimizes `||d - u||^2` subject to `d_i + d_j >= eps` for all `i < j`.
///
/// Fails with [`MdfError::NotConverged`] (carrying the best feasible iterate) after
/// `50 * C(K,2)` iterations.
pub fn project_qp(u: &SdfVector, eps: f64) -> Result<QpSolution> {
    validate(u, eps, MAX_OBJECTS)?;
    let u = u.as_slice();
    let k = u.len();
    let all = pairs(k);
    let max_iter = 50 * all.len();

    let mut d = u.to_vec();
    shift_all_in_place(&mut d, eps);
    let scale = u.iter().fold(1.0f64, |m, v| m.max(v.abs())).max(eps);
    let step_tol = 1e-12 * scale;

    // warm start: constraints tight at the Shift-All point, kept linearly independent
    let mut working: Vec<usize> = Vec::new();
    for (c, &(i, j)) in all.iter().enumerate() {
        if d[i] + d[j] - eps <= FEAS_TOL * scale {
            let mut trial: Vec<(usize, usize)> = working.iter().map(|&w| all[w]).collect();
            trial.push((i, j));
            if GramFactor::new(&trial).is_some() {
                working.push(c);
            }
        }
    }

    let mut iterations = 0;
    loop {
        if iterations >= max_iter {
            return Err(MdfError::NotConverged {
                iterations,
                best: d,
            });
        }
        iterations += 1;

        let rows: Vec<(usize, usize)> = working.iter().map(|&w| all[w]).collect();
        let factor = GramFactor::new(&rows).expect("working set stays linearly independent");
        let r: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - b).collect();
        let (p, mu) = null_space_split(&rows, &factor, &r);

        if p.iter().all(|v| v.abs() <= step_tol) {
            // multipliers: 2 (d - u) = A_W^T lambda  =>  lambda = -2 mu
            let worst = mu
                .iter()
                .enumerate()
                .map(|(pos, &m)| (pos, -2.0 * m))
                .filter(|&(_, l)| l < -DUAL_TOL)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                None => {
                    let mut d = d;
                    if !check_mdf_slice(&d, eps) {
                        shift_all_in_place(&mut d, eps);
                    }
                    return Ok(finish(u, d, &all, &working, iterations));
                }
                Some((pos, _)) => {
                    working.remove(pos);
                    continue;
                }
            }
        }

        // ratio test against constraints outside the working set
        // rows in the span of the working set have a.p == 0 up to rounding, and p carries
        // cancellation error relative to r; never block on such rows
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let block_tol = 1e-12 * (max_abs(&p) + max_abs(&r));
        let mut alpha = 1.0;
        let mut blocking = None;
        for (c, &(i, j)) in all.iter().enumerate() {
            if working.contains(&c) {
                continue;
            }
            let ap = p[i] + p[j];
            if ap < -block_tol {
                let slack = (d[i] + d[j] - eps).max(0.0);
                let t = slack / -ap;
                if t < alpha {
                    alpha = t;
                    blocking = Some(c);
                }
            }
        }
        for (x, dp) in d.iter_mut().zip(&p) {
            *x += alpha * dp;
        }
        if let Some(c) = blocking {
            let mut trial = rows;
            trial.push(all[c]);
            // a numerically dependent row stays tight through the rows it depends on
            if GramFactor::new(&trial).is_some() {
                working.push(c);
                working.sort_unstable();
            }
        }
    }
}

fn finish(
    u: &[f64],
    d: Vec<f64>,
    all: &[(usize, usize)],
    working: &[usize],
    iterations: usize,
) -> QpSolution {
    let rows: Vec<(usize, usize)> = working.iter().map(|&w| all[w]).collect();
    let duals = if rows.is_empty() {
        Vec::new()
    } else {
        let factor = GramFactor::new(&rows).expect("working set stays linearly independent");
        let rhs: Vec<f64> = rows
            .iter()
            .map(|&(i, j)| 2.0 * (d[i] - u[i] + d[j] - u[j]))
            .collect();
        factor.solve(&rhs)
    };
    let objective = d.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
    QpSolution {
        d: SdfVector::from_vec_unchecked(d),
        active: rows,
        duals,
        objective,
        iterations,
    }
}

/// Runs [`project_qp`] on every input in parallel; results keep input order.
pub fn project_qp_batch(inputs: &[SdfVector], eps: f64) -> Vec<Result<QpSolution>> {
    inputs.par_iter().map(|u| project_qp(u, eps)).collect()
}

/// Worst-case KKT violations of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `max(0, eps - (d_i + d_j))` over all pairs.
    pub primal: f64,
    /// `max |2(d - u) - sum lambda (e_i + e_j)|` over components.
    pub stationarity: f64,
    /// `max(0, -lambda)` over active pairs.
    pub dual: f64,
    /// `max |d_i + d_j - eps|` over active pairs.
    pub complementarity: f64,
}

pub fn kkt_residuals(u: &SdfVector, sol: &QpSolution, eps: f64) -> KktResiduals {
    let (u, d) = (u.as_slice(), sol.d.as_slice());
    let primal = pairs(u.len())
        .into_iter()
        .map(|(i, j)| (eps - d[i] - d[j]).max(0.0))
        .fold(0.0, f64::max);
    let mut grad: Vec<f64> = d.iter().zip(u).map(|(a, b)| 2.0 * (a - b)).collect();
    for (&(i, j), &l) in sol.active.iter().zip(&sol.duals) {
        grad[i] -= l;
        grad[j] -= l;
    }
    let stationarity = grad.iter().fold(0.0, |m: f64, g| m.max(g.abs()));
    let dual = sol.duals.iter().fold(0.0, |m: f64, l| m.max(-l));
    let complementarity = sol
        .active
        .iter()
        .map(|&(i, j)| (d[i] + d[j] - eps).abs())
        .fold(0.0, f64::max);
    KktResiduals {
        primal,
        stationarity,
        dual,
        complementarity,
    }
}

/// Exhaustive active-set enumeration (`K <= 8`).
///
/// Every subset of the pairwise constraints is a candidate active set; each candidate is
/// solved as an equality-constrained least-squares problem and kept when it is primal and
/// dual feasible. Subsets with linearly dependent rows are skipped together with all of
/// their supersets: any point they reach is also reached by an independent subset.
pub fn brute_force_project(u: &SdfVector, eps: f64) -> Result<SdfVector> {
    validate(u, eps, MAX_BRUTE_FORCE_OBJECTS)?;
    let u = u.as_slice();
    let all = pairs(u.len());
    let mut search = Enumeration {
        u,
        eps,
        all: &all,
        rows: Vec::new(),
        chol: Vec::new(),
        best: None,
    };
    search.visit(0);
    let (_, d) = search
        .best
        .expect("the empty active set or a full one is always consistent");
    Ok(SdfVector::from_vec_unchecked(d))
}

struct Enumeration<'a> {
    u: &'a [f64],
    eps: f64,
    all: &'a [(usize, usize)],
    rows: Vec<(usize, usize)>,
    /// Row-major lower-triangular Cholesky rows, one `Vec` per accepted row.
    chol: Vec<Vec<f64>>,
    best: Option<(f64, Vec<f64>)>,
}

impl Enumeration<'_> {
    fn visit(&mut self, next: usize) {
        self.evaluate();
        for c in next..self.all.len() {
            let row = self.all[c];
            // extend the factor by one row: l = L^{-1} g, pivot = 2 - |l|^2
            let m = self.rows.len();
            let mut l = vec![0.0; m + 1];
            for i in 0..m {
                let ci = &self.chol[i];
                let s = row_dot(row, self.rows[i])
                    - l[..i].iter().zip(ci).map(|(a, b)| a * b).sum::<f64>();
                l[i] = s / ci[i];
            }
            let pivot = 2.0 - l[..m].iter().map(|x| x * x).sum::<f64>();
            if pivot <= PIVOT_TOL {
                continue;
            }
            l[m] = pivot.sqrt();
            self.rows.push(row);
            self.chol.push(l);
            self.visit(c + 1);
            self.rows.pop();
            self.chol.pop();
        }
    }

    fn evaluate(&mut self) {
        let m = self.rows.len();
        // G mu = eps - A u, d = u + A^T mu, lambda = 2 mu
        let mut y: Vec<f64> = self
            .rows
            .iter()
            .map(|&(i, j)| self.eps - self.u[i] - self.u[j])
            .collect();
        for i in 0..m {
            for k in 0..i {
                y[i] -= self.chol[i][k] * y[k];
            }
            y[i] /= self.chol[i][i];
        }
        for i in (0..m).rev() {
            for k in i + 1..m {
                y[i] -= self.chol[k][i] * y[k];
            }
            y[i] /= self.chol[i][i];
        }
        if y.iter().any(|&mu| 2.0 * mu < -FEAS_TOL) {
            return;
        }
        let mut d = self.u.to_vec();
        for (&(i, j), &mu) in self.rows.iter().zip(&y) {
            d[i] += mu;
            d[j] += mu;
        }
        if self
            .all
            .iter()
            .any(|&(i, j)| d[i] + d[j] < self.eps - FEAS_TOL)
        {
            return;
        }
        let obj: f64 = d.iter().zip(self.u).map(|(a, b)| (a - b) * (a - b)).sum();
        if self.best.as_ref().is_none_or(|(b, _)| obj < *b) {
            self.best = Some((obj, d));
        }
    }
}
