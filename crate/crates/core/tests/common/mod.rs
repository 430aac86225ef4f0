//! Independent oracles and seeded checks shared by the property and acceptance suites.
#![allow(dead_code)]

use mdfkit::meshing::{edge_crossings, CrossingSign};
use mdfkit::{brute_force_project, check_mdf, kkt_residuals, project_qp, shift_all, SdfVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mix of continuous entries and entries on a coarse lattice so that exact ties and
/// exact boundary cases show up.
pub fn random_vec(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let quantized = rng.random_bool(0.3);
    (0..k)
        .map(|_| {
            if quantized {
                rng.random_range(-8i32..=8) as f64 * 0.25
            } else {
                rng.random_range(-2.0..2.0)
            }
        })
        .collect()
}

pub fn sdf(v: Vec<f64>) -> SdfVector {
    SdfVector::new(v).unwrap()
}

/// Sum of the two smallest entries, by sorting.
pub fn s2(u: &[f64]) -> f64 {
    let mut v = u.to_vec();
    v.sort_by(f64::total_cmp);
    v[0] + v[1]
}

/// Every pair `d_i + d_j >= eps`.
pub fn pairwise_feasible(u: &[f64], eps: f64) -> bool {
    (0..u.len()).all(|i| (i + 1..u.len()).all(|j| u[i] + u[j] >= eps))
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| t * x + (1.0 - t) * y)
        .collect()
}

/// A random vector satisfying the constraint with margin exactly zero or more.
pub fn random_feasible(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let u = random_vec(rng, k);
    shift_all(&sdf(u), 0.0).unwrap().into_vec()
}

pub type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Pairwise form and S2 form agree exactly, K in 2..=8, for eps 0 and a random eps.
pub fn pairwise_equivalence(seed: u64, n_per_k: usize) -> Outcome {
    let mut r = rng(seed);
    let mut boundary = 0;
    for k in 2..=8 {
        for _ in 0..n_per_k {
            let u = random_vec(&mut r, k);
            for eps in [0.0, 0.25 * r.random_range(0..4) as f64] {
                let fast = check_mdf(&sdf(u.clone()), eps);
                ensure(fast == pairwise_feasible(&u, eps), || {
                    format!("mismatch at {u:?}, eps {eps}")
                })?;
                boundary += usize::from(s2(&u) == eps);
            }
        }
    }
    Ok(format!(
        "{} vectors, {boundary} exactly on the boundary",
        7 * n_per_k
    ))
}

pub fn s2_concavity(seed: u64, n: usize) -> Outcome {
    let mut r = rng(seed);
    for _ in 0..n {
        let k = r.random_range(2..=8);
        let (a, b) = (random_vec(&mut r, k), random_vec(&mut r, k));
        let t: f64 = r.random();
        let lhs = s2(&lerp(&a, &b, t));
        let rhs = t * s2(&a) + (1.0 - t) * s2(&b);
        ensure(lhs >= rhs - 1e-12, || {
            format!("concavity fails: {a:?} {b:?} t={t}")
        })?;
    }
    Ok(format!("{n} triples"))
}

/// Feasible endpoints stay feasible at 100 interpolation parameters in [0, 1].
pub fn interpolation_closure(seed: u64, n: usize) -> Outcome {
    let mut r = rng(seed);
    for _ in 0..n {
        let k = r.random_range(2..=8);
        let (a, b) = (random_feasible(&mut r, k), random_feasible(&mut r, k));
        for step in 0..100 {
            let t = step as f64 / 99.0;
            let m = lerp(&a, &b, t);
            ensure(s2(&m) >= -1e-12, || {
                format!("closure fails: {a:?} {b:?} t={t}")
            })?;
        }
    }
    Ok(format!("{n} pairs x 100 alphas"))
}

/// Endpoints with `min2 >= 0` whose midpoint has `min2 < 0`.
pub fn min2_witness() -> Outcome {
    let a = [-2.0, 1.0];
    let b = [1.0, -2.0];
    let min2 = |u: &[f64]| {
        let mut v = u.to_vec();
        v.sort_by(f64::total_cmp);
        v[1]
    };
    let mid = lerp(&a, &b, 0.5);
    ensure(
        min2(&a) >= 0.0 && min2(&b) >= 0.0 && min2(&mid) < 0.0,
        || "witness broken".into(),
    )?;
    Ok(format!("{a:?} and {b:?} interpolate to {mid:?}"))
}

/// Endpoint pair with exactly one negative entry each, at distinct indices.
fn crossing_pair(
    r: &mut ChaCha8Rng,
    k: usize,
    feasible: bool,
) -> (Vec<f64>, Vec<f64>, usize, usize) {
    let i = r.random_range(0..k);
    let j = (i + r.random_range(1..k)) % k;
    let mut make = |neg: usize| -> Vec<f64> {
        let a = r.random_range(0.01..2.0);
        (0..k)
            .map(|c| {
                if c == neg {
                    -a
                } else if feasible {
                    a + r.random_range(0.0..2.0)
                } else {
                    r.random_range(0.01..2.0)
                }
            })
            .collect()
    };
    let u1 = make(i);
    let u2 = make(j);
    (u1, u2, i, j)
}

fn crossing_alphas(u1: &[f64], u2: &[f64], i: usize, j: usize) -> (f64, f64) {
    let xs = edge_crossings(&sdf(u1.to_vec()), &sdf(u2.to_vec())).unwrap();
    let find = |obj, sign| {
        xs.iter()
            .find(|x| x.object_index == obj && x.sign == sign)
            .unwrap()
            .alpha
    };
    (
        find(i, CrossingSign::Exiting),
        find(j, CrossingSign::Entering),
    )
}

/// Crossing order on feasible pairs; returns the number of violations seen on infeasible pairs.
pub fn crossing_order(seed: u64, n: usize) -> Outcome {
    let mut r = rng(seed);
    for _ in 0..n {
        let k = r.random_range(2..=6);
        let (u1, u2, i, j) = crossing_pair(&mut r, k, true);
        ensure(
            check_mdf(&sdf(u1.clone()), 0.0) && check_mdf(&sdf(u2.clone()), 0.0),
            || "generator".into(),
        )?;
        let xs = edge_crossings(&sdf(u1.clone()), &sdf(u2.clone())).unwrap();
        ensure(xs.len() <= 2, || {
            format!("{} crossings for {u1:?} {u2:?}", xs.len())
        })?;
        let (ai, aj) = crossing_alphas(&u1, &u2, i, j);
        ensure(ai <= aj + 1e-12, || format!("order fails: {u1:?} {u2:?}"))?;
    }
    let mut violations = 0;
    for _ in 0..n {
        let k = r.random_range(2..=6);
        let (u1, u2, i, j) = crossing_pair(&mut r, k, false);
        if check_mdf(&sdf(u1.clone()), 0.0) && check_mdf(&sdf(u2.clone()), 0.0) {
            continue;
        }
        let (ai, aj) = crossing_alphas(&u1, &u2, i, j);
        violations += usize::from(ai > aj + 1e-12);
    }
    ensure(violations > 0, || {
        "no violation among infeasible pairs".into()
    })?;
    Ok(format!(
        "{n} feasible pairs ordered; {violations} violations among infeasible pairs"
    ))
}

/// Feasibility, idempotence, identity on feasible input, pairwise differences.
pub fn shift_all_properties(seed: u64, n: usize) -> Outcome {
    let mut r = rng(seed);
    for _ in 0..n {
        let k = r.random_range(2..=8);
        let u = random_vec(&mut r, k);
        let eps = if r.random_bool(0.5) {
            0.0
        } else {
            r.random_range(0.0..0.5)
        };
        let d = shift_all(&sdf(u.clone()), eps).unwrap();
        let dv = d.as_slice();
        ensure(pairwise_feasible(dv, eps), || {
            format!("infeasible output for {u:?} eps {eps}")
        })?;
        let again = shift_all(&d, eps).unwrap();
        ensure(again.as_slice() == dv, || {
            format!("not idempotent at {u:?}")
        })?;
        if pairwise_feasible(&u, eps) {
            ensure(
                dv.iter().zip(&u).all(|(a, b)| a.to_bits() == b.to_bits()),
                || format!("moved {u:?}"),
            )?;
        }
        for a in 0..k {
            for b in 0..k {
                let drift = ((dv[a] - dv[b]) - (u[a] - u[b])).abs();
                ensure(drift <= 1e-12, || {
                    format!("difference drift {drift} at {u:?}")
                })?;
            }
        }
    }
    Ok(format!("{n} vectors"))
}

pub struct QpStats {
    pub max_oracle_gap: f64,
    pub max_kkt: f64,
    pub max_k2_gap: f64,
}

/// Solver vs brute-force oracle, KKT residuals, objective vs Shift-All, K = 2 exactness.
pub fn qp_correctness(seed: u64, n_per_k: usize) -> Result<QpStats, String> {
    let mut r = rng(seed);
    let mut stats = QpStats {
        max_oracle_gap: 0.0,
        max_kkt: 0.0,
        max_k2_gap: 0.0,
    };
    for k in 2..=6 {
        for _ in 0..n_per_k {
            let u = sdf(random_vec(&mut r, k));
            let eps = if r.random_bool(0.5) {
                0.0
            } else {
                r.random_range(0.0..0.5)
            };
            let sol = project_qp(&u, eps).map_err(|e| format!("{u:?}: {e}"))?;
            let oracle = brute_force_project(&u, eps).unwrap();
            let gap = dist(sol.d.as_slice(), oracle.as_slice());
            let kkt = kkt_residuals(&u, &sol, eps);
            let worst = kkt
                .primal
                .max(kkt.stationarity)
                .max(kkt.dual)
                .max(kkt.complementarity);
            let sa = shift_all(&u, eps).unwrap();
            let sa_obj = dist(sa.as_slice(), u.as_slice()).powi(2);
            ensure(gap <= 1e-8, || {
                format!("oracle gap {gap:e} at {u:?} eps {eps}")
            })?;
            ensure(worst <= 1e-8, || format!("kkt residual {worst:e} at {u:?}"))?;
            ensure(sol.objective <= sa_obj + 1e-12, || {
                format!("objective above shift-all at {u:?}")
            })?;
            if k == 2 {
                let g = dist(sol.d.as_slice(), sa.as_slice());
                ensure(g <= 1e-12, || format!("K=2 gap {g:e} at {u:?}"))?;
                stats.max_k2_gap = stats.max_k2_gap.max(g);
            }
            stats.max_oracle_gap = stats.max_oracle_gap.max(gap);
            stats.max_kkt = stats.max_kkt.max(worst);
        }
    }
    Ok(stats)
}

/// The worked three-object case, by the oracle and by the solver.
pub fn hand_case() -> Outcome {
    let u = sdf(vec![-2.0, -1.0, 0.0]);
    let want = [-1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
    let oracle = brute_force_project(&u, 0.0).unwrap();
    ensure(dist(oracle.as_slice(), &want) <= 1e-12, || {
        format!("oracle gives {oracle:?}")
    })?;
    let sol = project_qp(&u, 0.0).unwrap();
    ensure(dist(sol.d.as_slice(), &want) <= 1e-12, || {
        format!("solver gives {:?}", sol.d)
    })?;
    ensure(sol.active == vec![(0, 1), (0, 2)], || {
        format!("active set {:?}", sol.active)
    })?;
    Ok("[-2,-1,0] -> [-1/3,1/3,1/3]".into())
}
