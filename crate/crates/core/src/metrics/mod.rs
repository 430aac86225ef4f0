//! Mesh comparison metrics: chamfer distance and normal consistency from point-to-mesh
//! matches, F1 at a distance threshold, voxel IoU and voxel intersection volume.

mod bvh;
mod report;
mod sampling;

pub use bvh::{
    brute_force_distance, closest_on_triangle, point_in_mesh, point_to_mesh, ClosestPoint, MeshBvh,
    DEFAULT_LEAF_SIZE,
};
pub use report::{evaluate, union_bbox_volume, EvalReport, ObjectMetrics};
pub use sampling::{sample_surface, SurfaceSamples};

use crate::error::{invalid, MdfError, Result};
use crate::meshing::TriangleMesh;
use crate::vec3::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_VOXEL_RES: usize = 256;
pub const DEFAULT_TAU: f64 = 0.01;
pub const DEFAULT_SEED: u64 = 0;

/// Everything a metric run depends on besides its input meshes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub n_samples: usize,
    pub tau: f64,
    pub voxel_res: usize,
    pub seed: u64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            tau: DEFAULT_TAU,
            voxel_res: DEFAULT_VOXEL_RES,
            seed: DEFAULT_SEED,
        }
    }
}

/// Summary of a prediction-vs-reference comparison plus intersection volume among the
/// predicted objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mcd: f64,
    pub mnc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
    /// Scene units cubed.
    pub iv_abs: f64,
    /// `iv_abs` divided by the reference bounding-box volume.
    pub iv_norm: f64,
    pub parameters: MetricParams,
}

/// Seed used for the second mesh's samples when only one seed is given.
#[inline]
pub(crate) fn second_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Squared distances and normal agreement of samples on one mesh against another.
struct Matches {
    dist2: Vec<f64>,
    cos_abs: Vec<f64>,
}

fn match_samples(samples: &SurfaceSamples, target: &MeshBvh) -> Matches {
    let (dist2, cos_abs) = samples
        .points
        .par_iter()
        .zip(&samples.normals)
        .map(|(&p, &n)| {
            let c = target.closest(p);
            (c.distance * c.distance, n.dot(c.normal).abs().min(1.0))
        })
        .unzip();
    Matches { dist2, cos_abs }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Chamfer, normal consistency and F1 between two meshes, from one set of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceComparison {
    pub mcd: f64,
    pub mnc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Compares `m1` (prediction) against `m2` (reference). Samples on `m1` use `seeds.0`,
/// samples on `m2` use `seeds.1`.
pub fn compare_surfaces(
    m1: &TriangleMesh,
    m2: &TriangleMesh,
    n: usize,
    tau: f64,
    seeds: (u64, u64),
) -> Result<SurfaceComparison> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    if n == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let b1 = MeshBvh::new(m1)?;
    let b2 = MeshBvh::new(m2)?;
    let s1 = sample_surface(m1, b1.vertex_normals(), n, seeds.0)?;
    let s2 = sample_surface(m2, b2.vertex_normals(), n, seeds.1)?;
    let a = match_samples(&s1, &b2);
    let b = match_samples(&s2, &b1);
    let precision = a.dist2.iter().filter(|&&d| d.sqrt() < tau).count() as f64 / n as f64;
    let recall = b.dist2.iter().filter(|&&d| d.sqrt() < tau).count() as f64 / n as f64;
    Ok(SurfaceComparison {
        mcd: mean(&a.dist2) + mean(&b.dist2),
        mnc: 0.5 * (mean(&a.cos_abs) + mean(&b.cos_abs)),
        precision,
        recall,
        f1: harmonic(precision, recall),
    })
}

pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Mean squared point-to-mesh distance from samples of `m1` to `m2`, plus the reverse.
pub fn mesh_chamfer(m1: &TriangleMesh, m2: &TriangleMesh, n: usize, seed: u64) -> Result<f64> {
    mesh_chamfer_seeded(m1, m2, n, (seed, second_seed(seed)))
}

pub fn mesh_chamfer_seeded(
    m1: &TriangleMesh,
    m2: &TriangleMesh,
    n: usize,
    seeds: (u64, u64),
) -> Result<f64> {
    compare_surfaces(m1, m2, n, 1.0, seeds).map(|c| c.mcd)
}

/// Symmetrized mean absolute cosine between sample normals and the interpolated normal at
/// their nearest point on the other mesh.
pub fn mesh_normal_consistency(
    m1: &TriangleMesh,
    m2: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<f64> {
    compare_surfaces(m1, m2, n, 1.0, (seed, second_seed(seed))).map(|c| c.mnc)
}

/// `(precision, recall, f1)` at threshold `tau` (strictly closer than `tau` counts).
pub fn f1_score(
    m1: &TriangleMesh,
    m2: &TriangleMesh,
    tau: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    compare_surfaces(m1, m2, n, tau, (seed, second_seed(seed)))
        .map(|c| (c.precision, c.recall, c.f1))
}

/// Voxel-center occupancy of a closed mesh over `res^3` voxels spanning `[lo, hi]`.
/// Index order: x fastest, then y, then z.
fn occupancy(bvh: &MeshBvh, lo: Vec3, hi: Vec3, res: usize) -> Vec<bool> {
    let step = (hi - lo) / res as f64;
    let xs: Vec<f64> = (0..res).map(|i| lo.x + (i as f64 + 0.5) * step.x).collect();
    let mut out = vec![false; res * res * res];
    out.par_chunks_mut(res)
        .enumerate()
        .for_each_init(Vec::new, |hits, (col, flags)| {
            let (j, k) = (col % res, col / res);
            let y = lo.y + (j as f64 + 0.5) * step.y;
            let z = lo.z + (k as f64 + 0.5) * step.z;
            bvh.column_occupancy(y, z, &xs, hits, flags);
        });
    out
}

fn closed_bvh(mesh: &TriangleMesh, label: &str) -> Result<MeshBvh> {
    let bvh = MeshBvh::new(mesh)?;
    if !bvh.is_closed() {
        return Err(MdfError::OpenMesh(format!(
            "{label} (object {})",
            mesh.object_index
        )));
    }
    Ok(bvh)
}

fn check_res(res: usize) -> Result<()> {
    if res == 0 {
        Err(invalid("voxel resolution must be positive"))
    } else {
        Ok(())
    }
}

/// Volumetric IoU on a `res^3` voxel grid over the union bounding box.
pub fn mesh_iou(m1: &TriangleMesh, m2: &TriangleMesh, res: usize) -> Result<f64> {
    check_res(res)?;
    let b1 = closed_bvh(m1, "m1")?;
    let b2 = closed_bvh(m2, "m2")?;
    let (l1, h1) = b1.bounds();
    let (l2, h2) = b2.bounds();
    let (lo, hi) = (l1.min(l2), h1.max(h2));
    let o1 = occupancy(&b1, lo, hi, res);
    let o2 = occupancy(&b2, lo, hi, res);
    let (mut inter, mut union) = (0usize, 0usize);
    for (a, b) in o1.iter().zip(&o2) {
        inter += usize::from(*a && *b);
        union += usize::from(*a || *b);
    }
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

/// Voxelized `vol(m1 ∩ m2)` on a `res^3` grid over the intersection of the two bounding
/// boxes, in absolute units. Disjoint boxes (or an empty mesh) give exactly 0.
pub fn intersection_volume(m1: &TriangleMesh, m2: &TriangleMesh, res: usize) -> Result<f64> {
    check_res(res)?;
    if m1.is_empty() || m2.is_empty() {
        return Ok(0.0);
    }
    let b1 = closed_bvh(m1, "m1")?;
    let b2 = closed_bvh(m2, "m2")?;
    let (l1, h1) = b1.bounds();
    let (l2, h2) = b2.bounds();
    let (lo, hi) = (l1.max(l2), h1.min(h2));
    if lo.x >= hi.x || lo.y >= hi.y || lo.z >= hi.z {
        return Ok(0.0);
    }
    let o1 = occupancy(&b1, lo, hi, res);
    let o2 = occupancy(&b2, lo, hi, res);
    let both = o1.iter().zip(&o2).filter(|(a, b)| **a && **b).count();
    let e = hi - lo;
    Ok(both as f64 * (e.x * e.y * e.z) / (res * res * res) as f64)
}

/// One entry per unordered pair of meshes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairIntersection {
    pub i: usize,
    pub j: usize,
    pub iv_abs: f64,
    pub iv_norm: f64,
}

/// Intersection volume of every pair of `meshes`, normalized by `reference_volume`.
pub fn pairwise_intersections(
    meshes: &[TriangleMesh],
    res: usize,
    reference_volume: f64,
) -> Result<Vec<PairIntersection>> {
    let mut out = Vec::new();
    for i in 0..meshes.len() {
        for j in i + 1..meshes.len() {
            let iv_abs = intersection_volume(&meshes[i], &meshes[j], res)?;
            out.push(PairIntersection {
                i,
                j,
                iv_abs,
                iv_norm: iv_abs / reference_volume,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(offset: f64) -> TriangleMesh {
        TriangleMesh::cuboid([offset, 0.0, 0.0], [offset + 1.0, 1.0, 1.0], 0)
    }

    fn square(z: f64) -> TriangleMesh {
        TriangleMesh::rectangle_z((0.0, 0.0), (1.0, 1.0), z, 0)
    }

    #[test]
    fn chamfer_identity_and_parallel_planes() {
        assert!(mesh_chamfer(&cube(0.0), &cube(0.0), 2000, 0).unwrap() <= 1e-12);
        let h = 0.1;
        let mcd = mesh_chamfer(&square(0.0), &square(h), 4000, 1).unwrap();
        assert!((mcd - 2.0 * h * h).abs() < 1e-12, "{mcd}");
    }

    #[test]
    fn normal_consistency_cases() {
        assert!(
            (mesh_normal_consistency(&cube(0.0), &cube(0.0), 2000, 0).unwrap() - 1.0).abs() < 1e-6
        );
        let flipped = square(0.0).flipped();
        assert!(
            (mesh_normal_consistency(&square(0.0), &flipped, 2000, 0).unwrap() - 1.0).abs() < 1e-12
        );
        // plane x = 0 against plane z = 0: normals perpendicular
        let wall = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 1.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            1,
        )
        .unwrap();
        assert!(mesh_normal_consistency(&square(0.0), &wall, 2000, 0).unwrap() < 1e-12);
    }

    #[test]
    fn f1_cases() {
        assert_eq!(
            f1_score(&cube(0.0), &cube(0.0), 0.01, 1000, 0).unwrap(),
            (1.0, 1.0, 1.0)
        );
        let tau = 0.05;
        assert_eq!(
            f1_score(&square(0.0), &square(2.0 * tau), tau, 1000, 0).unwrap(),
            (0.0, 0.0, 0.0)
        );
        assert!(f1_score(&square(0.0), &square(0.0), 0.0, 10, 0).is_err());
        assert!(f1_score(&square(0.0), &square(0.0), -1.0, 10, 0).is_err());
    }

    #[test]
    fn half_coverage_recall() {
        // m2 = two equal-area patches far apart, m1 = one of them
        let near = square(0.0);
        let far = TriangleMesh::rectangle_z((10.0, 0.0), (11.0, 1.0), 0.0, 0);
        let m2 = TriangleMesh::merged(&[near.clone(), far], 0);
        let (p, r, f1) = f1_score(&near, &m2, 0.01, 20_000, 5).unwrap();
        assert_eq!(p, 1.0);
        assert!((r - 0.5).abs() < 0.02, "{r}");
        assert!((f1 - 2.0 * p * r / (p + r)).abs() < 1e-15);
    }

    #[test]
    fn empty_inputs_error() {
        let e = TriangleMesh::default();
        assert!(mesh_chamfer(&e, &cube(0.0), 10, 0).is_err());
        assert!(mesh_iou(&e, &cube(0.0), 8).is_err());
        assert_eq!(intersection_volume(&e, &cube(0.0), 8).unwrap(), 0.0);
    }

    #[test]
    fn iou_cases() {
        assert_eq!(mesh_iou(&cube(0.0), &cube(0.0), 32).unwrap(), 1.0);
        let iou = mesh_iou(&cube(0.0), &cube(0.5), 128).unwrap();
        assert!((iou - 1.0 / 3.0).abs() <= 0.02 / 3.0, "{iou}");
        let far = cube(3.0);
        assert_eq!(mesh_iou(&cube(0.0), &far, 32).unwrap(), 0.0);
        assert!(matches!(
            mesh_iou(&square(0.0), &cube(0.0), 8),
            Err(MdfError::OpenMesh(_))
        ));
    }

    #[test]
    fn intersection_volume_cases() {
        let full = intersection_volume(&cube(0.0), &cube(0.0), 128).unwrap();
        assert!((full - 1.0).abs() <= 0.01, "{full}");
        let half = intersection_volume(&cube(0.0), &cube(0.5), 128).unwrap();
        assert!((half - 0.5).abs() <= 0.01, "{half}");
        assert_eq!(
            intersection_volume(&cube(0.0), &cube(2.0), 128).unwrap(),
            0.0
        );
        assert!(intersection_volume(&square(0.0), &cube(0.0), 8).is_err());
    }
}
