use super::{
    compare_surfaces, harmonic, mesh_iou, pairwise_intersections, second_seed, MetricParams,
    MetricReport, PairIntersection,
};
use crate::error::{invalid, Result};
use crate::meshing::TriangleMesh;
use serde::{Deserialize, Serialize};

/// Metrics of one predicted object against its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectMetrics {
    pub object: usize,
    pub mcd: f64,
    pub mnc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
}

/// Result of evaluating a set of predicted object meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Object-averaged comparison (f1 recomputed from the averaged precision and recall) plus total intersection volume; `None` without ground truth.
    pub summary: Option<MetricReport>,
    pub objects: Vec<ObjectMetrics>,
    pub pairs: Vec<PairIntersection>,
    pub iv_abs: f64,
    pub iv_norm: f64,
    /// Volume `iv_norm` is relative to.
    pub reference_volume: f64,
    pub parameters: MetricParams,
}

/// Bounding-box volume of all nonempty meshes together.
pub fn union_bbox_volume(meshes: &[TriangleMesh]) -> Option<f64> {
    let (lo, hi) = meshes
        .iter()
        .filter_map(TriangleMesh::bounds)
        .reduce(|(l1, h1), (l2, h2)| (l1.min(l2), h1.max(h2)))?;
    let e = hi - lo;
    Some(e.x * e.y * e.z)
}

/// Evaluates `pred` (object `k` at position `k`): pairwise intersection volume among the
/// predictions, and if `gt` is given, per-object surface and volume metrics against it.
///
/// `reference_volume` defaults to the union bounding box of the predictions.
pub fn evaluate(
    pred: &[TriangleMesh],
    gt: Option<&[TriangleMesh]>,
    params: &MetricParams,
    reference_volume: Option<f64>,
) -> Result<EvalReport> {
    let reference_volume = match reference_volume {
        Some(v) => v,
        None => union_bbox_volume(pred).unwrap_or(1.0),
    };
    if !(reference_volume.is_finite() && reference_volume > 0.0) {
        return Err(invalid(format!(
            "reference volume must be positive, got {reference_volume}"
        )));
    }
    let pairs = pairwise_intersections(pred, params.voxel_res, reference_volume)?;
    let iv_abs: f64 = pairs.iter().map(|p| p.iv_abs).sum();
    let iv_norm = iv_abs / reference_volume;

    let mut objects = Vec::new();
    let mut summary = None;
    if let Some(gt) = gt {
        if gt.len() != pred.len() {
            return Err(invalid(format!(
                "prediction has {} objects but ground truth has {}",
                pred.len(),
                gt.len()
            )));
        }
        for (k, (p, g)) in pred.iter().zip(gt).enumerate() {
            let seed = params.seed.wrapping_add(k as u64);
            let c = compare_surfaces(
                p,
                g,
                params.n_samples,
                params.tau,
                (seed, second_seed(seed)),
            )?;
            objects.push(ObjectMetrics {
                object: k,
                mcd: c.mcd,
                mnc: c.mnc,
                f1: c.f1,
                precision: c.precision,
                recall: c.recall,
                iou: mesh_iou(p, g, params.voxel_res)?,
            });
        }
        if !objects.is_empty() {
            let n = objects.len() as f64;
            let avg = |f: fn(&ObjectMetrics) -> f64| objects.iter().map(f).sum::<f64>() / n;
            let (precision, recall) = (avg(|o| o.precision), avg(|o| o.recall));
            summary = Some(MetricReport {
                mcd: avg(|o| o.mcd),
                mnc: avg(|o| o.mnc),
                f1: harmonic(precision, recall),
                precision,
                recall,
                iou: avg(|o| o.iou),
                iv_abs,
                iv_norm,
                parameters: *params,
            });
        }
    }
    Ok(EvalReport {
        summary,
        objects,
        pairs,
        iv_abs,
        iv_norm,
        reference_volume,
        parameters: *params,
    })
}
