//! Built-in demo scenes and the sample → project → mesh → evaluate pipeline.
//!
//! Scene parameters are fixed here so that results are reproducible:
//!
//! | name          | objects | geometry                                                        | bbox                      |
//! |---------------|---------|-----------------------------------------------------------------|---------------------------|
//! | `two_spheres` | 2       | spheres r = 0.6 at (±0.4, 0, 0)                                  | [-1, 1]^3                 |
//! | `three_lobes` | 3       | spheres r = 0.5, centers 0.35 from the origin at 0°, 120°, 240° | [-1, 1]^3                 |
//! | `chain`       | 5       | spheres r = 0.25 at x = ±0.8, ±0.4; box half-extent 0.2 at 0    | [-1.2, 1.2] x [-0.5, 0.5]^2 |
//!
//! All grids are 64^3.

use crate::error::{invalid, MdfError, Result};
use crate::field::{
    intersection_penalty, sample_grid, AnalyticScene, GridSpec, Primitive, SampledMdfGrid,
    SceneObject,
};
use crate::meshing::{extract_all, marching_cubes_tagged, TriangleMesh};
use crate::metrics::{
    compare_surfaces, evaluate, mesh_chamfer_seeded, second_seed, EvalReport, MetricParams,
    SurfaceComparison,
};
use crate::projection::{count_infeasible, count_modified, project_grid, Method};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const DEMO_DIMS: [usize; 3] = [64, 64, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoScene {
    TwoSpheres,
    ThreeLobes,
    Chain,
}

impl DemoScene {
    pub const ALL: [DemoScene; 3] = [
        DemoScene::TwoSpheres,
        DemoScene::ThreeLobes,
        DemoScene::Chain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DemoScene::TwoSpheres => "two_spheres",
            DemoScene::ThreeLobes => "three_lobes",
            DemoScene::Chain => "chain",
        }
    }

    pub fn scene(self) -> AnalyticScene {
        let sphere =
            |name: &str, c: [f64; 3], r: f64| SceneObject::new(name, vec![Primitive::sphere(c, r)]);
        let objects = match self {
            DemoScene::TwoSpheres => vec![
                sphere("left", [-0.4, 0.0, 0.0], 0.6),
                sphere("right", [0.4, 0.0, 0.0], 0.6),
            ],
            DemoScene::ThreeLobes => (0..3)
                .map(|i| {
                    let a = i as f64 * 2.0 * std::f64::consts::PI / 3.0;
                    sphere(
                        &format!("lobe{i}"),
                        [0.35 * a.cos(), 0.35 * a.sin(), 0.0],
                        0.5,
                    )
                })
                .collect(),
            DemoScene::Chain => vec![
                sphere("s0", [-0.8, 0.0, 0.0], 0.25),
                sphere("s1", [-0.4, 0.0, 0.0], 0.25),
                SceneObject::new(
                    "box",
                    vec![Primitive::cuboid([0.0, 0.0, 0.0], [0.2, 0.2, 0.2])],
                ),
                sphere("s3", [0.4, 0.0, 0.0], 0.25),
                sphere("s4", [0.8, 0.0, 0.0], 0.25),
            ],
        };
        AnalyticScene::new(objects).expect("demo scenes are valid")
    }

    pub fn grid_spec(self) -> GridSpec {
        let (lo, hi) = match self {
            DemoScene::TwoSpheres | DemoScene::ThreeLobes => ([-1.0; 3], [1.0; 3]),
            DemoScene::Chain => ([-1.2, -0.5, -0.5], [1.2, 0.5, 0.5]),
        };
        GridSpec::new(DEMO_DIMS, lo, hi).expect("demo grid is valid")
    }
}

impl FromStr for DemoScene {
    type Err = MdfError;

    fn from_str(s: &str) -> Result<Self> {
        DemoScene::ALL
            .into_iter()
            .find(|d| d.name() == s || d.name().replace('_', "-") == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown demo '{s}' (expected two_spheres, three_lobes or chain)"
                ))
            })
    }
}

impl fmt::Display for DemoScene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoMode {
    Vanilla,
    ShiftAll,
    Qp,
}

impl DemoMode {
    pub fn method(self) -> Option<Method> {
        match self {
            DemoMode::Vanilla => None,
            DemoMode::ShiftAll => Some(Method::ShiftAll),
            DemoMode::Qp => Some(Method::Qp),
        }
    }
}

impl FromStr for DemoMode {
    type Err = MdfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(DemoMode::Vanilla),
            other => other
                .parse::<Method>()
                .map(|m| match m {
                    Method::ShiftAll => DemoMode::ShiftAll,
                    Method::Qp => DemoMode::Qp,
                })
                .map_err(|_| {
                    invalid(format!(
                        "unknown mode '{s}' (expected vanilla, shift_all or qp)"
                    ))
                }),
        }
    }
}

impl fmt::Display for DemoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DemoMode::Vanilla => "vanilla",
            DemoMode::ShiftAll => "shift_all",
            DemoMode::Qp => "qp",
        })
    }
}

/// Projected meshes against the vanilla meshes of the same scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanillaComparison {
    pub object: usize,
    /// Whole-mesh comparison.
    pub whole: SurfaceComparison,
    /// Chamfer distance between the sub-meshes from cells whose eight corners the
    /// projection left untouched; `None` if no such triangles exist.
    pub restricted_mcd: Option<f64>,
    pub restricted_triangles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub scene: DemoScene,
    pub mode: DemoMode,
    pub eps: f64,
    pub dims: [usize; 3],
    pub num_objects: usize,
    pub bbox_volume: f64,
    /// Lattice points violating `min1 + min2 >= eps`, before and after projection.
    pub infeasible_before: usize,
    pub infeasible_after: usize,
    pub modified_points: usize,
    pub penalty_before: f64,
    pub penalty_after: f64,
    pub triangles: Vec<usize>,
    pub closed: Vec<bool>,
    pub eval: EvalReport,
    pub vs_vanilla: Vec<VanillaComparison>,
}

/// Everything a demo run produced.
#[derive(Debug, Clone)]
pub struct DemoRun {
    pub report: DemoReport,
    pub vanilla_grid: SampledMdfGrid,
    pub grid: SampledMdfGrid,
    pub vanilla_meshes: Vec<TriangleMesh>,
    pub meshes: Vec<TriangleMesh>,
}

/// Runs the full pipeline for one demo scene.
///
/// With `compare` set, projected meshes are also compared against the vanilla meshes of
/// the same grid, both whole and restricted to cells the projection did not touch.
pub fn run_demo(
    scene: DemoScene,
    mode: DemoMode,
    eps: f64,
    params: &MetricParams,
    compare: bool,
) -> Result<DemoRun> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(invalid(format!("eps must be finite and >= 0, got {eps}")));
    }
    let spec = scene.grid_spec();
    let vanilla_grid = sample_grid(&scene.scene(), &spec)?;
    let grid = match mode.method() {
        Some(m) => project_grid(&vanilla_grid, m, eps)?,
        None => vanilla_grid.clone(),
    };
    log::info!("{scene}/{mode}: grid ready");

    let meshes = extract_all(&grid);
    let vanilla_meshes = if mode == DemoMode::Vanilla {
        meshes.clone()
    } else {
        extract_all(&vanilla_grid)
    };
    let eval = evaluate(&meshes, None, params, Some(spec.bbox_volume()))?;

    let vs_vanilla = if compare && mode != DemoMode::Vanilla {
        compare_to_vanilla(&vanilla_grid, &grid, &meshes, &vanilla_meshes, params)?
    } else {
        Vec::new()
    };

    let report = DemoReport {
        scene,
        mode,
        eps,
        dims: spec.dims,
        num_objects: grid.channels(),
        bbox_volume: spec.bbox_volume(),
        infeasible_before: count_infeasible(&vanilla_grid, eps),
        infeasible_after: count_infeasible(&grid, eps),
        modified_points: count_modified(&vanilla_grid, &grid),
        penalty_before: intersection_penalty(&vanilla_grid)?,
        penalty_after: intersection_penalty(&grid)?,
        triangles: meshes.iter().map(|m| m.triangles.len()).collect(),
        closed: meshes.iter().map(TriangleMesh::is_closed).collect(),
        eval,
        vs_vanilla,
    };
    Ok(DemoRun {
        report,
        vanilla_grid,
        grid,
        vanilla_meshes,
        meshes,
    })
}

/// Mask over cells: true when none of the eight corners changed between the grids.
pub fn untouched_cells(a: &SampledMdfGrid, b: &SampledMdfGrid) -> Vec<bool> {
    let spec = a.spec();
    let n = spec.num_points();
    let k = a.channels();
    let changed: Vec<bool> = (0..n)
        .map(|p| (0..k).any(|c| a.data()[c * n + p].to_bits() != b.data()[c * n + p].to_bits()))
        .collect();
    let [nx, ny, nz] = spec.dims;
    let mut out = Vec::with_capacity(spec.num_cells());
    for kk in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut ok = true;
                for (di, dj, dk) in (0..8).map(|c| (c & 1, (c >> 1) & 1, c >> 2)) {
                    ok &= !changed[spec.linear(i + di, j + dj, kk + dk)];
                }
                out.push(ok);
            }
        }
    }
    out
}

fn compare_to_vanilla(
    vanilla_grid: &SampledMdfGrid,
    grid: &SampledMdfGrid,
    meshes: &[TriangleMesh],
    vanilla_meshes: &[TriangleMesh],
    params: &MetricParams,
) -> Result<Vec<VanillaComparison>> {
    let keep = untouched_cells(vanilla_grid, grid);
    let mut out = Vec::new();
    for (c, (m, v)) in meshes.iter().zip(vanilla_meshes).enumerate() {
        let seeds = (params.seed, second_seed(params.seed));
        let whole = compare_surfaces(m, v, params.n_samples, params.tau, seeds)?;
        let restrict = |g: &SampledMdfGrid| -> Result<TriangleMesh> {
            let tagged = marching_cubes_tagged(g, c, 0.0)?;
            Ok(tagged
                .mesh
                .retain_triangles(|t| keep[tagged.triangle_cells[t]]))
        };
        let (rm, rv) = (restrict(grid)?, restrict(vanilla_grid)?);
        let restricted_mcd = if rm.is_empty() || rv.is_empty() {
            None
        } else {
            Some(mesh_chamfer_seeded(&rm, &rv, params.n_samples, seeds)?)
        };
        out.push(VanillaComparison {
            object: c,
            whole,
            restricted_mcd,
            restricted_triangles: rm.triangles.len(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for d in DemoScene::ALL {
            assert_eq!(d.name().parse::<DemoScene>().unwrap(), d);
        }
        assert!("four_lobes".parse::<DemoScene>().is_err());
        assert_eq!("shift-all".parse::<DemoMode>().unwrap(), DemoMode::ShiftAll);
        assert_eq!("vanilla".parse::<DemoMode>().unwrap(), DemoMode::Vanilla);
        assert!("newton".parse::<DemoMode>().is_err());
    }

    #[test]
    fn boundary_lattice_values_are_positive() {
        for d in DemoScene::ALL {
            let spec = d.grid_spec();
            let g = sample_grid(&d.scene(), &spec).unwrap();
            let [nx, ny, nz] = spec.dims;
            for idx in 0..spec.num_points() {
                let (i, j, k) = spec.unlinear(idx);
                let on_face =
                    i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1;
                if on_face {
                    assert!(
                        g.vector_at(idx).iter().all(|&v| v > 0.0),
                        "{d} at {:?}",
                        (i, j, k)
                    );
                }
            }
        }
    }

    #[test]
    fn untouched_mask_marks_neighbours_of_changes() {
        let spec = GridSpec::new([3, 3, 3], [0.0; 3], [1.0; 3]).unwrap();
        let a = SampledMdfGrid::new(spec, 1, vec![1.0; 27]).unwrap();
        let mut b = a.clone();
        b.set_vector(spec.linear(0, 0, 0), &[2.0]).unwrap();
        let mask = untouched_cells(&a, &b);
        assert_eq!(mask.iter().filter(|&&x| !x).count(), 1);
        assert!(!mask[0]);
    }
}
