//! Multi-object distance fields: vector-valued signed distance grids whose lattice
//! vectors satisfy `min1 + min2 >= eps`, the projections that enforce it, per-object
//! marching cubes, and the metrics used to check that the resulting meshes do not
//! intersect.

pub mod demo;
pub mod error;
pub mod field;
pub mod meshing;
pub mod metrics;
pub mod projection;
pub mod qp;
pub mod vec3;

pub use error::{MdfError, Result};
pub use field::{
    check_mdf, eval_scene, intersection_loss, intersection_penalty, min1_min2, sample_grid,
    AnalyticScene, ConstraintReport, GridSpec, Primitive, SampledMdfGrid, SceneObject, SdfVector,
};
pub use meshing::{
    edge_crossings, extract_all, marching_cubes, CrossingSign, EdgeCrossing, TriangleMesh,
};
pub use projection::{project_grid, project_k2, shift_all, Method};
pub use qp::{brute_force_project, kkt_residuals, project_qp, QpSolution};
pub use vec3::Vec3;
