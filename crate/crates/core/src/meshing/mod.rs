//! Per-channel marching cubes and the edge-crossing analysis behind the
//! intersection-free meshing guarantee.
//!
//! Vertices are placed only by linear interpolation along lattice edges, so a grid whose
//! lattice vectors all satisfy the MDF constraint yields surfaces that can touch but not
//! cross along any lattice edge (see [`edge_crossings`]).

mod io;
mod mesh;
mod tables;

pub use io::{load_obj, read_obj, save_obj, write_obj, write_ply};
pub use mesh::TriangleMesh;

use crate::error::{invalid, Result};
use crate::field::{SampledMdfGrid, SdfVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tables::{CORNERS, EDGES, TRI_TABLE};

/// Output of [`marching_cubes_tagged`]: the mesh plus provenance for every element.
#[derive(Debug, Clone)]
pub struct TaggedMesh {
    pub mesh: TriangleMesh,
    /// Linear cell index `(i, j, k)` -> `i + (nx-1) * (j + (ny-1) * k)` of each triangle.
    pub triangle_cells: Vec<usize>,
    /// Lattice endpoints `(a, b)` (linear point indices) of the edge generating each vertex.
    pub vertex_edges: Vec<(usize, usize)>,
}

const UNSET: u32 = u32::MAX;

/// Marching cubes over channel `channel` at level `iso`.
pub fn marching_cubes(grid: &SampledMdfGrid, channel: usize, iso: f64) -> Result<TriangleMesh> {
    marching_cubes_tagged(grid, channel, iso).map(|t| t.mesh)
}

/// As [`marching_cubes`], also reporting which cell and lattice edge produced what.
///
/// Cells are visited with x fastest, then y, then z, and vertices are numbered on first
/// use, so the output is deterministic. Lattice values exactly equal to `iso` count as
/// inside.
pub fn marching_cubes_tagged(
    grid: &SampledMdfGrid,
    channel: usize,
    iso: f64,
) -> Result<TaggedMesh> {
    if channel >= grid.channels() {
        return Err(invalid(format!(
            "channel {channel} out of range for a grid with {} channels",
            grid.channels()
        )));
    }
    if !iso.is_finite() {
        return Err(invalid("iso level must be finite"));
    }
    let spec = grid.spec();
    let [nx, ny, nz] = spec.dims;
    let values = grid.channel(channel);
    let n = spec.num_points();

    let mut edge_vertex = vec![UNSET; 3 * n];
    let mut vertices = Vec::new();
    let mut vertex_edges = Vec::new();
    let mut triangles = Vec::new();
    let mut triangle_cells = Vec::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut ids = [0usize; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    let id = spec.linear(i + off[0], j + off[1], k + off[2]);
                    ids[c] = id;
                    if values[id] <= iso {
                        case |= 1 << c;
                    }
                }
                let row = &TRI_TABLE[case];
                if row[0] < 0 {
                    continue;
                }
                let cell = i + (nx - 1) * (j + (ny - 1) * k);
                let mut local = [UNSET; 12];
                for tri in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
                    let mut t = [0u32; 3];
                    for (slot, &e) in t.iter_mut().zip(tri) {
                        let e = e as usize;
                        if local[e] == UNSET {
                            let (ca, cb) = EDGES[e];
                            let (a, b) = if ids[ca] < ids[cb] {
                                (ids[ca], ids[cb])
                            } else {
                                (ids[cb], ids[ca])
                            };
                            let axis = match b - a {
                                1 => 0,
                                d if d == nx => 1,
                                _ => 2,
                            };
                            let key = 3 * a + axis;
                            if edge_vertex[key] == UNSET {
                                let (va, vb) = (values[a], values[b]);
                                let t = ((iso - va) / (vb - va)).clamp(0.0, 1.0);
                                let (ia, ja, ka) = spec.unlinear(a);
                                let (ib, jb, kb) = spec.unlinear(b);
                                let pa = spec.point(ia, ja, ka);
                                let pb = spec.point(ib, jb, kb);
                                edge_vertex[key] = vertices.len() as u32;
                                vertices.push(pa + (pb - pa) * t);
                                vertex_edges.push((a, b));
                            }
                            local[e] = edge_vertex[key];
                        }
                        *slot = local[e];
                    }
                    triangles.push(orient(t));
                    triangle_cells.push(cell);
                }
            }
        }
    }

    Ok(TaggedMesh {
        mesh: TriangleMesh::from_parts_unchecked(vertices, triangles, channel),
        triangle_cells,
        vertex_edges,
    })
}

/// The table winds triangles clockwise seen from outside; flip to outward normals.
#[inline]
fn orient(t: [u32; 3]) -> [u32; 3] {
    [t[0], t[2], t[1]]
}

/// One mesh per channel, in channel order.
pub fn extract_all(grid: &SampledMdfGrid) -> Vec<TriangleMesh> {
    (0..grid.channels())
        .into_par_iter()
        .map(|c| marching_cubes(grid, c, 0.0).expect("channel index is in range"))
        .collect()
}

/// Direction of travel through a surface when moving from `u1` toward `u2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingSign {
    /// Field goes from positive (or zero) to negative (or zero): moving into the object.
    Entering,
    Exiting,
}

/// Zero crossing of one channel along the segment from `u1` (`alpha = 0`) to `u2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCrossing {
    pub object_index: usize,
    pub alpha: f64,
    pub sign: CrossingSign,
}

/// Zero crossings of every channel's linear interpolant between `u1` and `u2`.
///
/// A strict sign change at `p, q` gives `alpha = -p / (q - p)`. An exact zero at one
/// endpoint places the crossing at that endpoint. A channel that is zero at both
/// endpoints lies on the segment and produces no crossing. Exact zeros are kept as they
/// are; no nudging happens here.
pub fn edge_crossings(u1: &SdfVector, u2: &SdfVector) -> Result<Vec<EdgeCrossing>> {
    if u1.len() != u2.len() {
        return Err(invalid(format!(
            "edge endpoints have different K ({} vs {})",
            u1.len(),
            u2.len()
        )));
    }
    let mut out = Vec::new();
    for (object_index, (&p, &q)) in u1.as_slice().iter().zip(u2.as_slice()).enumerate() {
        let crossing = if p == 0.0 && q == 0.0 {
            None
        } else if p == 0.0 {
            Some((
                0.0,
                if q < 0.0 {
                    CrossingSign::Entering
                } else {
                    CrossingSign::Exiting
                },
            ))
        } else if q == 0.0 {
            Some((
                1.0,
                if p > 0.0 {
                    CrossingSign::Entering
                } else {
                    CrossingSign::Exiting
                },
            ))
        } else if (p < 0.0) != (q < 0.0) {
            let sign = if p > 0.0 {
                CrossingSign::Entering
            } else {
                CrossingSign::Exiting
            };
            Some((-p / (q - p), sign))
        } else {
            None
        };
        if let Some((alpha, sign)) = crossing {
            out.push(EdgeCrossing {
                object_index,
                alpha,
                sign,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_grid, AnalyticScene, GridSpec, Primitive, SceneObject};
    use crate::vec3::Vec3;

    fn v(x: &[f64]) -> SdfVector {
        SdfVector::new(x.to_vec()).unwrap()
    }

    fn single_sphere_grid(r: f64, n: usize) -> SampledMdfGrid {
        let scene = AnalyticScene::new(vec![SceneObject::new(
            "s",
            vec![Primitive::sphere([0.0; 3], r)],
        )])
        .unwrap();
        sample_grid(&scene, &GridSpec::new([n; 3], [-1.0; 3], [1.0; 3]).unwrap()).unwrap()
    }

    #[test]
    fn crossing_examples() {
        let c = edge_crossings(&v(&[-1.0, 3.0]), &v(&[2.0, -1.0])).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(
            (c[0].object_index, c[0].alpha, c[0].sign),
            (0, 1.0 / 3.0, CrossingSign::Exiting)
        );
        assert_eq!(
            (c[1].object_index, c[1].alpha, c[1].sign),
            (1, 0.75, CrossingSign::Entering)
        );
        assert!(c[0].alpha <= c[1].alpha);

        assert!(edge_crossings(&v(&[1.0, 2.0]), &v(&[3.0, 4.0]))
            .unwrap()
            .is_empty());

        let c = edge_crossings(&v(&[0.0, 1.0]), &v(&[2.0, 3.0])).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].object_index, c[0].alpha), (0, 0.0));

        assert!(edge_crossings(&v(&[0.0, 1.0]), &v(&[0.0, 2.0]))
            .unwrap()
            .is_empty());
        assert!(edge_crossings(&v(&[0.0, 1.0]), &v(&[0.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn single_negative_point_gives_closed_octahedron() {
        let spec = GridSpec::new([3, 3, 3], [-1.0; 3], [1.0; 3]).unwrap();
        let mut data = vec![1.0; 27];
        data[spec.linear(1, 1, 1)] = -1.0;
        let g = SampledMdfGrid::new(spec, 1, data).unwrap();
        let m = marching_cubes(&g, 0, 0.0).unwrap();
        assert_eq!(m.vertices.len(), 6);
        assert_eq!(m.triangles.len(), 8);
        assert!(m.is_closed());
        // octahedron with vertices at distance 0.5: volume 4/3 * 0.5^3
        assert!(
            (m.volume() - 4.0 / 3.0 * 0.125).abs() < 1e-12,
            "{}",
            m.volume()
        );
    }

    #[test]
    fn all_positive_channel_is_empty() {
        let spec = GridSpec::new([4, 4, 4], [-1.0; 3], [1.0; 3]).unwrap();
        let g = SampledMdfGrid::new(spec, 1, vec![0.5; 64]).unwrap();
        assert!(marching_cubes(&g, 0, 0.0).unwrap().is_empty());
        assert!(marching_cubes(&g, 1, 0.0).is_err());
    }

    #[test]
    fn sphere_volume_and_closure() {
        let g = single_sphere_grid(0.8, 64);
        let m = marching_cubes(&g, 0, 0.0).unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.8f64.powi(3);
        assert!(m.is_closed());
        assert!(
            ((m.volume() - exact) / exact).abs() < 0.02,
            "{} vs {exact}",
            m.volume()
        );
        assert!(m.volume() > 0.0);
    }

    #[test]
    fn vertices_interpolate_to_zero() {
        let g = single_sphere_grid(0.55, 20);
        let tagged = marching_cubes_tagged(&g, 0, 0.0).unwrap();
        let vals = g.channel(0);
        let spec = g.spec();
        for (vtx, &(a, b)) in tagged.mesh.vertices.iter().zip(&tagged.vertex_edges) {
            let (ia, ja, ka) = spec.unlinear(a);
            let (ib, jb, kb) = spec.unlinear(b);
            let pa = spec.point(ia, ja, ka);
            let pb = spec.point(ib, jb, kb);
            let t = (*vtx - pa).norm() / (pb - pa).norm();
            let value = vals[a] + t * (vals[b] - vals[a]);
            assert!(value.abs() <= 1e-6, "{value}");
        }
    }

    #[test]
    fn zero_lattice_value_counts_as_inside() {
        let spec = GridSpec::new([3, 3, 3], [-1.0; 3], [1.0; 3]).unwrap();
        let mut data = vec![1.0; 27];
        data[spec.linear(1, 1, 1)] = 0.0;
        let g = SampledMdfGrid::new(spec, 1, data).unwrap();
        let m = marching_cubes(&g, 0, 0.0).unwrap();
        // surface collapses onto the lattice point; all vertices coincide with it
        assert!(!m.is_empty());
        for p in &m.vertices {
            assert!(p.norm() < 1e-15);
        }
        assert!(m
            .triangles
            .iter()
            .all(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2]));
    }

    #[test]
    fn extract_all_keeps_channel_order() {
        let scene = AnalyticScene::new(vec![
            SceneObject::new("far", vec![Primitive::sphere([5.0, 0.0, 0.0], 0.5)]),
            SceneObject::new("s", vec![Primitive::sphere([0.0; 3], 0.5)]),
        ])
        .unwrap();
        let g = sample_grid(
            &scene,
            &GridSpec::new([16; 3], [-1.0; 3], [1.0; 3]).unwrap(),
        )
        .unwrap();
        let meshes = extract_all(&g);
        assert_eq!(meshes.len(), 2);
        assert!(meshes[0].is_empty());
        assert!(!meshes[1].is_empty());
        assert_eq!(meshes[1].object_index, 1);
        let c = meshes[1].bounds().unwrap();
        assert!((c.0 + c.1).norm() < 1e-9 && (c.1 - Vec3::splat(0.5)).norm() < 0.05);
    }
}
