use crate::error::{invalid, Result};
use crate::vec3::Vec3;
use std::collections::HashMap;

/// Indexed triangle surface of one object.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub object_index: usize,
}

impl TriangleMesh {
    /// Checks index ranges and rejects triangles repeating a vertex index.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, object_index: usize) -> Result<Self> {
        let n = vertices.len();
        if let Some(v) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("vertex {v} is not finite")));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= n) {
                return Err(invalid(format!(
                    "triangle {t} references a vertex out of range"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(invalid(format!("triangle {t} repeats a vertex index")));
            }
        }
        Ok(Self {
            vertices,
            triangles,
            object_index,
        })
    }

    pub(crate) fn from_parts_unchecked(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        object_index: usize,
    ) -> Self {
        Self {
            vertices,
            triangles,
            object_index,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Area-weighted face normal direction (length = 2 * area).
    #[inline]
    pub fn face_cross(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(c - a)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| 0.5 * self.face_cross(t).norm())
            .sum()
    }

    /// Enclosed volume by the divergence theorem; positive for outward winding.
    pub fn volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(b.cross(c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Every undirected edge is shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let mut count: HashMap<(u32, u32), u32> =
            HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().all(|&c| c == 2)
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        if self.triangles.is_empty() {
            return None;
        }
        let mut lo = Vec3::splat(f64::INFINITY);
        let mut hi = Vec3::splat(f64::NEG_INFINITY);
        for tri in &self.triangles {
            for &i in tri {
                lo = lo.min(self.vertices[i as usize]);
                hi = hi.max(self.vertices[i as usize]);
            }
        }
        Some((lo, hi))
    }

    /// Area-weighted vertex normals; isolated or degenerate vertices get `+z`.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::ZERO; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let n = self.face_cross(t);
            for &i in tri {
                acc[i as usize] += n;
            }
        }
        acc.into_iter()
            .map(|n| n.normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0)))
            .collect()
    }

    /// Sub-mesh of the triangles for which `keep(t)` holds, with unused vertices dropped.
    pub fn retain_triangles(&self, mut keep: impl FnMut(usize) -> bool) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if !keep(t) {
                continue;
            }
            let mut out = [0u32; 3];
            for (slot, &i) in out.iter_mut().zip(tri) {
                if remap[i as usize] == u32::MAX {
                    remap[i as usize] = vertices.len() as u32;
                    vertices.push(self.vertices[i as usize]);
                }
                *slot = remap[i as usize];
            }
            triangles.push(out);
        }
        TriangleMesh {
            vertices,
            triangles,
            object_index: self.object_index,
        }
    }

    /// Same surface with every triangle's winding reversed.
    pub fn flipped(&self) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
            object_index: self.object_index,
        }
    }

    pub fn translated(&self, offset: Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
            triangles: self.triangles.clone(),
            object_index: self.object_index,
        }
    }

    /// Closed, outward-wound axis-aligned box with 12 triangles.
    pub fn cuboid(min: impl Into<Vec3>, max: impl Into<Vec3>, object_index: usize) -> TriangleMesh {
        let (lo, hi) = (min.into(), max.into());
        let vertices = (0..8)
            .map(|c| {
                Vec3::new(
                    if c & 1 != 0 { hi.x } else { lo.x },
                    if c & 2 != 0 { hi.y } else { lo.y },
                    if c & 4 != 0 { hi.z } else { lo.z },
                )
            })
            .collect();
        let quads: [[u32; 4]; 6] = [
            [0, 2, 3, 1], // z = lo
            [4, 5, 7, 6], // z = hi
            [0, 1, 5, 4], // y = lo
            [2, 6, 7, 3], // y = hi
            [0, 4, 6, 2], // x = lo
            [1, 3, 7, 5], // x = hi
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        TriangleMesh {
            vertices,
            triangles,
            object_index,
        }
    }

    /// Axis-aligned rectangle in the plane `z = z0`, normal `+z`, two triangles.
    pub fn rectangle_z(
        min_xy: (f64, f64),
        max_xy: (f64, f64),
        z0: f64,
        object_index: usize,
    ) -> TriangleMesh {
        let vertices = vec![
            Vec3::new(min_xy.0, min_xy.1, z0),
            Vec3::new(max_xy.0, min_xy.1, z0),
            Vec3::new(max_xy.0, max_xy.1, z0),
            Vec3::new(min_xy.0, max_xy.1, z0),
        ];
        TriangleMesh {
            vertices,
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            object_index,
        }
    }

    /// Concatenates several meshes into one (vertex indices are offset).
    pub fn merged(parts: &[TriangleMesh], object_index: usize) -> TriangleMesh {
        let mut out = TriangleMesh {
            object_index,
            ..Default::default()
        };
        for part in parts {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&part.vertices);
            out.triangles.extend(
                part.triangles
                    .iter()
                    .map(|t| [t[0] + base, t[1] + base, t[2] + base]),
            );
        }
        out
    }
}
