//! Bounding-volume hierarchy over a triangle mesh: exact closest-point queries and
//! ray-parity inside tests.

use crate::error::{MdfError, Result};
use crate::meshing::TriangleMesh;
use crate::vec3::Vec3;

pub const DEFAULT_LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: `order[start..start + count]`. Interior: children at `start` and `start + 1`.
    start: u32,
    count: u32,
}

impl Node {
    #[inline]
    fn is_leaf(&self) -> bool {
        self.count > 0
    }

    #[inline]
    fn dist2(&self, p: Vec3) -> f64 {
        let d = (self.lo - p).max(Vec3::ZERO).max(p - self.hi);
        d.norm_squared()
    }
}

/// Closest point on a mesh to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub distance: f64,
    pub point: Vec3,
    /// Barycentric interpolation of vertex normals at `point`, normalized.
    pub normal: Vec3,
    pub triangle: usize,
}

/// Immutable AABB tree over the triangles of one mesh.
#[derive(Debug, Clone)]
pub struct MeshBvh {
    mesh: TriangleMesh,
    normals: Vec<Vec3>,
    nodes: Vec<Node>,
    order: Vec<u32>,
    closed: bool,
}

impl MeshBvh {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        Self::with_leaf_size(mesh, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(mesh: &TriangleMesh, leaf_size: usize) -> Result<Self> {
        if mesh.is_empty() {
            return Err(MdfError::EmptyMesh);
        }
        let leaf_size = leaf_size.max(1);
        let n = mesh.triangles.len();
        let boxes: Vec<(Vec3, Vec3)> = (0..n)
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                (a.min(b).min(c), a.max(b).max(c))
            })
            .collect();
        let centroids: Vec<Vec3> = boxes.iter().map(|(lo, hi)| (*lo + *hi) * 0.5).collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = vec![Node {
            lo: Vec3::ZERO,
            hi: Vec3::ZERO,
            start: 0,
            count: 0,
        }];
        build(&mut nodes, 0, &mut order, 0, &boxes, &centroids, leaf_size);
        Ok(Self {
            mesh: mesh.clone(),
            normals: mesh.vertex_normals(),
            nodes,
            order,
            closed: mesh.is_closed(),
        })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.nodes[0].lo, self.nodes[0].hi)
    }

    /// Exact nearest point over all triangles.
    pub fn closest(&self, p: Vec3) -> ClosestPoint {
        let mut best_d2 = f64::INFINITY;
        let mut best = (0usize, Vec3::ZERO, [1.0, 0.0, 0.0]);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.dist2(p) > best_d2 {
                continue;
            }
            if node.is_leaf() {
                for &t in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    let (q, bary) = closest_on_triangle(p, self.mesh.corners(t as usize));
                    let d2 = (q - p).norm_squared();
                    if d2 < best_d2 || (d2 == best_d2 && (t as usize) < best.0) {
                        best_d2 = d2;
                        best = (t as usize, q, bary);
                    }
                }
            } else {
                let (l, r) = (node.start as usize, node.start as usize + 1);
                let (dl, dr) = (self.nodes[l].dist2(p), self.nodes[r].dist2(p));
                // push the farther child first so the nearer one is visited next
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        let (triangle, point, bary) = best;
        ClosestPoint {
            distance: best_d2.sqrt(),
            point,
            normal: self.interpolated_normal(triangle, bary),
            triangle,
        }
    }

    pub(crate) fn interpolated_normal(&self, t: usize, bary: [f64; 3]) -> Vec3 {
        let tri = self.mesh.triangles[t];
        let n = self.normals[tri[0] as usize] * bary[0]
            + self.normals[tri[1] as usize] * bary[1]
            + self.normals[tri[2] as usize] * bary[2];
        n.normalized()
            .or_else(|| self.mesh.face_cross(t).normalized())
            .unwrap_or(Vec3::new(0.0, 0.0, 1.0))
    }

    /// x-coordinates where the ray `{(s, y, z)}` crosses the surface, unsorted.
    ///
    /// Containment in each triangle's yz-projection uses edge functions evaluated in a
    /// canonical vertex order, with ties broken by a symbolic perturbation of the ray.
    /// Edges shared by two triangles therefore count for exactly one of them.
    pub fn crossings_x(&self, y: f64, z: f64, out: &mut Vec<f64>) {
        out.clear();
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if y < node.lo.y || y > node.hi.y || z < node.lo.z || z > node.hi.z {
                continue;
            }
            if node.is_leaf() {
                for &t in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    if let Some(x) = self.ray_hit_x(t as usize, y, z) {
                        out.push(x);
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(node.start as usize + 1);
            }
        }
    }

    fn ray_hit_x(&self, t: usize, y: f64, z: f64) -> Option<f64> {
        let tri = self.mesh.triangles[t];
        let v = self.mesh.corners(t);
        let mut e = [0.0; 3];
        let mut s = [0i8; 3];
        for k in 0..3 {
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            // edge opposite vertex k, directed a -> b
            let (val, sign) = edge_function(tri[a], tri[b], v[a], v[b], y, z);
            e[k] = val;
            s[k] = sign;
        }
        if s[0] == 0 || s[0] != s[1] || s[1] != s[2] {
            return None;
        }
        let sum = e[0] + e[1] + e[2];
        if sum == 0.0 {
            return Some((v[0].x + v[1].x + v[2].x) / 3.0);
        }
        Some((e[0] * v[0].x + e[1] * v[1].x + e[2] * v[2].x) / sum)
    }

    /// Ray-parity inside test along `+x`. Points on the surface get a deterministic answer.
    pub fn contains(&self, p: Vec3) -> Result<bool> {
        if !self.closed {
            return Err(MdfError::OpenMesh(format!(
                "object {}",
                self.mesh.object_index
            )));
        }
        let (lo, hi) = self.bounds();
        if p.x < lo.x || p.y < lo.y || p.z < lo.z || p.x > hi.x || p.y > hi.y || p.z > hi.z {
            return Ok(false);
        }
        let mut hits = Vec::new();
        self.crossings_x(p.y, p.z, &mut hits);
        Ok(hits.iter().filter(|&&x| x > p.x).count() % 2 == 1)
    }

    /// Inside flags for points `(xs[i], y, z)`; `xs` must be sorted ascending.
    pub(crate) fn column_occupancy(
        &self,
        y: f64,
        z: f64,
        xs: &[f64],
        hits: &mut Vec<f64>,
        out: &mut [bool],
    ) {
        self.crossings_x(y, z, hits);
        hits.sort_unstable_by(f64::total_cmp);
        // number of hits <= x; inside when the count to the right is odd
        let mut below = 0;
        for (x, flag) in xs.iter().zip(out.iter_mut()) {
            while below < hits.len() && hits[below] <= *x {
                below += 1;
            }
            *flag = (hits.len() - below) % 2 == 1;
        }
    }
}

fn build(
    nodes: &mut Vec<Node>,
    ni: usize,
    order: &mut [u32],
    offset: usize,
    boxes: &[(Vec3, Vec3)],
    centroids: &[Vec3],
    leaf_size: usize,
) {
    let mut lo = Vec3::splat(f64::INFINITY);
    let mut hi = Vec3::splat(f64::NEG_INFINITY);
    let mut clo = lo;
    let mut chi = hi;
    for &t in order.iter() {
        let (a, b) = boxes[t as usize];
        lo = lo.min(a);
        hi = hi.max(b);
        clo = clo.min(centroids[t as usize]);
        chi = chi.max(centroids[t as usize]);
    }
    nodes[ni].lo = lo;
    nodes[ni].hi = hi;
    if order.len() <= leaf_size {
        nodes[ni].start = offset as u32;
        nodes[ni].count = order.len() as u32;
        return;
    }
    let ext = chi - clo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let left = nodes.len();
    nodes.push(Node {
        lo: Vec3::ZERO,
        hi: Vec3::ZERO,
        start: 0,
        count: 0,
    });
    nodes.push(Node {
        lo: Vec3::ZERO,
        hi: Vec3::ZERO,
        start: 0,
        count: 0,
    });
    nodes[ni].start = left as u32;
    nodes[ni].count = 0;
    let (l, r) = order.split_at_mut(mid);
    build(nodes, left, l, offset, boxes, centroids, leaf_size);
    build(
        nodes,
        left + 1,
        r,
        offset + mid,
        boxes,
        centroids,
        leaf_size,
    );
}

/// Edge function of the yz-projected edge `a -> b` at `(y, z)`, evaluated in canonical
/// (lower vertex index first) order so both triangles sharing the edge agree exactly.
/// Returns the value and its sign under the perturbation `(y + d, z + d^2)`.
#[inline]
fn edge_function(ia: u32, ib: u32, a: Vec3, b: Vec3, y: f64, z: f64) -> (f64, i8) {
    if ia > ib {
        let (v, s) = edge_function(ib, ia, b, a, y, z);
        return (-v, -s);
    }
    let (dy, dz) = (b.y - a.y, b.z - a.z);
    let val = dy * (z - a.z) - dz * (y - a.y);
    let sign = if val != 0.0 {
        if val > 0.0 {
            1
        } else {
            -1
        }
    } else if dz != 0.0 {
        if dz < 0.0 {
            1
        } else {
            -1
        }
    } else if dy != 0.0 {
        if dy > 0.0 {
            1
        } else {
            -1
        }
    } else {
        0
    };
    (val, sign)
}

/// Closest point on triangle `abc` to `p` and its barycentric coordinates; handles
/// vertex, edge and face regions.
pub fn closest_on_triangle(p: Vec3, [a, b, c]: [Vec3; 3]) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Linear scan over all triangles; reference for [`MeshBvh::closest`].
pub fn brute_force_distance(mesh: &TriangleMesh, p: Vec3) -> f64 {
    (0..mesh.triangles.len())
        .map(|t| (closest_on_triangle(p, mesh.corners(t)).0 - p).norm_squared())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Distance, closest point and interpolated normal of `p` against the mesh in `bvh`.
pub fn point_to_mesh(bvh: &MeshBvh, p: Vec3) -> ClosestPoint {
    bvh.closest(p)
}

/// Ray-parity inside test; errors for meshes that are not closed.
pub fn point_in_mesh(bvh: &MeshBvh, p: Vec3) -> Result<bool> {
    bvh.contains(p)
}
