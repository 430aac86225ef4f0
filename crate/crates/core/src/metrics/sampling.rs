use crate::error::{MdfError, Result};
use crate::meshing::TriangleMesh;
use crate::vec3::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per independently seeded RNG stream.
const CHUNK: usize = 4096;

/// Area-uniform points on a mesh with interpolated vertex normals.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSamples {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub triangles: Vec<usize>,
    pub seed: u64,
    pub mesh_id: usize,
    /// Zero-area triangles excluded from the area distribution.
    pub skipped_degenerate: usize,
}

/// Draws `n` area-weighted samples. Stream `c` of the ChaCha generator seeded by `seed`
/// produces samples `c * 4096 ..`, so the result does not depend on thread count.
pub fn sample_surface(
    mesh: &TriangleMesh,
    normals: &[Vec3],
    n: usize,
    seed: u64,
) -> Result<SurfaceSamples> {
    if mesh.is_empty() {
        return Err(MdfError::EmptyMesh);
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    let mut skipped = 0;
    for t in 0..mesh.triangles.len() {
        let a = 0.5 * mesh.face_cross(t).norm();
        if a > 0.0 {
            total += a;
        } else {
            skipped += 1;
        }
        cdf.push(total);
    }
    if skipped > 0 {
        log::warn!(
            "skipped {skipped} zero-area triangles while sampling object {}",
            mesh.object_index
        );
    }
    if total <= 0.0 {
        return Err(MdfError::EmptyMesh);
    }

    let chunks: Vec<Vec<(Vec3, Vec3, usize)>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| {
                    let target = rng.random::<f64>() * total;
                    let t = cdf.partition_point(|&x| x <= target).min(cdf.len() - 1);
                    let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                    let s = r1.sqrt();
                    let bary = [1.0 - s, s * (1.0 - r2), s * r2];
                    let [a, b, cc] = mesh.corners(t);
                    let p = a * bary[0] + b * bary[1] + cc * bary[2];
                    let tri = mesh.triangles[t];
                    let nrm = (normals[tri[0] as usize] * bary[0]
                        + normals[tri[1] as usize] * bary[1]
                        + normals[tri[2] as usize] * bary[2])
                        .normalized()
                        .or_else(|| mesh.face_cross(t).normalized())
                        .unwrap_or(Vec3::new(0.0, 0.0, 1.0));
                    (p, nrm, t)
                })
                .collect()
        })
        .collect();

    let mut out = SurfaceSamples {
        points: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        triangles: Vec::with_capacity(n),
        seed,
        mesh_id: mesh.object_index,
        skipped_degenerate: skipped,
    };
    for (p, nrm, t) in chunks.into_iter().flatten() {
        out.points.push(p);
        out.normals.push(nrm);
        out.triangles.push(t);
    }
    Ok(out)
}
