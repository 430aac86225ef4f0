use super::TriangleMesh;
use crate::error::{MdfError, Result};
use crate::vec3::Vec3;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Wavefront OBJ with `v` and `f` records (1-based indices).
///
/// Coordinates use Rust's shortest round-trip formatting, so reading the file back
/// reproduces the vertices bit-for-bit.
pub fn write_obj<W: Write>(mesh: &TriangleMesh, mut w: W) -> Result<()> {
    writeln!(w, "# object {}", mesh.object_index)?;
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `v`/`f` records; polygon faces are fan-triangulated, `v/vt/vn` forms accepted.
pub fn read_obj<R: BufRead>(r: R, object_index: usize) -> Result<TriangleMesh> {
    let err = |line: usize, detail: &str| MdfError::Format {
        what: "OBJ file",
        detail: format!("line {line}: {detail}"),
    };
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| err(n + 1, "bad vertex coordinate"))
                    })
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err(n + 1, "vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = it
                    .map(|s| {
                        let first = s.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| err(n + 1, "bad face index"))?;
                        let resolved = if i < 0 {
                            vertices.len() as i64 + i
                        } else {
                            i - 1
                        };
                        u32::try_from(resolved).map_err(|_| err(n + 1, "face index out of range"))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err(n + 1, "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles, object_index)
}

/// Binary little-endian PLY with double-precision vertices.
pub fn write_ply<W: Write>(mesh: &TriangleMesh, mut w: W) -> Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\ncomment object {}\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\nelement face {}\n\
         property list uchar uint vertex_indices\nend_header\n",
        mesh.object_index,
        mesh.vertices.len(),
        mesh.triangles.len()
    )?;
    let mut buf = Vec::with_capacity(mesh.vertices.len() * 24 + mesh.triangles.len() * 13);
    for v in &mesh.vertices {
        for c in v.to_array() {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        buf.push(3);
        for &i in t {
            buf.extend_from_slice(&i.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// [`write_obj`] to a file.
pub fn save_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    write_obj(mesh, BufWriter::new(File::create(path)?))
}

/// [`read_obj`] from a file.
pub fn load_obj(path: impl AsRef<Path>, object_index: usize) -> Result<TriangleMesh> {
    read_obj(BufReader::new(File::open(path)?), object_index)
}
