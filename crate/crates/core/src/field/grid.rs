use crate::error::{invalid, MdfError, Result};
use crate::field::{intersection_loss_slice, AnalyticScene};
use crate::vec3::Vec3;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

const GRID_MAGIC: &[u8; 4] = b"MDFG";
const GRID_VERSION: u32 = 1;

/// Regular lattice over an axis-aligned box; corners land exactly on the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub bbox_min: Vec3,
    pub bbox_max: Vec3,
}

impl GridSpec {
    pub fn new(
        dims: [usize; 3],
        bbox_min: impl Into<Vec3>,
        bbox_max: impl Into<Vec3>,
    ) -> Result<Self> {
        let spec = Self {
            dims,
            bbox_min: bbox_min.into(),
            bbox_max: bbox_max.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(axis) = self.dims.iter().position(|&n| n < 2) {
            return Err(invalid(format!(
                "grid dimension {} along axis {axis} must be at least 2",
                self.dims[axis]
            )));
        }
        let (lo, hi) = (self.bbox_min.to_array(), self.bbox_max.to_array());
        for a in 0..3 {
            if !(lo[a].is_finite() && hi[a].is_finite() && lo[a] < hi[a]) {
                return Err(invalid(format!(
                    "bbox must satisfy min < max on every axis (axis {a}: {} vs {})",
                    lo[a], hi[a]
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn num_points(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn num_cells(&self) -> usize {
        (self.dims[0] - 1) * (self.dims[1] - 1) * (self.dims[2] - 1)
    }

    pub fn bbox_volume(&self) -> f64 {
        let e = self.bbox_max - self.bbox_min;
        e.x * e.y * e.z
    }

    pub fn spacing(&self) -> Vec3 {
        let e = self.bbox_max - self.bbox_min;
        Vec3::new(
            e.x / (self.dims[0] - 1) as f64,
            e.y / (self.dims[1] - 1) as f64,
            e.z / (self.dims[2] - 1) as f64,
        )
    }

    #[inline]
    fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        let lo = self.bbox_min[axis];
        let hi = self.bbox_max[axis];
        let n = self.dims[axis] - 1;
        if i == n {
            hi
        } else {
            lo + (i as f64 / n as f64) * (hi - lo)
        }
    }

    /// World position of lattice point `(i, j, k)`.
    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.axis_coord(0, i),
            self.axis_coord(1, j),
            self.axis_coord(2, k),
        )
    }

    /// Linear offset of `(i, j, k)` within one channel (x fastest).
    #[inline]
    pub fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn unlinear(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        (i, rest % self.dims[1], rest / self.dims[1])
    }
}

/// `K` scalar channels sampled on a [`GridSpec`] lattice.
///
/// Storage is channel-outermost; inside a channel x varies fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMdfGrid {
    spec: GridSpec,
    channels: usize,
    data: Vec<f64>,
}

impl SampledMdfGrid {
    pub fn new(spec: GridSpec, channels: usize, data: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if channels == 0 {
            return Err(invalid("grid needs at least one channel"));
        }
        let expected = spec.num_points() * channels;
        if data.len() != expected {
            return Err(invalid(format!(
                "grid data has {} values, expected {expected}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("grid value at offset {pos} is not finite")));
        }
        Ok(Self {
            spec,
            channels,
            data,
        })
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let n = self.spec.num_points();
        &self.data[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn value(&self, channel: usize, i: usize, j: usize, k: usize) -> f64 {
        self.data[channel * self.spec.num_points() + self.spec.linear(i, j, k)]
    }

    /// The K-vector at linear lattice offset `idx`.
    pub fn vector_at(&self, idx: usize) -> Vec<f64> {
        let n = self.spec.num_points();
        (0..self.channels).map(|c| self.data[c * n + idx]).collect()
    }

    pub(crate) fn vector_into(&self, idx: usize, out: &mut Vec<f64>) {
        let n = self.spec.num_points();
        out.clear();
        out.extend((0..self.channels).map(|c| self.data[c * n + idx]));
    }

    /// Overwrite the K-vector at `idx`. Values must be finite.
    pub fn set_vector(&mut self, idx: usize, values: &[f64]) -> Result<()> {
        if values.len() != self.channels {
            return Err(invalid(format!(
                "vector has {} entries, grid has {} channels",
                values.len(),
                self.channels
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid values must be finite"));
        }
        let n = self.spec.num_points();
        for (c, &v) in values.iter().enumerate() {
            self.data[c * n + idx] = v;
        }
        Ok(())
    }

    /// Writes the little-endian binary grid format.
    ///
    /// Values are narrowed to `f32` with rounding toward positive infinity, so every
    /// pairwise sum that was `>= eps` in `f64` stays `>= eps` after narrowing.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(4 + 4 * 5 + 48 + 4 * self.data.len());
        buf.extend_from_slice(GRID_MAGIC);
        buf.extend_from_slice(&GRID_VERSION.to_le_bytes());
        for n in self
            .spec
            .dims
            .iter()
            .copied()
            .chain(std::iter::once(self.channels))
        {
            let n = u32::try_from(n).map_err(|_| invalid("grid dimension exceeds u32"))?;
            buf.extend_from_slice(&n.to_le_bytes());
        }
        for v in self
            .spec
            .bbox_min
            .to_array()
            .into_iter()
            .chain(self.spec.bbox_max.to_array())
        {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &self.data {
            let f = narrow_up(v);
            if !f.is_finite() {
                return Err(invalid(format!("grid value {v} does not fit in f32")));
            }
            buf.extend_from_slice(&f.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let fmt = |detail: String| MdfError::Format {
            what: "grid file",
            detail,
        };
        let mut header = [0u8; 4 + 4 * 5 + 48];
        r.read_exact(&mut header)
            .map_err(|e| fmt(format!("truncated header: {e}")))?;
        if &header[0..4] != GRID_MAGIC {
            return Err(fmt("bad magic, expected MDFG".into()));
        }
        let u32_at = |off: usize| u32::from_le_bytes(header[off..off + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != GRID_VERSION {
            return Err(fmt(format!("unsupported version {version}")));
        }
        let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
        let channels = u32_at(20) as usize;
        let f64_at = |off: usize| f64::from_le_bytes(header[off..off + 8].try_into().unwrap());
        let bbox_min = Vec3::new(f64_at(24), f64_at(32), f64_at(40));
        let bbox_max = Vec3::new(f64_at(48), f64_at(56), f64_at(64));
        let spec = GridSpec::new(dims, bbox_min, bbox_max)?;
        let count = spec
            .num_points()
            .checked_mul(channels)
            .ok_or_else(|| fmt("payload size overflows".into()))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != count * 4 {
            return Err(fmt(format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                count * 4
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Self::new(spec, channels, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Nearest `f32` that is not below `v`.
fn narrow_up(v: f64) -> f32 {
    let f = v as f32;
    if (f as f64) < v {
        f.next_up()
    } else {
        f
    }
}

/// Evaluates every object of `scene` at every lattice point of `spec`.
pub fn sample_grid(scene: &AnalyticScene, spec: &GridSpec) -> Result<SampledMdfGrid> {
    spec.validate()?;
    scene.validate()?;
    let n = spec.num_points();
    let kk = scene.num_objects();
    let total = n.checked_mul(kk).ok_or(MdfError::Allocation {
        requested: usize::MAX,
    })?;
    let mut data: Vec<f64> = Vec::new();
    data.try_reserve_exact(total)
        .map_err(|_| MdfError::Allocation { requested: total })?;
    data.resize(total, 0.0);

    let slab = spec.dims[0] * spec.dims[1];
    for (obj, chunk) in scene.objects.iter().zip(data.chunks_mut(n)) {
        chunk
            .par_chunks_mut(slab)
            .enumerate()
            .for_each(|(k, plane)| {
                for j in 0..spec.dims[1] {
                    for i in 0..spec.dims[0] {
                        plane[i + spec.dims[0] * j] = obj.distance(spec.point(i, j, k));
                    }
                }
            });
    }
    SampledMdfGrid::new(*spec, kk, data)
}

/// Mean intersection penalty over all lattice points (requires `K >= 2`).
pub fn intersection_penalty(grid: &SampledMdfGrid) -> Result<f64> {
    if grid.channels() < 2 {
        return Err(invalid("intersection penalty needs at least 2 channels"));
    }
    let n = grid.spec().num_points();
    let total: f64 = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |buf, idx| {
            grid.vector_into(idx, buf);
            intersection_loss_slice(buf)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{check_mdf_slice, Primitive, SceneObject};

    fn sphere_scene(objs: &[([f64; 3], f64)]) -> AnalyticScene {
        AnalyticScene::new(
            objs.iter()
                .enumerate()
                .map(|(k, &(c, r))| {
                    SceneObject::new(format!("s{k}"), vec![Primitive::sphere(c, r)])
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn lattice_corners_hit_bbox() {
        let spec = GridSpec::new([5, 7, 3], [-1.0, -2.0, 0.5], [1.0, 3.0, 0.75]).unwrap();
        assert_eq!(spec.point(0, 0, 0), Vec3::new(-1.0, -2.0, 0.5));
        assert_eq!(spec.point(4, 6, 2), Vec3::new(1.0, 3.0, 0.75));
        assert_eq!(spec.unlinear(spec.linear(3, 5, 1)), (3, 5, 1));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new([1, 64, 64], [-1.0; 3], [1.0; 3]).is_err());
        assert!(GridSpec::new([2, 2, 2], [1.0, -1.0, -1.0], [1.0; 3]).is_err());
    }

    #[test]
    fn one_sphere_corners() {
        let scene = sphere_scene(&[([0.0; 3], 0.5)]);
        let spec = GridSpec::new([2, 2, 2], [-1.0; 3], [1.0; 3]).unwrap();
        let g = sample_grid(&scene, &spec).unwrap();
        assert_eq!(g.data().len(), 8);
        for &v in g.data() {
            assert!((v - (3f64.sqrt() - 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn layout_is_channel_outermost() {
        let scene = sphere_scene(&[([0.0; 3], 0.5), ([0.3, 0.0, 0.0], 0.2)]);
        let spec = GridSpec::new([3, 4, 5], [-1.0; 3], [1.0; 3]).unwrap();
        let g = sample_grid(&scene, &spec).unwrap();
        let n = spec.num_points();
        for (c, obj) in scene.objects.iter().enumerate() {
            for idx in 0..n {
                let (i, j, k) = spec.unlinear(idx);
                assert_eq!(g.data()[c * n + idx], obj.distance(spec.point(i, j, k)));
                assert_eq!(g.value(c, i, j, k), g.data()[c * n + idx]);
            }
        }
    }

    #[test]
    fn disjoint_spheres_are_feasible_everywhere() {
        let scene = sphere_scene(&[([-0.5, 0.0, 0.0], 0.3), ([0.5, 0.0, 0.0], 0.3)]);
        let spec = GridSpec::new([17, 17, 17], [-1.0; 3], [1.0; 3]).unwrap();
        let g = sample_grid(&scene, &spec).unwrap();
        for idx in 0..spec.num_points() {
            assert!(check_mdf_slice(&g.vector_at(idx), 0.0));
        }
        assert_eq!(intersection_penalty(&g).unwrap(), 0.0);
    }

    #[test]
    fn overlapping_spheres_violate_somewhere() {
        let scene = sphere_scene(&[([-0.2, 0.0, 0.0], 0.5), ([0.2, 0.0, 0.0], 0.5)]);
        let spec = GridSpec::new([17, 17, 17], [-1.0; 3], [1.0; 3]).unwrap();
        let g = sample_grid(&scene, &spec).unwrap();
        let bad = (0..spec.num_points())
            .filter(|&idx| !check_mdf_slice(&g.vector_at(idx), 0.0))
            .count();
        assert!(bad > 0);
        assert!(intersection_penalty(&g).unwrap() > 0.0);
    }

    #[test]
    fn penalty_on_single_infeasible_point() {
        let spec = GridSpec::new([2, 2, 2], [0.0; 3], [1.0; 3]).unwrap();
        let mut data = vec![5.0; 16];
        data[0] = -3.0;
        data[8] = 2.0;
        let g = SampledMdfGrid::new(spec, 2, data).unwrap();
        assert_eq!(intersection_penalty(&g).unwrap(), 1.0 / 8.0);
    }

    #[test]
    fn rejects_non_finite_data() {
        let spec = GridSpec::new([2, 2, 2], [0.0; 3], [1.0; 3]).unwrap();
        let mut data = vec![1.0; 16];
        data[3] = f64::NAN;
        assert!(SampledMdfGrid::new(spec, 2, data).is_err());
        assert!(SampledMdfGrid::new(spec, 2, vec![1.0; 15]).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let scene = sphere_scene(&[([0.0; 3], 0.5), ([0.3, 0.1, 0.0], 0.2)]);
        let spec = GridSpec::new([4, 3, 5], [-1.0, -0.5, -2.0], [1.0, 0.5, 2.0]).unwrap();
        let g = sample_grid(&scene, &spec).unwrap();
        let mut bytes = Vec::new();
        g.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[0..4], b"MDFG");
        assert_eq!(bytes.len(), 4 + 20 + 48 + 4 * 60 * 2);
        let back = SampledMdfGrid::read_from(&bytes[..]).unwrap();
        assert_eq!(back.spec(), g.spec());
        for (a, b) in g.data().iter().zip(back.data()) {
            assert!(b >= a && b - a <= 1e-6 * a.abs().max(1e-30));
        }
        // f32-representable data survives unchanged
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, bytes);

        bytes[0] = b'X';
        assert!(SampledMdfGrid::read_from(&bytes[..]).is_err());
    }

    #[test]
    fn narrowing_never_rounds_down() {
        for v in [0.1f64, -0.1, 1e-4, -1e-4, 1.0 / 3.0, -2.0 / 3.0, 0.0] {
            assert!(narrow_up(v) as f64 >= v);
        }
    }
}
