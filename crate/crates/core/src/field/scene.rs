use crate::error::{invalid, MdfError, Result};
use crate::field::SdfVector;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Primitive solid with an exact signed distance function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Primitive {
    Sphere { center: Vec3, radius: f64 },
    Box { center: Vec3, half_extents: Vec3 },
}

impl Primitive {
    pub fn sphere(center: impl Into<Vec3>, radius: f64) -> Self {
        Primitive::Sphere {
            center: center.into(),
            radius,
        }
    }

    pub fn cuboid(center: impl Into<Vec3>, half_extents: impl Into<Vec3>) -> Self {
        Primitive::Box {
            center: center.into(),
            half_extents: half_extents.into(),
        }
    }

    /// Exact signed distance; negative inside.
    pub fn distance(&self, p: Vec3) -> f64 {
        match *self {
            Primitive::Sphere { center, radius } => (p - center).norm() - radius,
            Primitive::Box {
                center,
                half_extents,
            } => {
                let q = (p - center).abs() - half_extents;
                let outside = q.max(Vec3::ZERO).norm();
                let inside = q.max_element().min(0.0);
                outside + inside
            }
        }
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        match *self {
            Primitive::Sphere { center, radius } => {
                (center - Vec3::splat(radius), center + Vec3::splat(radius))
            }
            Primitive::Box {
                center,
                half_extents,
            } => (center - half_extents, center + half_extents),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Primitive::Sphere { center, radius } => {
                if !center.is_finite() {
                    return Err(invalid("sphere center must be finite"));
                }
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(invalid(format!(
                        "sphere radius must be positive, got {radius}"
                    )));
                }
            }
            Primitive::Box {
                center,
                half_extents,
            } => {
                if !center.is_finite() {
                    return Err(invalid("box center must be finite"));
                }
                let h = half_extents;
                if !(h.is_finite() && h.x > 0.0 && h.y > 0.0 && h.z > 0.0) {
                    return Err(invalid(format!(
                        "box half_extents must be positive, got {:?}",
                        h.to_array()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One object: the union (pointwise min) of its primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    #[serde(default)]
    pub name: String,
    pub primitives: Vec<Primitive>,
}

impl SceneObject {
    pub fn new(name: impl Into<String>, primitives: Vec<Primitive>) -> Self {
        Self {
            name: name.into(),
            primitives,
        }
    }

    pub fn distance(&self, p: Vec3) -> f64 {
        self.primitives
            .iter()
            .map(|prim| prim.distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A set of objects with exact analytic signed distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticScene {
    pub objects: Vec<SceneObject>,
}

impl AnalyticScene {
    pub fn new(objects: Vec<SceneObject>) -> Result<Self> {
        let scene = Self { objects };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(invalid("scene has no objects"));
        }
        for (k, obj) in self.objects.iter().enumerate() {
            if obj.primitives.is_empty() {
                return Err(invalid(format!("objects[{k}].primitives is empty")));
            }
            for (j, prim) in obj.primitives.iter().enumerate() {
                prim.validate()
                    .map_err(|e| invalid(format!("objects[{k}].primitives[{j}]: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: AnalyticScene = serde_json::from_str(text).map_err(|e| MdfError::Format {
            what: "scene JSON",
            detail: e.to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization is infallible")
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    /// Union of all primitive bounds.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::splat(f64::INFINITY);
        let mut hi = Vec3::splat(f64::NEG_INFINITY);
        for prim in self.objects.iter().flat_map(|o| &o.primitives) {
            let (a, b) = prim.bounds();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    /// Per-object signed distances at `p`, any `K >= 1`.
    pub fn distances_into(&self, p: Vec3, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.objects.iter().map(|o| o.distance(p)));
    }
}

/// Signed distance vector of `p` to every object of `scene` (requires two or more objects).
pub fn eval_scene(scene: &AnalyticScene, p: Vec3) -> Result<SdfVector> {
    if !p.is_finite() {
        return Err(invalid("query point must be finite"));
    }
    let mut out = Vec::with_capacity(scene.num_objects());
    scene.distances_into(p, &mut out);
    SdfVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sphere() -> Primitive {
        Primitive::sphere([0.0, 0.0, 0.0], 1.0)
    }

    #[test]
    fn sphere_distances() {
        assert_eq!(unit_sphere().distance(Vec3::ZERO), -1.0);
        assert_eq!(unit_sphere().distance(Vec3::new(2.0, 0.0, 0.0)), 1.0);
    }

    #[test]
    fn box_distance_is_exact() {
        let b = Primitive::cuboid([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        assert_eq!(b.distance(Vec3::new(0.0, 0.0, 0.5)), -0.5);
        assert_eq!(b.distance(Vec3::ZERO), -1.0);
        // corner region: Euclidean distance to the corner
        let d = b.distance(Vec3::new(2.0, 2.0, 2.0));
        assert!((d - 3f64.sqrt()).abs() < 1e-15);
        // edge region
        let d = b.distance(Vec3::new(2.0, 2.0, 0.0));
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.distance(Vec3::new(1.0, 0.3, -0.2)), 0.0);
    }

    #[test]
    fn eval_scene_stacks_objects() {
        let scene = AnalyticScene::new(vec![
            SceneObject::new("a", vec![unit_sphere()]),
            SceneObject::new(
                "b",
                vec![Primitive::cuboid([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])],
            ),
        ])
        .unwrap();
        let u = eval_scene(&scene, Vec3::new(0.0, 0.0, 0.5)).unwrap();
        assert_eq!(u.as_slice(), &[-0.5, -0.5]);
        assert!(eval_scene(&scene, Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn union_takes_min() {
        let obj = SceneObject::new(
            "two",
            vec![
                Primitive::sphere([-1.0, 0.0, 0.0], 0.5),
                Primitive::sphere([1.0, 0.0, 0.0], 0.5),
            ],
        );
        assert_eq!(obj.distance(Vec3::new(1.0, 0.0, 0.0)), -0.5);
        assert_eq!(obj.distance(Vec3::new(-1.0, 0.0, 0.0)), -0.5);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let text = r#"{"objects": [
            {"name": "s", "primitives": [{"type": "sphere", "center": [0,0,0], "radius": 0.5}]},
            {"name": "b", "primitives": [{"type": "box", "center": [1,0,0], "half_extents": [0.2,0.3,0.4]}]}
        ]}"#;
        let scene = AnalyticScene::from_json(text).unwrap();
        assert_eq!(scene.num_objects(), 2);
        let again = AnalyticScene::from_json(&scene.to_json()).unwrap();
        assert_eq!(scene, again);

        let missing = r#"{"objects": [{"name": "s", "primitives": [{"type": "sphere", "center": [0,0,0]}]}]}"#;
        let err = AnalyticScene::from_json(missing).unwrap_err().to_string();
        assert!(err.contains("radius"), "{err}");

        let negative = r#"{"objects": [{"name": "s", "primitives": [{"type": "sphere", "center": [0,0,0], "radius": -1}]}]}"#;
        let err = AnalyticScene::from_json(negative).unwrap_err().to_string();
        assert!(err.contains("objects[0].primitives[0]"), "{err}");

        assert!(AnalyticScene::from_json(r#"{"objects": []}"#).is_err());
    }
}
