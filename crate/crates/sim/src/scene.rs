//! Synthetic world: analytic primitives with exact ray casting.
//!
//! A scene is a ground plane at z = 0 plus boxes and cylinders, each carrying
//! a semantic class. Dynamic primitives follow timestamped waypoint paths.
//! Everything is deterministic for a given (spec, seed).

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semfuse_core::math::{UnitQuaternion, Vec3};
use semfuse_core::{ClassId, ClassRegistry, Point3};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeSpec {
    /// Full extents in meters.
    Box { size: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    pub shape: ShapeSpec,
    pub class: String,
    /// Center position in meters.
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
    /// Timestamped centers for dynamic objects (linear interpolation,
    /// clamped at the ends). Overrides `position` during the covered span.
    #[serde(default)]
    pub path: Vec<PathPoint>,
}

/// Uniformly scattered extra primitives, seeded for determinism.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterSpec {
    pub count: usize,
    pub class: String,
    /// Axis-aligned region `[x0, y0, x1, y1]` the centers fall in.
    pub region: [f64; 4],
    pub size_range: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Class of the infinite ground plane at z = 0.
    #[serde(default = "default_ground_class")]
    pub ground_class: String,
    /// Class assigned to rays that hit nothing.
    #[serde(default = "default_sky_class")]
    pub sky_class: String,
    #[serde(default)]
    pub primitives: Vec<PrimitiveSpec>,
    #[serde(default)]
    pub scatter: Vec<ScatterSpec>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            ground_class: default_ground_class(),
            sky_class: default_sky_class(),
            primitives: Vec::new(),
            scatter: Vec::new(),
        }
    }
}

fn default_ground_class() -> String {
    "road".into()
}

fn default_sky_class() -> String {
    "sky".into()
}

#[derive(Debug, Clone)]
pub struct Primitive {
    pub shape: ShapeSpec,
    pub class_id: ClassId,
    position: Point3,
    yaw: UnitQuaternion<f64>,
    inv_yaw: UnitQuaternion<f64>,
    path: Vec<(f64, Point3)>,
}

impl Primitive {
    /// Center at time `t`.
    pub fn center(&self, t: f64) -> Point3 {
        if self.path.is_empty() {
            return self.position;
        }
        if t <= self.path[0].0 {
            return self.path[0].1;
        }
        let last = self.path.len() - 1;
        if t >= self.path[last].0 {
            return self.path[last].1;
        }
        let idx = self.path.partition_point(|(pt, _)| *pt <= t);
        let (t0, p0) = self.path[idx - 1];
        let (t1, p1) = self.path[idx];
        p0.lerp(p1, (t - t0) / (t1 - t0))
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub ground_class: ClassId,
    pub sky_class: ClassId,
    primitives: Vec<Primitive>,
    digest: String,
}

/// A ray-cast hit. `primitive` is `None` for the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub range: f64,
    pub class_id: ClassId,
    pub primitive: Option<usize>,
}

fn resolve_class(registry: &ClassRegistry, name: &str, field: &str) -> Result<ClassId> {
    registry
        .lookup(name)
        .ok_or_else(|| SimError::spec(field, format!("unknown class '{name}'")))
}

/// Build a scene from its spec; deterministic for a given (spec, seed).
pub fn generate_scene(spec: &SceneSpec, registry: &ClassRegistry, seed: u64) -> Result<Scene> {
    let ground_class = resolve_class(registry, &spec.ground_class, "ground_class")?;
    let sky_class = resolve_class(registry, &spec.sky_class, "sky_class")?;
    let mut primitives = Vec::new();

    for (i, p) in spec.primitives.iter().enumerate() {
        let field = format!("primitives[{i}]");
        validate_shape(&p.shape, &field)?;
        let class_id = resolve_class(registry, &p.class, &format!("{field}.class"))?;
        let mut path: Vec<(f64, Point3)> = p
            .path
            .iter()
            .map(|w| (w.t, Vec3::from_array(w.position)))
            .collect();
        path.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        primitives.push(Primitive {
            shape: p.shape.clone(),
            class_id,
            position: Vec3::from_array(p.position),
            yaw: UnitQuaternion::from_yaw(p.yaw_deg.to_radians()),
            inv_yaw: UnitQuaternion::from_yaw(-p.yaw_deg.to_radians()),
            path,
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for (i, s) in spec.scatter.iter().enumerate() {
        let field = format!("scatter[{i}]");
        let class_id = resolve_class(registry, &s.class, &format!("{field}.class"))?;
        if s.size_range[0] <= 0.0 || s.size_range[1] < s.size_range[0] {
            return Err(SimError::spec(
                format!("{field}.size_range"),
                "must be positive and ordered",
            ));
        }
        for _ in 0..s.count {
            let size = rng.random_range(s.size_range[0]..=s.size_range[1]);
            let x = rng.random_range(s.region[0]..=s.region[2]);
            let y = rng.random_range(s.region[1]..=s.region[3]);
            primitives.push(Primitive {
                shape: ShapeSpec::Box {
                    size: [size, size, size],
                },
                class_id,
                position: Vec3::new(x, y, size / 2.0),
                yaw: UnitQuaternion::identity(),
                inv_yaw: UnitQuaternion::identity(),
                path: Vec::new(),
            });
        }
    }

    let digest = scene_digest(&primitives, ground_class, sky_class);
    Ok(Scene {
        ground_class,
        sky_class,
        primitives,
        digest,
    })
}

fn validate_shape(shape: &ShapeSpec, field: &str) -> Result<()> {
    match shape {
        ShapeSpec::Box { size } => {
            if size.iter().any(|&s| s <= 0.0) {
                return Err(SimError::spec(
                    format!("{field}.shape.size"),
                    "extents must be positive",
                ));
            }
        }
        ShapeSpec::Cylinder { radius, height } => {
            if *radius <= 0.0 || *height <= 0.0 {
                return Err(SimError::spec(
                    format!("{field}.shape"),
                    "radius and height must be positive",
                ));
            }
        }
    }
    Ok(())
}

fn scene_digest(primitives: &[Primitive], ground: ClassId, sky: ClassId) -> String {
    let mut hasher = Sha256::new();
    hasher.update(ground.to_le_bytes());
    hasher.update(sky.to_le_bytes());
    for p in primitives {
        hasher.update(p.class_id.to_le_bytes());
        for v in [p.position.x, p.position.y, p.position.z, p.yaw.w, p.yaw.z] {
            hasher.update(v.to_le_bytes());
        }
        match &p.shape {
            ShapeSpec::Box { size } => {
                hasher.update([0u8]);
                for s in size {
                    hasher.update(s.to_le_bytes());
                }
            }
            ShapeSpec::Cylinder { radius, height } => {
                hasher.update([1u8]);
                hasher.update(radius.to_le_bytes());
                hasher.update(height.to_le_bytes());
            }
        }
        for (t, pos) in &p.path {
            hasher.update(t.to_le_bytes());
            for v in [pos.x, pos.y, pos.z] {
                hasher.update(v.to_le_bytes());
            }
        }
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Scene {
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    /// Nearest intersection of a world-frame ray with the scene at time `t`.
    /// `dir` must be normalized.
    pub fn ray_cast(&self, origin: Point3, dir: Point3, t: f64, max_range: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut consider = |range: f64, class_id: ClassId, primitive: Option<usize>| {
            if range <= 1e-9 || range > max_range {
                return;
            }
            if best.map_or(true, |b| range < b.range) {
                best = Some(Hit {
                    range,
                    class_id,
                    primitive,
                });
            }
        };

        // Ground plane z = 0.
        if dir.z.abs() > 1e-12 {
            let s = -origin.z / dir.z;
            consider(s, self.ground_class, None);
        }

        for (i, p) in self.primitives.iter().enumerate() {
            let center = p.center(t);
            // Local frame: undo yaw, center at origin.
            let o = p.inv_yaw.rotate(origin - center);
            let d = p.inv_yaw.rotate(dir);
            let range = match &p.shape {
                ShapeSpec::Box { size } => ray_box(o, d, *size),
                ShapeSpec::Cylinder { radius, height } => ray_cylinder(o, d, *radius, *height),
            };
            if let Some(r) = range {
                consider(r, p.class_id, Some(i));
            }
        }
        best
    }

    /// Class of the scene surface or body nearest to `p` within `tol`.
    pub fn classify_point(&self, p: Point3, t: f64, tol: f64) -> Option<ClassId> {
        let mut best: Option<(f64, ClassId)> = None;
        let mut consider = |dist: f64, class: ClassId| {
            if dist <= tol && best.map_or(true, |(d, _)| dist < d) {
                best = Some((dist, class));
            }
        };
        consider(p.z.abs(), self.ground_class);
        for prim in &self.primitives {
            let local = prim.inv_yaw.rotate(p - prim.center(t));
            let dist = match &prim.shape {
                ShapeSpec::Box { size } => box_distance(local, *size),
                ShapeSpec::Cylinder { radius, height } => cylinder_distance(local, *radius, *height),
            };
            consider(dist, prim.class_id);
        }
        best.map(|(_, c)| c)
    }
}

/// Slab-method ray/box intersection in the box's local frame; `size` holds
/// full extents. Returns the nearest positive range.
fn ray_box(origin: Point3, dir: Point3, size: [f64; 3]) -> Option<f64> {
    let half = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
    let o = origin.to_array();
    let d = dir.to_array();
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for a in 0..3 {
        if d[a].abs() < 1e-12 {
            if o[a].abs() > half[a] {
                return None;
            }
            continue;
        }
        let mut t0 = (-half[a] - o[a]) / d[a];
        let mut t1 = (half[a] - o[a]) / d[a];
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    if t_near > 1e-9 {
        Some(t_near)
    } else if t_far > 1e-9 {
        Some(t_far)
    } else {
        None
    }
}

/// Ray/cylinder intersection (axis +z, centered), side plus end caps.
fn ray_cylinder(origin: Point3, dir: Point3, radius: f64, height: f64) -> Option<f64> {
    let half_h = height / 2.0;
    let mut best: Option<f64> = None;
    let mut consider = |s: f64| {
        if s > 1e-9 && best.map_or(true, |b| s < b) {
            best = Some(s);
        }
    };

    // Side surface: (ox + s dx)^2 + (oy + s dy)^2 = r^2.
    let a = dir.x * dir.x + dir.y * dir.y;
    if a > 1e-12 {
        let b = 2.0 * (origin.x * dir.x + origin.y * dir.y);
        let c = origin.x * origin.x + origin.y * origin.y - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for s in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                let z = origin.z + s * dir.z;
                if z.abs() <= half_h {
                    consider(s);
                }
            }
        }
    }

    // End caps.
    if dir.z.abs() > 1e-12 {
        for cap_z in [-half_h, half_h] {
            let s = (cap_z - origin.z) / dir.z;
            let x = origin.x + s * dir.x;
            let y = origin.y + s * dir.y;
            if x * x + y * y <= radius * radius {
                consider(s);
            }
        }
    }
    best
}

/// Distance from a point to a box surface (0 inside).
fn box_distance(p: Point3, size: [f64; 3]) -> f64 {
    let half = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
    let dx = (p.x.abs() - half[0]).max(0.0);
    let dy = (p.y.abs() - half[1]).max(0.0);
    let dz = (p.z.abs() - half[2]).max(0.0);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Distance from a point to a cylinder surface (0 inside).
fn cylinder_distance(p: Point3, radius: f64, height: f64) -> f64 {
    let radial = ((p.x * p.x + p.y * p.y).sqrt() - radius).max(0.0);
    let axial = (p.z.abs() - height / 2.0).max(0.0);
    (radial * radial + axial * axial).sqrt()
}
