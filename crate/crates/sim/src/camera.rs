//! Camera emulation: rasterized ground-truth labels and depth, noisy score
//! masks, and tight detection boxes from rendered silhouettes.

use rand_chacha::ChaCha12Rng;

use semfuse_core::cloud::DetectionBox;
use semfuse_core::geometry::unproject;
use semfuse_core::image::{DepthImage, ScoreMask};
use semfuse_core::{Camera, ClassId, ClassRegistry, Depth, Detection, Mask, Pose};

use crate::noise::NoiseSampler;
use crate::scene::Scene;

/// Classes emitted by the object detectors.
pub const DETECTION_CLASSES: [&str; 3] = ["person", "vehicle", "bicycle"];

/// Everything one camera frame can produce. Thermal cameras only use the
/// detection list.
#[derive(Debug, Clone)]
pub struct CameraRender {
    pub mask: Mask,
    pub depth: Depth,
    pub detections: Vec<Detection>,
    /// Ground-truth class per pixel (sky where no surface is visible).
    pub gt_labels: Vec<u16>,
}

struct Raster {
    labels: Vec<u16>,
    prim_index: Vec<i32>,
    depth: Vec<f64>,
}

fn rasterize(scene: &Scene, pose: &Pose, cam: &Camera, t: f64, max_range: f64) -> Raster {
    let (w, h) = (cam.width, cam.height);
    let mut labels = vec![scene.sky_class as u16; w * h];
    let mut prim_index = vec![-1i32; w * h];
    let mut depth = vec![0.0f64; w * h];
    for v in 0..h {
        for u in 0..w {
            let dir_cam = unproject(cam, u as f64, v as f64, 1.0);
            let norm = dir_cam.norm();
            let dir_world = pose.rotation.rotate(dir_cam / norm);
            if let Some(hit) = scene.ray_cast(pose.translation, dir_world, t, max_range) {
                let idx = v * w + u;
                labels[idx] = hit.class_id as u16;
                prim_index[idx] = hit.primitive.map_or(-2, |p| p as i32);
                // z-depth: the ray parameter along the unit-z pinhole ray.
                depth[idx] = hit.range / norm;
            }
        }
    }
    Raster {
        labels,
        prim_index,
        depth,
    }
}

fn detection_class_ids(registry: &ClassRegistry) -> Vec<ClassId> {
    DETECTION_CLASSES
        .iter()
        .filter_map(|name| registry.resolve_detection_label(name))
        .collect()
}

/// Tight bounding boxes of visible detectable primitives, with dropout and
/// confidence sampling from the noise model.
fn detections_from_raster(
    raster: &Raster,
    scene: &Scene,
    registry: &ClassRegistry,
    cam: &Camera,
    noise: &NoiseSampler,
    rng: &mut ChaCha12Rng,
) -> Vec<Detection> {
    let detectable = detection_class_ids(registry);
    let mut bounds: std::collections::HashMap<usize, (usize, usize, usize, usize)> =
        std::collections::HashMap::new();
    for v in 0..cam.height {
        for u in 0..cam.width {
            let idx = v * cam.width + u;
            let prim = raster.prim_index[idx];
            if prim < 0 {
                continue;
            }
            let prim = prim as usize;
            if !detectable.contains(&(raster.labels[idx] as usize)) {
                continue;
            }
            bounds
                .entry(prim)
                .and_modify(|b| {
                    b.0 = b.0.min(u);
                    b.1 = b.1.min(v);
                    b.2 = b.2.max(u);
                    b.3 = b.3.max(v);
                })
                .or_insert((u, v, u, v));
        }
    }
    // Deterministic order: primitive index.
    let mut items: Vec<(usize, (usize, usize, usize, usize))> = bounds.into_iter().collect();
    items.sort_by_key(|(prim, _)| *prim);
    let mut detections = Vec::new();
    for (prim, (u0, v0, u1, v1)) in items {
        let Some(score) = noise.detection_outcome(rng) else {
            continue;
        };
        let class_id = scene.primitives()[prim].class_id;
        // Half-pixel padding covers the pixel footprints and keeps
        // single-pixel silhouettes non-degenerate.
        detections.push(
            DetectionBox::new(
                class_id,
                score,
                u0 as f64 - 0.5,
                v0 as f64 - 0.5,
                u1 as f64 + 0.5,
                v1 as f64 + 0.5,
            )
            .expect("padded box is non-degenerate"),
        );
    }
    detections
}

/// Render an RGB-D frame: noisy score mask, depth image, detections, and the
/// ground-truth label image.
pub fn render_rgb(
    scene: &Scene,
    registry: &ClassRegistry,
    pose: &Pose,
    cam: &Camera,
    stamp: f64,
    max_range: f64,
    noise: &NoiseSampler,
    rng: &mut ChaCha12Rng,
) -> CameraRender {
    let raster = rasterize(scene, pose, cam, stamp, max_range);
    let mut mask = ScoreMask::new(cam.width, cam.height, noise.classes(), stamp);
    for v in 0..cam.height {
        for u in 0..cam.width {
            let gt = raster.labels[v * cam.width + u] as usize;
            let scores = noise.observe(gt, rng);
            mask.set_pixel(u, v, &scores);
        }
    }
    let depth = DepthImage::from_depths(cam.width, cam.height, stamp, raster.depth.clone())
        .expect("raster depth is valid");
    let detections = detections_from_raster(&raster, scene, registry, cam, noise, rng);
    CameraRender {
        mask,
        depth,
        detections,
        gt_labels: raster.labels,
    }
}

/// Render a thermal frame: detections only.
pub fn render_thermal(
    scene: &Scene,
    registry: &ClassRegistry,
    pose: &Pose,
    cam: &Camera,
    stamp: f64,
    max_range: f64,
    noise: &NoiseSampler,
    rng: &mut ChaCha12Rng,
) -> Vec<Detection> {
    let raster = rasterize(scene, pose, cam, stamp, max_range);
    detections_from_raster(&raster, scene, registry, cam, noise, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{frame_rng, SensorNoiseModel};
    use crate::scene::{generate_scene, PrimitiveSpec, SceneSpec, ShapeSpec};
    use semfuse_core::geometry::CameraModel;
    use semfuse_core::math::{RigidTransform, UnitQuaternion, Vec3};

    fn registry() -> ClassRegistry {
        ClassRegistry::default_15()
    }

    fn noiseless(reg: &ClassRegistry) -> NoiseSampler {
        NoiseSampler::new(&SensorNoiseModel::noiseless(), reg).unwrap()
    }

    /// Camera at the origin looking along +x (world), z up.
    fn forward_camera_pose() -> Pose {
        RigidTransform::new(UnitQuaternion::new(0.5, -0.5, 0.5, -0.5), Vec3::new(0.0, 0.0, 1.0))
    }

    fn cam_64x48() -> CameraModel<f64> {
        CameraModel {
            fx: 64.0,
            fy: 64.0,
            cx: 32.0,
            cy: 24.0,
            width: 64,
            height: 48,
        }
    }

    fn person_scene(reg: &ClassRegistry) -> Scene {
        let spec = SceneSpec {
            primitives: vec![
                PrimitiveSpec {
                    shape: ShapeSpec::Cylinder { radius: 0.4, height: 1.8 },
                    class: "person".into(),
                    position: [6.0, 0.0, 1.4],
                    yaw_deg: 0.0,
                    path: vec![],
                },
                PrimitiveSpec {
                    shape: ShapeSpec::Box { size: [4.0, 8.0, 6.0] },
                    class: "building".into(),
                    position: [20.0, 0.0, 3.0],
                    yaw_deg: 0.0,
                    path: vec![],
                },
            ],
            ..Default::default()
        };
        generate_scene(&spec, reg, 0).unwrap()
    }

    #[test]
    fn noiseless_mask_matches_gt_labels_everywhere() {
        let reg = registry();
        let scene = person_scene(&reg);
        let noise = noiseless(&reg);
        let mut rng = frame_rng(0, 1, 0);
        let render = render_rgb(
            &scene,
            &reg,
            &forward_camera_pose(),
            &cam_64x48(),
            0.0,
            100.0,
            &noise,
            &mut rng,
        );
        for v in 0..48 {
            for u in 0..64 {
                assert_eq!(
                    render.mask.argmax(u, v) as u16,
                    render.gt_labels[v * 64 + u],
                    "pixel ({u},{v})"
                );
            }
        }
        // The person is visible somewhere.
        let person = reg.lookup("person").unwrap() as u16;
        assert!(render.gt_labels.contains(&person));
        // Sky above the building, ground below the horizon.
        assert!(render.gt_labels.contains(&(scene.sky_class as u16)));
        assert!(render.gt_labels.contains(&(scene.ground_class as u16)));
    }

    #[test]
    fn depth_is_z_depth_not_range() {
        // A wall at x = 18 (building face): depth must equal 17 everywhere
        // on the wall (z-depth), not the slant range.
        let reg = registry();
        let scene = person_scene(&reg);
        let noise = noiseless(&reg);
        let mut rng = frame_rng(0, 1, 0);
        let render = render_rgb(
            &scene,
            &reg,
            &forward_camera_pose(),
            &cam_64x48(),
            0.0,
            100.0,
            &noise,
            &mut rng,
        );
        let building = reg.lookup("building").unwrap() as u16;
        let mut checked = 0;
        for v in 0..48 {
            for u in 0..64 {
                if render.gt_labels[v * 64 + u] == building {
                    assert!(
                        (render.depth.at(u, v) - 18.0).abs() < 1e-9,
                        "pixel ({u},{v}) depth {}",
                        render.depth.at(u, v)
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 100, "wall visible in {checked} pixels");
    }

    #[test]
    fn person_box_is_tight_around_the_silhouette() {
        let reg = registry();
        let scene = person_scene(&reg);
        let noise = noiseless(&reg);
        let mut rng = frame_rng(0, 1, 0);
        let render = render_rgb(
            &scene,
            &reg,
            &forward_camera_pose(),
            &cam_64x48(),
            0.0,
            100.0,
            &noise,
            &mut rng,
        );
        let person = reg.lookup("person").unwrap();
        let boxes: Vec<&Detection> = render
            .detections
            .iter()
            .filter(|d| d.class_id == person)
            .collect();
        assert_eq!(boxes.len(), 1);
        let b = boxes[0];
        assert_eq!(b.score, 0.75, "noiseless detector score is pinned");

        // Oracle: min/max over the rasterized silhouette.
        let mut bounds: Option<(usize, usize, usize, usize)> = None;
        for v in 0..48 {
            for u in 0..64 {
                if render.gt_labels[v * 64 + u] == person as u16 {
                    let e = bounds.get_or_insert((u, v, u, v));
                    e.0 = e.0.min(u);
                    e.1 = e.1.min(v);
                    e.2 = e.2.max(u);
                    e.3 = e.3.max(v);
                }
            }
        }
        let (u0, v0, u1, v1) = bounds.expect("person visible");
        assert_eq!(b.u_min, u0 as f64 - 0.5);
        assert_eq!(b.v_min, v0 as f64 - 0.5);
        assert_eq!(b.u_max, u1 as f64 + 0.5);
        assert_eq!(b.v_max, v1 as f64 + 0.5);
    }

    #[test]
    fn zero_recall_gives_no_detections() {
        let reg = registry();
        let scene = person_scene(&reg);
        let model = SensorNoiseModel {
            detection_recall: 0.0,
            ..SensorNoiseModel::noiseless()
        };
        let noise = NoiseSampler::new(&model, &reg).unwrap();
        let mut rng = frame_rng(0, 1, 0);
        let dets = render_thermal(
            &scene,
            &reg,
            &forward_camera_pose(),
            &cam_64x48(),
            0.0,
            100.0,
            &noise,
            &mut rng,
        );
        assert!(dets.is_empty());
    }

    #[test]
    fn thermal_render_detects_the_person() {
        let reg = registry();
        let scene = person_scene(&reg);
        let noise = noiseless(&reg);
        let mut rng = frame_rng(0, 2, 0);
        let dets = render_thermal(
            &scene,
            &reg,
            &forward_camera_pose(),
            &cam_64x48(),
            0.0,
            100.0,
            &noise,
            &mut rng,
        );
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].class_id, reg.lookup("person").unwrap());
    }
}
