//! Spinning LiDAR emulation: ring/azimuth ray casting with per-point sweep
//! timestamps and noisy per-point class scores.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use semfuse_core::cloud::{CloudFrame, SemanticCloud, SemanticPoint};
use semfuse_core::math::Vec3;
use semfuse_core::{Cloud, Pose};

use crate::noise::NoiseSampler;
use crate::scene::Scene;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LidarModel {
    /// Vertical beams.
    pub rings: usize,
    /// Azimuth bins per revolution.
    pub azimuth_steps: usize,
    /// Total vertical opening angle, degrees.
    pub vertical_fov_deg: f64,
    pub max_range: f64,
    pub rate_hz: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        // Full-scale sensor: 128 beams, 90 degree vertical opening, 10 Hz.
        Self {
            rings: 128,
            azimuth_steps: 1024,
            vertical_fov_deg: 90.0,
            max_range: 80.0,
            rate_hz: 10.0,
        }
    }
}

impl LidarModel {
    /// Beam direction in the sensor frame.
    pub fn beam_direction(&self, ring: usize, step: usize) -> Vec3<f64> {
        let half = self.vertical_fov_deg.to_radians() / 2.0;
        let elevation = if self.rings > 1 {
            half - (ring as f64) * self.vertical_fov_deg.to_radians() / (self.rings - 1) as f64
        } else {
            0.0
        };
        let azimuth = step as f64 * std::f64::consts::TAU / self.azimuth_steps as f64;
        Vec3::new(
            elevation.cos() * azimuth.cos(),
            elevation.cos() * azimuth.sin(),
            elevation.sin(),
        )
    }

    /// Sweep time offset of an azimuth column.
    pub fn sweep_offset(&self, step: usize) -> f64 {
        (step as f64 / self.azimuth_steps as f64) / self.rate_hz
    }
}

/// Render one scan. `pose_at` provides the world pose of the LiDAR at an
/// absolute time, so platform motion during the sweep is modeled per azimuth
/// column. Returns the scan in the sensor frame (positions relative to the
/// instantaneous sensor pose at each point's own stamp) plus ground-truth
/// class labels.
pub fn render_lidar(
    scene: &Scene,
    pose_at: &dyn Fn(f64) -> Pose,
    scan_stamp: f64,
    model: &LidarModel,
    noise: &NoiseSampler,
    rng: &mut ChaCha12Rng,
) -> (Cloud, Vec<u16>) {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for step in 0..model.azimuth_steps {
        let offset = model.sweep_offset(step);
        let t = scan_stamp + offset;
        let pose = pose_at(t);
        for ring in 0..model.rings {
            let dir_sensor = model.beam_direction(ring, step);
            let dir_world = pose.rotation.rotate(dir_sensor);
            let Some(hit) = scene.ray_cast(pose.translation, dir_world, t, model.max_range)
            else {
                continue;
            };
            let range = noise.noisy_range(hit.range, rng);
            let scores = noise.observe(hit.class_id, rng);
            let point = SemanticPoint::new(dir_sensor * range, 1.0, offset, scores)
                .expect("finite ray hit");
            points.push(point);
            labels.push(hit.class_id as u16);
        }
    }
    (
        SemanticCloud::new(points, scan_stamp, CloudFrame::Lidar),
        labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{frame_rng, SensorNoiseModel};
    use crate::scene::{generate_scene, SceneSpec};
    use semfuse_core::math::RigidTransform;
    use semfuse_core::ClassRegistry;

    fn noiseless() -> NoiseSampler {
        NoiseSampler::new(&SensorNoiseModel::noiseless(), &ClassRegistry::default_15()).unwrap()
    }

    #[test]
    fn ground_ranges_follow_the_slant_formula() {
        // Hovering at altitude h: a beam with downward elevation e hits the
        // ground at h / sin(|e|).
        let reg = ClassRegistry::default_15();
        let scene = generate_scene(&SceneSpec::default(), &reg, 0).unwrap();
        let h = 10.0;
        let pose = RigidTransform::from_translation(Vec3::new(0.0, 0.0, h));
        let model = LidarModel {
            rings: 9,
            azimuth_steps: 8,
            vertical_fov_deg: 90.0,
            max_range: 200.0,
            rate_hz: 10.0,
        };
        let noise = noiseless();
        let mut rng = frame_rng(0, 0, 0);
        let (cloud, labels) = render_lidar(&scene, &|_| pose, 0.0, &model, &noise, &mut rng);

        // Only downward beams return; for 9 rings over 90 degrees those are
        // elevations -11.25 .. -45 in 11.25 degree steps (4 rings) times 8
        // azimuths.
        assert_eq!(cloud.len(), 4 * 8);
        for point in &cloud.points {
            let dir = point.position.normalized();
            let elevation = dir.z.asin();
            assert!(elevation < 0.0);
            let expected = h / (-elevation).sin();
            assert!(
                (point.position.norm() - expected).abs() < 1e-9,
                "range {} vs {}",
                point.position.norm(),
                expected
            );
        }
        assert!(labels.iter().all(|&l| l as usize == scene.ground_class));
    }

    #[test]
    fn noiseless_scores_are_one_hot_at_ground_truth() {
        let reg = ClassRegistry::default_15();
        let scene = generate_scene(&SceneSpec::default(), &reg, 0).unwrap();
        let pose = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 5.0));
        let model = LidarModel {
            rings: 4,
            azimuth_steps: 16,
            vertical_fov_deg: 60.0,
            max_range: 100.0,
            rate_hz: 10.0,
        };
        let noise = noiseless();
        let mut rng = frame_rng(0, 0, 0);
        let (cloud, labels) = render_lidar(&scene, &|_| pose, 0.0, &model, &noise, &mut rng);
        for (p, &l) in cloud.points.iter().zip(&labels) {
            assert_eq!(p.argmax_class, l as usize);
            assert_eq!(p.scores.values()[l as usize], 1.0);
        }
    }

    #[test]
    fn point_count_equals_hitting_rays() {
        // Half the rings look up into the sky over flat ground.
        let reg = ClassRegistry::default_15();
        let scene = generate_scene(&SceneSpec::default(), &reg, 0).unwrap();
        let pose = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 2.0));
        let model = LidarModel {
            rings: 16,
            azimuth_steps: 64,
            vertical_fov_deg: 90.0,
            max_range: 500.0,
            rate_hz: 10.0,
        };
        let noise = noiseless();
        let mut rng = frame_rng(0, 0, 0);
        let (cloud, _) = render_lidar(&scene, &|_| pose, 0.0, &model, &noise, &mut rng);
        // Elevations run 45..-45 in 6 degree steps; rings 0..=7 look up or
        // level (no return over flat ground), rings 8..=15 look down.
        assert_eq!(cloud.len(), 8 * 64);
    }

    #[test]
    fn sweep_offsets_cover_the_revolution() {
        let model = LidarModel {
            rings: 2,
            azimuth_steps: 10,
            vertical_fov_deg: 30.0,
            max_range: 100.0,
            rate_hz: 10.0,
        };
        assert_eq!(model.sweep_offset(0), 0.0);
        assert!((model.sweep_offset(5) - 0.05).abs() < 1e-12);
        assert!(model.sweep_offset(9) < 0.1);
    }
}
