//! Multi-rate flight generation: interleaved LiDAR / RGB / thermal recording
//! plus the exact ground-truth voxel map for evaluation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use semfuse_core::config::HorizonMode;
use semfuse_core::geometry::{
    camera_world_pose, lidar_world_pose, CameraKind, CameraModel, CameraRig, TrajectorySample,
};
use semfuse_core::math::{RigidTransform, UnitQuaternion, Vec3};
use semfuse_core::cloud_fusion::cloud_to_world;
use semfuse_core::{ClassRegistry, Config, Map, PoseTrack, Rig};

use semfuse_replay::payload;
use semfuse_replay::recording::{RecordingWriter, SensorInfo, StreamKind};
use semfuse_replay::map_io;

use crate::camera::{render_rgb, render_thermal};
use crate::error::{Result, SimError};
use crate::lidar::LidarModel;
use crate::noise::{frame_rng, NoiseSampler, SensorNoiseModel};
use crate::scene::{generate_scene, SceneSpec};

pub const GT_MAP_FILE: &str = "gt_map.bin";

const SENSOR_LIDAR: u32 = 0;
const SENSOR_RGB: u32 = 1;
const SENSOR_THERMAL: u32 = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlightSpec {
    pub duration: f64,
    pub waypoints: Vec<Waypoint>,
    #[serde(default = "default_pose_rate")]
    pub pose_rate_hz: f64,
}

fn default_pose_rate() -> f64 {
    50.0
}

impl Default for FlightSpec {
    fn default() -> Self {
        Self {
            duration: 2.0,
            waypoints: vec![
                Waypoint { t: 0.0, position: [0.0, 0.0, 2.0], yaw_deg: 0.0 },
                Waypoint { t: 10.0, position: [2.0, 0.0, 2.0], yaw_deg: 0.0 },
            ],
            pose_rate_hz: 50.0,
        }
    }
}

/// Full simulation input: scene, flight, sensor models, and noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(default)]
    pub scene: SceneSpec,
    #[serde(default)]
    pub flight: FlightSpec,
    #[serde(default)]
    pub lidar: LidarModel,
    #[serde(default = "default_rgb_rate")]
    pub rgb_rate_hz: f64,
    #[serde(default = "default_thermal_rate")]
    pub thermal_rate_hz: f64,
    #[serde(default = "SensorNoiseModel::noiseless")]
    pub lidar_noise: SensorNoiseModel,
    #[serde(default = "SensorNoiseModel::noiseless")]
    pub camera_noise: SensorNoiseModel,
    /// Calibration document; the default rig is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<serde_json::Value>,
    /// Class registry document; the 15-class default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<serde_json::Value>,
}

fn default_rgb_rate() -> f64 {
    30.0
}

fn default_thermal_rate() -> f64 {
    9.0
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            flight: FlightSpec::default(),
            lidar: LidarModel::default(),
            rgb_rate_hz: 30.0,
            thermal_rate_hz: 9.0,
            lidar_noise: SensorNoiseModel::noiseless(),
            camera_noise: SensorNoiseModel::noiseless(),
            calibration: None,
            classes: None,
        }
    }
}

impl SimSpec {
    pub fn registry(&self) -> Result<ClassRegistry> {
        match &self.classes {
            Some(doc) => Ok(ClassRegistry::from_json(&doc.to_string())?),
            None => Ok(ClassRegistry::default_15()),
        }
    }

    pub fn rig(&self) -> Result<Rig> {
        match &self.calibration {
            Some(doc) => Ok(Rig::from_json(&doc.to_string())?),
            None => Ok(default_rig()),
        }
    }
}

/// Camera orientation of the default rig: optical axis along base +x,
/// image u along -y, image v along -z.
fn forward_camera() -> UnitQuaternion<f64> {
    UnitQuaternion::new(0.5, -0.5, 0.5, -0.5)
}

/// Default rig: LiDAR at the base origin, forward RGB camera (90 degree
/// square-ish FoV at 64x48), forward thermal camera at 80x64.
pub fn default_rig() -> Rig {
    let base_from_cam = forward_camera();
    Rig {
        t_base_lidar: RigidTransform::identity(),
        cameras: vec![
            CameraRig {
                name: "rgb".into(),
                kind: CameraKind::Rgb,
                t_cam_base: RigidTransform::new(base_from_cam, Vec3::new(0.1, 0.0, 0.0)).inverse(),
                model: CameraModel {
                    fx: 64.0,
                    fy: 64.0,
                    cx: 32.0,
                    cy: 24.0,
                    width: 64,
                    height: 48,
                },
            },
            CameraRig {
                name: "thermal".into(),
                kind: CameraKind::Thermal,
                t_cam_base: RigidTransform::new(base_from_cam, Vec3::new(0.1, -0.05, 0.0))
                    .inverse(),
                model: CameraModel {
                    fx: 80.0,
                    fy: 80.0,
                    cx: 40.0,
                    cy: 32.0,
                    width: 80,
                    height: 64,
                },
            },
        ],
    }
}

/// Densely sampled base trajectory covering the flight with slack margins.
pub fn sample_trajectory(flight: &FlightSpec) -> Result<Vec<TrajectorySample<f64>>> {
    if flight.waypoints.is_empty() {
        return Err(SimError::spec("flight.waypoints", "at least one waypoint"));
    }
    if flight.duration <= 0.0 {
        return Err(SimError::spec("flight.duration", "must be positive"));
    }
    let mut waypoints: Vec<TrajectorySample<f64>> = flight
        .waypoints
        .iter()
        .map(|w| TrajectorySample {
            stamp: w.t,
            pose: RigidTransform::new(
                UnitQuaternion::from_yaw(w.yaw_deg.to_radians()),
                Vec3::from_array(w.position),
            ),
        })
        .collect();
    waypoints.sort_by(|a, b| a.stamp.partial_cmp(&b.stamp).unwrap());
    let analytic = PoseTrack::new(waypoints).map_err(|e| SimError::Fusion(e))?;

    let margin = 0.3;
    let start = -margin;
    let end = flight.duration + margin;
    let dt = 1.0 / flight.pose_rate_hz;
    let steps = ((end - start) / dt).ceil() as usize + 1;
    let mut samples = Vec::with_capacity(steps);
    for i in 0..steps {
        let t = start + i as f64 * dt;
        // Waypoints may not span the margins; clamp via a generous slack.
        let pose = analytic.interpolate(t, f64::INFINITY).unwrap().pose;
        samples.push(TrajectorySample { stamp: t, pose });
    }
    Ok(samples)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlightSummary {
    pub digest: String,
    pub scene_digest: String,
    pub scans: u64,
    pub rgb_frames: u64,
    pub thermal_frames: u64,
    pub trajectory_samples: u64,
    pub gt_voxels: u64,
    pub points: u64,
}

/// Simulate a flight and write it as a recording (streams, manifest, and the
/// noiseless ground-truth map) into `out_dir`.
pub fn generate_flight(
    spec: &SimSpec,
    cfg: &Config,
    seed: u64,
    out_dir: &Path,
) -> Result<FlightSummary> {
    let registry = spec.registry()?;
    let rig = spec.rig()?;
    spec.lidar_noise
        .validate()
        .map_err(|e| SimError::spec("lidar_noise", e))?;
    spec.camera_noise
        .validate()
        .map_err(|e| SimError::spec("camera_noise", e))?;
    let scene = generate_scene(&spec.scene, &registry, seed)?;
    let lidar_noise = NoiseSampler::new(&spec.lidar_noise, &registry)
        .map_err(|e| SimError::spec("lidar_noise", e))?;
    let camera_noise = NoiseSampler::new(&spec.camera_noise, &registry)
        .map_err(|e| SimError::spec("camera_noise", e))?;
    let gt_noise = NoiseSampler::new(&SensorNoiseModel::noiseless(), &registry)
        .map_err(|e| SimError::spec("noiseless", e))?;

    let samples = sample_trajectory(&spec.flight)?;
    let track = PoseTrack::new(samples.clone())?;

    let sensors = vec![
        SensorInfo { name: "lidar".into(), kind: "lidar".into(), rate_hz: spec.lidar.rate_hz },
        SensorInfo { name: "rgb".into(), kind: "rgb".into(), rate_hz: spec.rgb_rate_hz },
        SensorInfo { name: "thermal".into(), kind: "thermal".into(), rate_hz: spec.thermal_rate_hz },
    ];
    let mut writer = RecordingWriter::create(out_dir, seed, &registry, &rig, sensors)?;
    writer.add_stream("trajectory", StreamKind::Trajectory, "odometry")?;
    writer.add_stream("lidar", StreamKind::Scan, "lidar")?;
    writer.add_stream("lidar_gt", StreamKind::ScanGt, "lidar")?;
    writer.add_stream("rgb", StreamKind::RgbFrame, "rgb")?;
    writer.add_stream("thermal", StreamKind::ThermalFrame, "thermal")?;

    for s in &samples {
        writer.append("trajectory", s.stamp, &payload::encode_pose(&s.pose))?;
    }

    // Ground-truth map: noiseless geometry and labels, full history.
    let mut gt_map = Map::new(
        cfg.voxel_size,
        registry.count(),
        cfg.deque_len.max(1),
        HorizonMode::Fold,
        cfg.scan_merge,
        cfg.epsilon_prob,
    );

    let mut summary = FlightSummary {
        digest: String::new(),
        scene_digest: scene.digest().to_string(),
        scans: 0,
        rgb_frames: 0,
        thermal_frames: 0,
        trajectory_samples: samples.len() as u64,
        gt_voxels: 0,
        points: 0,
    };

    let pose_slack = cfg.pose_slack;
    let lidar_pose_at = |t: f64| {
        lidar_world_pose(&rig, &track, t, pose_slack)
            .expect("trajectory covers the sweep")
            .clone()
    };

    let mut frame = 0u64;
    loop {
        let t = frame as f64 / spec.lidar.rate_hz;
        if t >= spec.flight.duration {
            break;
        }
        let mut rng = frame_rng(seed, SENSOR_LIDAR, frame);
        let (cloud, labels) =
            crate::lidar::render_lidar(&scene, &lidar_pose_at, t, &spec.lidar, &lidar_noise, &mut rng);
        summary.points += cloud.len() as u64;
        writer.append("lidar", t, &payload::encode_scan(&cloud))?;
        writer.append("lidar_gt", t, &payload::encode_labels(&labels))?;

        // Noiseless twin for the ground-truth map.
        let mut gt_rng = frame_rng(seed ^ 0x4754, SENSOR_LIDAR, frame);
        let (gt_cloud, _) =
            crate::lidar::render_lidar(&scene, &lidar_pose_at, t, &spec.lidar, &gt_noise, &mut gt_rng);
        let world = cloud_to_world(&gt_cloud, &track, &rig, cfg)?;
        gt_map.integrate_cloud(&world, frame)?;
        summary.scans += 1;
        frame += 1;
    }

    let mut frame = 0u64;
    loop {
        let t = frame as f64 / spec.rgb_rate_hz;
        if t >= spec.flight.duration {
            break;
        }
        let cam = rig.camera("rgb")?;
        let pose = camera_world_pose(&rig, "rgb", &track, t, pose_slack)?;
        let mut rng = frame_rng(seed, SENSOR_RGB, frame);
        let render = render_rgb(
            &scene,
            &registry,
            &pose,
            &cam.model,
            t,
            spec.lidar.max_range,
            &camera_noise,
            &mut rng,
        );
        writer.append(
            "rgb",
            t,
            &payload::encode_rgb_frame(&render.mask, &render.depth, &render.detections),
        )?;
        summary.rgb_frames += 1;
        frame += 1;
    }

    let mut frame = 0u64;
    loop {
        let t = frame as f64 / spec.thermal_rate_hz;
        if t >= spec.flight.duration {
            break;
        }
        let cam = rig.camera("thermal")?;
        let pose = camera_world_pose(&rig, "thermal", &track, t, pose_slack)?;
        let mut rng = frame_rng(seed, SENSOR_THERMAL, frame);
        let dets = render_thermal(
            &scene,
            &registry,
            &pose,
            &cam.model,
            t,
            spec.lidar.max_range,
            &camera_noise,
            &mut rng,
        );
        writer.append("thermal", t, &payload::encode_thermal_frame(&dets))?;
        summary.thermal_frames += 1;
        frame += 1;
    }

    map_io::write_map_binary(&gt_map, &registry, &out_dir.join(GT_MAP_FILE))?;
    writer.set_gt_map_file(GT_MAP_FILE);
    summary.gt_voxels = gt_map.len() as u64;
    summary.digest = writer.finalize()?;
    Ok(summary)
}
