//! Recording-level IoU evaluation against a ground-truth voxel map.

use std::path::Path;

use semfuse_core::eval::{iou, label_against_map, restrict_to_fov, ConfusionCounts, IouReport};
use semfuse_core::{Cloud, Config, Map, PoseTrack, Rig};

use crate::error::{ReplayError, Result};
use crate::map_io::read_map_binary;
use crate::pipeline::read_fused_clouds;
use crate::recording::{Message, Recording};

/// Pooled confusion counts of a set of world-frame clouds against a map,
/// optionally restricted to a camera's field of view per scan.
pub struct CloudSetEvaluator<'a> {
    gt_map: &'a Map,
    fov: Option<FovRestriction<'a>>,
}

pub struct FovRestriction<'a> {
    pub camera: &'a str,
    pub extr: &'a Rig,
    pub trajectory: &'a PoseTrack,
    pub slack: f64,
}

impl<'a> CloudSetEvaluator<'a> {
    pub fn new(gt_map: &'a Map) -> Self {
        Self { gt_map, fov: None }
    }

    pub fn with_fov(mut self, fov: FovRestriction<'a>) -> Self {
        self.fov = Some(fov);
        self
    }

    pub fn evaluate(&self, clouds: &[Cloud]) -> Result<(ConfusionCounts, IouReport)> {
        let mut counts = ConfusionCounts::new(self.gt_map.classes());
        for cloud in clouds {
            let cloud = match &self.fov {
                Some(fov) => {
                    let rig = fov.extr.camera(fov.camera)?;
                    let base = fov
                        .trajectory
                        .interpolate(cloud.scan_stamp, fov.slack)?
                        .pose;
                    // camera <- world for this scan's reference stamp
                    let cam_from_world = rig.t_cam_base.compose(base.inverse());
                    restrict_to_fov(cloud, &rig.model, &cam_from_world)
                }
                None => cloud.clone(),
            };
            let (_, c) = label_against_map(&cloud, self.gt_map)?;
            counts.merge(&c);
        }
        let report = iou(&counts);
        Ok((counts, report))
    }
}

fn gt_map_of(recording: &Recording, cfg: &Config) -> Result<Map> {
    let path = recording
        .gt_map_path()
        .ok_or_else(|| ReplayError::Manifest("recording has no ground-truth map".into()))?;
    Ok(read_map_binary(&path, cfg.epsilon_prob)?.0)
}

/// Evaluate the fused clouds a pipeline run wrote into `out_dir`.
pub fn evaluate_output(
    recording: &Recording,
    out_dir: &Path,
    cfg: &Config,
    fov_camera: Option<&str>,
) -> Result<(ConfusionCounts, IouReport)> {
    let gt_map = gt_map_of(recording, cfg)?;
    let clouds = read_fused_clouds(out_dir)?;
    evaluate_clouds(recording, &gt_map, &clouds, cfg, fov_camera)
}

/// Evaluate the recording's raw scans (LiDAR-only labels), transformed into
/// the world frame, against the ground-truth map.
pub fn evaluate_raw(
    recording: &Recording,
    cfg: &Config,
    fov_camera: Option<&str>,
) -> Result<(ConfusionCounts, IouReport)> {
    let gt_map = gt_map_of(recording, cfg)?;
    let extr = recording.extrinsics()?;
    let trajectory = recording.trajectory()?;
    let mut clouds = Vec::new();
    for msg in recording.messages()? {
        if let Message::Scan(scan) = msg? {
            clouds.push(semfuse_core::cloud_fusion::cloud_to_world(
                &scan,
                &trajectory,
                &extr,
                cfg,
            )?);
        }
    }
    evaluate_clouds(recording, &gt_map, &clouds, cfg, fov_camera)
}

fn evaluate_clouds(
    recording: &Recording,
    gt_map: &Map,
    clouds: &[Cloud],
    cfg: &Config,
    fov_camera: Option<&str>,
) -> Result<(ConfusionCounts, IouReport)> {
    let extr;
    let trajectory;
    let mut evaluator = CloudSetEvaluator::new(gt_map);
    if let Some(camera) = fov_camera {
        extr = recording.extrinsics()?;
        trajectory = recording.trajectory()?;
        evaluator = evaluator.with_fov(FovRestriction {
            camera,
            extr: &extr,
            trajectory: &trajectory,
            slack: cfg.pose_slack,
        });
    }
    evaluator.evaluate(clouds)
}
