//! Augmenting a LiDAR scan with projected image segmentation and detections.
//!
//! Per point: project through the motion-compensating chain into each camera,
//! blend the bilinear mask sample into the point scores, then overlay
//! detections whose boxes contain the projection, restricted to the
//! foreground distance cluster of each box.

use crate::cloud::{CloudFrame, DetectionBox, SemanticCloud};
use crate::config::{FusionConfig, TimestampMode};
use crate::error::{FusionError, Result};
use crate::geometry::{
    bilinear_sample, chain_transform, project_point, CameraKind, Projection, RigExtrinsics,
    Trajectory,
};
use crate::image::ScoreMask;
use crate::prob::ProbabilityVector;
use crate::scalar::Real;

/// Linear point/image score blend: `(1 - w_img) * c_lidar + w_img * c_img`.
pub fn fuse_point_scores<T: Real>(
    c_lidar: &ProbabilityVector<T>,
    c_img: &ProbabilityVector<T>,
    w_img: T,
) -> ProbabilityVector<T> {
    debug_assert_eq!(c_lidar.len(), c_img.len());
    let keep = T::one() - w_img;
    let values = c_lidar
        .values()
        .iter()
        .zip(c_img.values())
        .map(|(&l, &i)| keep * l + w_img * i)
        .collect();
    ProbabilityVector::from_normalized_unchecked(values)
}

/// Detection weight at a projected point: the detector score shaped by an
/// unnormalized Gaussian centered on the box, sigma half the box extent.
pub fn detection_weight<T: Real>(det: &DetectionBox<T>, u: T, v: T) -> T {
    let (cu, cv) = det.center();
    let half = T::from_f64_lit(0.5);
    let sigma_u = det.width() * half;
    let sigma_v = det.height() * half;
    let du = (u - cu) / sigma_u;
    let dv = (v - cv) / sigma_v;
    det.score * (-(du * du) * half).exp() * (-(dv * dv) * half).exp()
}

/// Linear detection blend: `(1 - w_det) * c_fused + w_det * c_det`.
pub fn fuse_detection<T: Real>(
    c_fused: &ProbabilityVector<T>,
    c_det: &ProbabilityVector<T>,
    w_det: T,
) -> ProbabilityVector<T> {
    debug_assert_eq!(c_fused.len(), c_det.len());
    let keep = T::one() - w_det;
    let values = c_fused
        .values()
        .iter()
        .zip(c_det.values())
        .map(|(&f, &d)| keep * f + w_det * d)
        .collect();
    ProbabilityVector::from_normalized_unchecked(values)
}

/// Linear-interpolated q-quantile of an unsorted sample.
fn quantile<T: Real>(sorted: &[T], q: T) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * T::from_usize(n - 1).unwrap();
    let lo = h.floor();
    let idx = lo.to_usize().unwrap().min(n - 1);
    let hi_idx = (idx + 1).min(n - 1);
    let frac = h - lo;
    sorted[idx] + (sorted[hi_idx] - sorted[idx]) * frac
}

/// Indices of the foreground cluster: distances within the q-quantile plus a
/// margin. The nearest point is always kept; an empty input yields an empty
/// result.
pub fn foreground_filter<T: Real>(distances: &[T], q: T, margin: T) -> Vec<usize> {
    if distances.is_empty() {
        return Vec::new();
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let threshold = quantile(&sorted, q) + margin;
    distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Segmentation mask and detections of one camera frame, as consumed by the
/// scan augmentation. Thermal cameras carry detections only.
#[derive(Debug, Clone)]
pub struct CameraObservation<T: Real> {
    pub camera: String,
    /// Frame capture stamp, seconds.
    pub stamp: f64,
    pub mask: Option<ScoreMask<T>>,
    pub detections: Vec<DetectionBox<T>>,
}

/// Non-fatal issues recorded while augmenting a scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FusionWarning {
    /// RGB camera frame arrived without a segmentation mask; its Eq-style
    /// score blend was skipped (detections still apply).
    MissingMask { camera: String },
    /// Camera name not present in the rig calibration.
    UnknownCamera { camera: String },
}

/// An augmented scan plus the warnings gathered along the way.
#[derive(Debug, Clone)]
pub struct AugmentedScan<T: Real> {
    pub cloud: SemanticCloud<T>,
    pub warnings: Vec<FusionWarning>,
}

struct ProjectedHit<T: Real> {
    point_index: usize,
    u: T,
    v: T,
    /// Euclidean distance to the camera origin.
    distance: T,
}

/// Augment a LiDAR scan with the given camera observations.
///
/// Point order and count are preserved; points outside every camera image
/// keep their LiDAR scores bitwise. Detection boxes apply in descending
/// detector score order.
pub fn augment_scan<T: Real>(
    scan: &SemanticCloud<T>,
    observations: &[CameraObservation<T>],
    trajectory: &Trajectory<T>,
    extr: &RigExtrinsics<T>,
    cfg: &FusionConfig<T>,
) -> Result<AugmentedScan<T>> {
    if scan.frame != CloudFrame::Lidar {
        return Err(FusionError::WrongFrame("augment_scan"));
    }
    let per_point = cfg.timestamp_mode == TimestampMode::PerPoint;

    // Trajectory must cover the scan; otherwise the whole scan is rejected.
    let scan_span = scan_stamp_span(scan, per_point);
    for stamp in [scan_span.0, scan_span.1] {
        if !trajectory.covers(stamp, cfg.pose_slack) {
            return Err(FusionError::ScanRejected(format!(
                "trajectory does not cover point stamp {stamp}"
            )));
        }
    }

    let mut warnings = Vec::new();
    let mut points = scan.points.clone();

    // Boxes across all cameras, strongest detector score first.
    let mut ordered_boxes: Vec<(usize, usize)> = Vec::new(); // (observation, box)
    for (oi, obs) in observations.iter().enumerate() {
        for bi in 0..obs.detections.len() {
            ordered_boxes.push((oi, bi));
        }
    }
    ordered_boxes.sort_by(|a, b| {
        let sa = observations[a.0].detections[a.1].score;
        let sb = observations[b.0].detections[b.1].score;
        sb.partial_cmp(&sa)
            .expect("finite detector scores")
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });

    // Projections inside each box, gathered per box for the foreground filter.
    let mut box_hits: Vec<Vec<ProjectedHit<T>>> =
        (0..ordered_boxes.len()).map(|_| Vec::new()).collect();

    for (oi, obs) in observations.iter().enumerate() {
        let cam = match extr.camera(&obs.camera) {
            Ok(cam) => cam,
            Err(_) => {
                warnings.push(FusionWarning::UnknownCamera {
                    camera: obs.camera.clone(),
                });
                continue;
            }
        };
        if cam.kind == CameraKind::Rgb && obs.mask.is_none() {
            warnings.push(FusionWarning::MissingMask {
                camera: obs.camera.clone(),
            });
        }

        // Chain is per point when point stamps differ, shared otherwise.
        let scan_chain = chain_transform(
            extr,
            &obs.camera,
            trajectory,
            obs.stamp,
            scan.scan_stamp,
            cfg.pose_slack,
        )?;

        for (pi, point) in points.iter_mut().enumerate() {
            let transform = if per_point && point.stamp_offset != 0.0 {
                chain_transform(
                    extr,
                    &obs.camera,
                    trajectory,
                    obs.stamp,
                    scan.scan_stamp + point.stamp_offset,
                    cfg.pose_slack,
                )?
            } else {
                scan_chain
            };
            let p_cam = transform.apply(point.position);
            let (u, v) = match project_point(&cam.model, p_cam) {
                Projection::Inside { u, v, .. } => (u, v),
                _ => continue,
            };

            if let Some(mask) = &obs.mask {
                if let Some(c_img) = bilinear_sample(mask, u, v) {
                    let fused = fuse_point_scores(&point.scores, &c_img, cfg.w_img);
                    point.set_scores(fused);
                }
            }

            let distance = p_cam.norm();
            for (slot, &(boi, bbi)) in ordered_boxes.iter().enumerate() {
                if boi != oi {
                    continue;
                }
                if observations[boi].detections[bbi].contains(u, v) {
                    box_hits[slot].push(ProjectedHit {
                        point_index: pi,
                        u,
                        v,
                        distance,
                    });
                }
            }
        }
    }

    // Detection overlay on the foreground cluster of each box.
    for (slot, &(oi, bi)) in ordered_boxes.iter().enumerate() {
        let hits = &box_hits[slot];
        if hits.is_empty() {
            continue;
        }
        let det = &observations[oi].detections[bi];
        let c_det = ProbabilityVector::one_hot_smoothed(
            det.class_id,
            points[0].scores.len(),
            cfg.epsilon_prob,
        );
        let distances: Vec<T> = hits.iter().map(|h| h.distance).collect();
        for idx in foreground_filter(&distances, cfg.quantile_q, cfg.foreground_margin) {
            let hit = &hits[idx];
            let w_det = detection_weight(det, hit.u, hit.v);
            let point = &mut points[hit.point_index];
            let fused = fuse_detection(&point.scores, &c_det, w_det);
            point.set_scores(fused);
        }
    }

    Ok(AugmentedScan {
        cloud: SemanticCloud::new(points, scan.scan_stamp, CloudFrame::Lidar),
        warnings,
    })
}

fn scan_stamp_span<T: Real>(scan: &SemanticCloud<T>, per_point: bool) -> (f64, f64) {
    if !per_point || scan.points.is_empty() {
        return (scan.scan_stamp, scan.scan_stamp);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in &scan.points {
        let s = scan.scan_stamp + p.stamp_offset;
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (lo.min(scan.scan_stamp), hi.max(scan.scan_stamp))
}

/// Transform a LiDAR-frame cloud into the world frame using the trajectory,
/// honoring the per-point timestamp mode.
pub fn cloud_to_world<T: Real>(
    cloud: &SemanticCloud<T>,
    trajectory: &Trajectory<T>,
    extr: &RigExtrinsics<T>,
    cfg: &FusionConfig<T>,
) -> Result<SemanticCloud<T>> {
    if cloud.frame == CloudFrame::World {
        return Ok(cloud.clone());
    }
    let per_point = cfg.timestamp_mode == TimestampMode::PerPoint;
    let scan_pose = crate::geometry::lidar_world_pose(extr, trajectory, cloud.scan_stamp, cfg.pose_slack)?;
    let mut points = cloud.points.clone();
    for point in points.iter_mut() {
        let pose = if per_point && point.stamp_offset != 0.0 {
            crate::geometry::lidar_world_pose(
                extr,
                trajectory,
                cloud.scan_stamp + point.stamp_offset,
                cfg.pose_slack,
            )?
        } else {
            scan_pose
        };
        point.position = pose.apply(point.position);
    }
    Ok(SemanticCloud::new(points, cloud.scan_stamp, CloudFrame::World))
}
