//! Fused 2D segmentation: depth-based reprojection of the previous fused
//! frame, per-class exponential smoothing, and detection overlay (with
//! RGB-to-thermal projection through the depth image).

use crate::cloud::DetectionBox;
use crate::cloud_fusion::{detection_weight, fuse_detection};
use crate::config::FusionConfig;
use crate::error::{FusionError, Result};
use crate::geometry::{
    camera_world_pose, project_point, unproject, CameraKind, CameraModel, Projection,
    RigExtrinsics, Trajectory,
};
use crate::image::{DepthImage, FusedMask, ScoreMask};
use crate::math::RigidTransform;
use crate::prob::{renormalize_sum, ProbabilityVector};
use crate::scalar::Real;

/// Forward-warp the previous fused mask into the current camera frame.
///
/// Every valid-depth pixel is unprojected, moved by the relative camera
/// motion, reprojected, and scattered to the nearest pixel with a depth test
/// (nearest surface wins). Pixels nothing lands on stay invalid.
pub fn warp_previous<T: Real>(
    prev: &FusedMask<T>,
    prev_depth: &DepthImage<T>,
    pose_prev: &RigidTransform<T>,
    pose_cur: &RigidTransform<T>,
    cam: &CameraModel<T>,
) -> Result<FusedMask<T>> {
    if prev.width() != cam.width || prev.height() != cam.height {
        return Err(FusionError::DimensionMismatch {
            context: "warp mask shape",
            expected: cam.width * cam.height,
            actual: prev.width() * prev.height(),
        });
    }
    if prev_depth.width != cam.width || prev_depth.height != cam.height {
        return Err(FusionError::DimensionMismatch {
            context: "warp depth shape",
            expected: cam.width * cam.height,
            actual: prev_depth.width * prev_depth.height,
        });
    }

    let cur_from_prev = pose_cur.inverse().compose(*pose_prev);
    let mut out = FusedMask::invalid(cam.width, cam.height, prev.classes(), prev.stamp());
    let mut depth_buffer = vec![T::infinity(); cam.width * cam.height];

    for v in 0..cam.height {
        for u in 0..cam.width {
            if !prev.is_valid(u, v) {
                continue;
            }
            let Some(d) = prev_depth.valid_at(u, v) else {
                continue;
            };
            let p_prev = unproject(
                cam,
                T::from_usize(u).unwrap(),
                T::from_usize(v).unwrap(),
                d,
            );
            let p_cur = cur_from_prev.apply(p_prev);
            let Projection::Inside { u: pu, v: pv, depth } = project_point(cam, p_cur) else {
                continue;
            };
            let tu = (pu + T::from_f64_lit(0.5)).floor().to_usize().unwrap().min(cam.width - 1);
            let tv = (pv + T::from_f64_lit(0.5)).floor().to_usize().unwrap().min(cam.height - 1);
            let slot = tv * cam.width + tu;
            if depth >= depth_buffer[slot] {
                continue;
            }
            depth_buffer[slot] = depth;
            out.mask
                .pixel_mut(tu, tv)
                .copy_from_slice(prev.mask.pixel(u, v));
            out.set_valid(tu, tv, true);
        }
    }
    Ok(out)
}

/// Per-class exponential smoothing of the current mask against the warped
/// history: `alpha ∘ cur + (1 - alpha) ∘ prev`, renormalized per pixel.
/// Pixels without valid history pass the current scores through.
pub fn temporal_smooth<T: Real>(
    cur: &ScoreMask<T>,
    warped_prev: &FusedMask<T>,
    alpha: &[T],
) -> Result<FusedMask<T>> {
    if alpha.len() != cur.classes {
        return Err(FusionError::DimensionMismatch {
            context: "alpha",
            expected: cur.classes,
            actual: alpha.len(),
        });
    }
    if warped_prev.width() != cur.width || warped_prev.height() != cur.height {
        return Err(FusionError::DimensionMismatch {
            context: "smooth shape",
            expected: cur.width * cur.height,
            actual: warped_prev.width() * warped_prev.height(),
        });
    }
    let mut out = FusedMask::from_mask(cur.clone());
    let one = T::one();
    let mut blended = vec![T::zero(); cur.classes];
    for v in 0..cur.height {
        for u in 0..cur.width {
            if !warped_prev.is_valid(u, v) {
                continue;
            }
            let cur_px = cur.pixel(u, v);
            let prev_px = warped_prev.mask.pixel(u, v);
            for c in 0..cur.classes {
                blended[c] = alpha[c] * cur_px[c] + (one - alpha[c]) * prev_px[c];
            }
            renormalize_sum(&mut blended);
            out.mask.pixel_mut(u, v).copy_from_slice(&blended);
        }
    }
    Ok(out)
}

/// Apply RGB and thermal detection boxes onto a fused mask.
///
/// RGB boxes act directly on pixel coordinates. Thermal boxes act on pixels
/// with valid depth: the pixel is lifted to 3D, moved into the thermal frame
/// through the static rig calibration, projected, and tested there. Boxes
/// across both cameras apply in descending detector score order.
pub fn overlay_detections<T: Real>(
    mask: &FusedMask<T>,
    rgb_dets: &[DetectionBox<T>],
    thermal_dets: &[DetectionBox<T>],
    depth: &DepthImage<T>,
    rgb_cam: &CameraModel<T>,
    thermal_from_rgb: Option<&RigidTransform<T>>,
    thermal_cam: Option<&CameraModel<T>>,
    epsilon_prob: T,
) -> FusedMask<T> {
    if rgb_dets.is_empty() && thermal_dets.is_empty() {
        return mask.clone();
    }

    enum Slot {
        Rgb(usize),
        Thermal(usize),
    }
    let mut order: Vec<(T, usize, Slot)> = Vec::with_capacity(rgb_dets.len() + thermal_dets.len());
    for (i, d) in rgb_dets.iter().enumerate() {
        order.push((d.score, i, Slot::Rgb(i)));
    }
    for (i, d) in thermal_dets.iter().enumerate() {
        order.push((d.score, rgb_dets.len() + i, Slot::Thermal(i)));
    }
    order.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite detector scores")
            .then(a.1.cmp(&b.1))
    });

    let classes = mask.classes();
    let mut out = mask.clone();
    for v in 0..mask.height() {
        for u in 0..mask.width() {
            let uf = T::from_usize(u).unwrap();
            let vf = T::from_usize(v).unwrap();
            // Thermal projection of this pixel, if depth allows it.
            let thermal_uv = match (thermal_from_rgb, thermal_cam, depth.valid_at(u, v)) {
                (Some(t), Some(tc), Some(d)) => {
                    let p_rgb = unproject(rgb_cam, uf, vf, d);
                    project_point(tc, t.apply(p_rgb)).inside().map(|(tu, tv, _)| (tu, tv))
                }
                _ => None,
            };

            let mut current: Option<ProbabilityVector<T>> = None;
            for (_, _, slot) in &order {
                let (det, pu, pv) = match slot {
                    Slot::Rgb(i) => (&rgb_dets[*i], uf, vf),
                    Slot::Thermal(i) => {
                        let Some((tu, tv)) = thermal_uv else { continue };
                        (&thermal_dets[*i], tu, tv)
                    }
                };
                if !det.contains(pu, pv) {
                    continue;
                }
                let w = detection_weight(det, pu, pv);
                let c_det = ProbabilityVector::one_hot_smoothed(det.class_id, classes, epsilon_prob);
                let base = current.take().unwrap_or_else(|| {
                    ProbabilityVector::from_normalized_unchecked(mask.mask.pixel(u, v).to_vec())
                });
                current = Some(fuse_detection(&base, &c_det, w));
            }
            if let Some(p) = current {
                out.mask.pixel_mut(u, v).copy_from_slice(p.values());
            }
        }
    }
    out
}

/// Recurrent image fusion state for one RGB camera stream.
///
/// Holds the single previous fused frame (with its depth and camera pose)
/// that the smoothing recurrence needs.
#[derive(Debug, Clone)]
pub struct ImageFusionState<T: Real> {
    camera: String,
    history: Option<History<T>>,
}

#[derive(Debug, Clone)]
struct History<T: Real> {
    fused: FusedMask<T>,
    depth: DepthImage<T>,
    pose: RigidTransform<T>,
}

impl<T: Real> ImageFusionState<T> {
    pub fn new(camera: impl Into<String>) -> Self {
        Self {
            camera: camera.into(),
            history: None,
        }
    }

    pub fn camera(&self) -> &str {
        &self.camera
    }

    pub fn reset(&mut self) {
        self.history = None;
    }

    /// Process one RGB frame: warp history, smooth, overlay detections, and
    /// store the result as history for the next frame.
    #[allow(clippy::too_many_arguments)]
    pub fn fuse_frame(
        &mut self,
        cur_mask: &ScoreMask<T>,
        cur_depth: &DepthImage<T>,
        rgb_dets: &[DetectionBox<T>],
        thermal_dets: &[DetectionBox<T>],
        trajectory: &Trajectory<T>,
        extr: &RigExtrinsics<T>,
        cfg: &FusionConfig<T>,
    ) -> Result<FusedMask<T>> {
        let rig = extr.camera(&self.camera)?;
        let pose_cur = camera_world_pose(extr, &self.camera, trajectory, cur_mask.stamp, cfg.pose_slack)?;

        let smoothed = match &self.history {
            Some(hist) => {
                let warped = warp_previous(&hist.fused, &hist.depth, &hist.pose, &pose_cur, &rig.model)?;
                temporal_smooth(cur_mask, &warped, &cfg.alpha)?
            }
            None => FusedMask::from_mask(cur_mask.clone()),
        };

        let thermal = extr
            .cameras
            .iter()
            .find(|c| c.kind == CameraKind::Thermal);
        let (thermal_from_rgb, thermal_model) = match thermal {
            Some(t) => (
                Some(t.t_cam_base.compose(rig.t_cam_base.inverse())),
                Some(&t.model),
            ),
            None => (None, None),
        };
        let fused = overlay_detections(
            &smoothed,
            rgb_dets,
            thermal_dets,
            cur_depth,
            &rig.model,
            thermal_from_rgb.as_ref(),
            thermal_model,
            cfg.epsilon_prob,
        );

        self.history = Some(History {
            fused: fused.clone(),
            depth: cur_depth.clone(),
            pose: pose_cur,
        });
        Ok(fused)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraRig, TrajectorySample};
    use crate::math::{UnitQuaternion, Vec3};
    use crate::registry::ClassRegistry;

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

    fn checkerboard_mask(classes: usize) -> ScoreMask<f64> {
        let cam = cam_64x48();
        let mut mask = ScoreMask::new(cam.width, cam.height, classes, 0.0);
        for v in 0..cam.height {
            for u in 0..cam.width {
                let c = (u / 8 + v / 8) % classes;
                mask.set_pixel(u, v, &ProbabilityVector::one_hot_smoothed(c, classes, 1e-3));
            }
        }
        mask
    }

    fn full_depth(d: f64) -> DepthImage<f64> {
        let cam = cam_64x48();
        let mut depth = DepthImage::new(cam.width, cam.height, 0.0);
        for v in 0..cam.height {
            for u in 0..cam.width {
                depth.set(u, v, d);
            }
        }
        depth
    }

    #[test]
    fn zero_motion_warp_is_identity() {
        let cam = cam_64x48();
        let mask = FusedMask::from_mask(checkerboard_mask(4));
        let depth = full_depth(5.0);
        let pose = RigidTransform::identity();
        let warped = warp_previous(&mask, &depth, &pose, &pose, &cam).unwrap();
        assert_eq!(warped.valid_count(), cam.width * cam.height);
        for v in 0..cam.height {
            for u in 0..cam.width {
                assert_eq!(warped.mask.pixel(u, v), mask.mask.pixel(u, v));
            }
        }
    }

    #[test]
    fn invalid_depth_yields_invalid_warp() {
        let cam = cam_64x48();
        let mask = FusedMask::from_mask(checkerboard_mask(4));
        let depth = DepthImage::new(cam.width, cam.height, 0.0); // all zero
        let pose = RigidTransform::identity();
        let warped = warp_previous(&mask, &depth, &pose, &pose, &cam).unwrap();
        assert_eq!(warped.valid_count(), 0);
    }

    #[test]
    fn planar_translation_shifts_by_closed_form() {
        // Camera translating along +x by dx against a plane at depth z shifts
        // the image content by fx*dx/z pixels in -u.
        let cam = cam_64x48();
        let mask = FusedMask::from_mask(checkerboard_mask(4));
        let z = 8.0;
        let dx = 1.0;
        let depth = full_depth(z);
        let pose_prev = RigidTransform::identity();
        let pose_cur = RigidTransform::from_translation(Vec3::new(dx, 0.0, 0.0));
        let warped = warp_previous(&mask, &depth, &pose_prev, &pose_cur, &cam).unwrap();
        let shift = (cam.fx * dx / z).round() as isize; // 8 pixels
        assert_eq!(shift, 8);
        for v in 0..cam.height {
            for u in 0..cam.width {
                let src_u = u as isize + shift;
                if src_u >= cam.width as isize {
                    continue;
                }
                assert!(warped.is_valid(u, v), "pixel ({u},{v}) should receive data");
                assert_eq!(
                    warped.mask.pixel(u, v),
                    mask.mask.pixel(src_u as usize, v),
                    "pixel ({u},{v})"
                );
            }
        }
    }

    #[test]
    fn smoothing_boundaries_are_bitwise() {
        let cur = checkerboard_mask(4);
        let mut prev = FusedMask::from_mask(checkerboard_mask(4));
        for v in 0..prev.height() {
            for u in 0..prev.width() {
                prev.mask
                    .set_pixel(u, v, &ProbabilityVector::one_hot_smoothed(3, 4, 1e-3));
            }
        }
        let all_one = temporal_smooth(&cur, &prev, &[1.0; 4]).unwrap();
        let all_zero = temporal_smooth(&cur, &prev, &[0.0; 4]).unwrap();
        for v in 0..cur.height {
            for u in 0..cur.width {
                assert_eq!(all_one.mask.pixel(u, v), cur.pixel(u, v));
                assert_eq!(all_zero.mask.pixel(u, v), prev.mask.pixel(u, v));
            }
        }
    }

    #[test]
    fn smoothing_passes_through_invalid_history() {
        let cur = checkerboard_mask(4);
        let prev = FusedMask::invalid(cur.width, cur.height, 4, 0.0);
        let out = temporal_smooth(&cur, &prev, &[0.0; 4]).unwrap();
        for v in 0..cur.height {
            for u in 0..cur.width {
                assert_eq!(out.mask.pixel(u, v), cur.pixel(u, v));
            }
        }
    }

    #[test]
    fn smoothing_single_pixel_matches_direct_formula() {
        // Hand-built 1x1 mask with per-class alpha.
        let mut cur = ScoreMask::new(1, 1, 2, 0.0);
        cur.set_pixel(0, 0, &ProbabilityVector::new(vec![0.9, 0.1]).unwrap());
        let mut prev = FusedMask::from_mask(ScoreMask::new(1, 1, 2, 0.0));
        prev.mask
            .set_pixel(0, 0, &ProbabilityVector::new(vec![0.2, 0.8]).unwrap());
        let alpha = [0.9, 0.2];
        let out = temporal_smooth(&cur, &prev, &alpha).unwrap();
        let raw = [
            0.9 * 0.9 + 0.1 * 0.2, // 0.83
            0.2 * 0.1 + 0.8 * 0.8, // 0.66
        ];
        let sum: f64 = raw.iter().sum();
        let px = out.mask.pixel(0, 0);
        assert!((px[0] - raw[0] / sum).abs() < 1e-12);
        assert!((px[1] - raw[1] / sum).abs() < 1e-12);
    }

    #[test]
    fn smoothing_rejects_wrong_alpha_len() {
        let cur = checkerboard_mask(4);
        let prev = FusedMask::from_mask(checkerboard_mask(4));
        assert!(temporal_smooth(&cur, &prev, &[0.5; 3]).is_err());
    }

    #[test]
    fn smoothing_is_a_contraction() {
        // Equal per-class alpha keeps the blend sum at 1 (no renormalization),
        // where the contraction bound of the plain recurrence is exact.
        // Per-class alphas trade that bound for renormalized outputs; the
        // convergence-speed test below covers them.
        let cur = checkerboard_mask(4);
        let mut prev = FusedMask::from_mask(checkerboard_mask(4));
        for v in 0..prev.height() {
            for u in 0..prev.width() {
                prev.mask
                    .set_pixel(u, v, &ProbabilityVector::one_hot_smoothed((u + v) % 4, 4, 0.05));
            }
        }
        let alpha = [0.3; 4];
        let min_alpha = 0.3;
        let out = temporal_smooth(&cur, &prev, &alpha).unwrap();
        for v in 0..cur.height {
            for u in 0..cur.width {
                for c in 0..4 {
                    let d_out = (out.mask.pixel(u, v)[c] - cur.pixel(u, v)[c]).abs();
                    let d_prev = (prev.mask.pixel(u, v)[c] - cur.pixel(u, v)[c]).abs();
                    assert!(
                        d_out <= (1.0 - min_alpha) * d_prev + 1e-12,
                        "({u},{v},{c}): {d_out} vs {d_prev}"
                    );
                }
            }
        }
    }

    #[test]
    fn overlay_with_no_detections_is_identity() {
        let mask = FusedMask::from_mask(checkerboard_mask(4));
        let depth = full_depth(4.0);
        let out = overlay_detections(&mask, &[], &[], &depth, &cam_64x48(), None, None, 1e-9);
        for v in 0..mask.height() {
            for u in 0..mask.width() {
                assert_eq!(out.mask.pixel(u, v), mask.mask.pixel(u, v));
            }
        }
    }

    #[test]
    fn full_score_box_pins_center_pixel_to_detection() {
        let mask = FusedMask::from_mask(checkerboard_mask(4));
        let depth = full_depth(4.0);
        let det = DetectionBox::new(2, 1.0, 20.0, 10.0, 40.0, 30.0).unwrap();
        let out = overlay_detections(
            &mask,
            std::slice::from_ref(&det),
            &[],
            &depth,
            &cam_64x48(),
            None,
            None,
            1e-9,
        );
        // Box center (30, 20): w_det = 1, so the pixel becomes c_det exactly.
        let expected = ProbabilityVector::one_hot_smoothed(2, 4, 1e-9);
        assert_eq!(out.mask.pixel(30, 20), expected.values());
        // A pixel far outside the box is untouched.
        assert_eq!(out.mask.pixel(5, 40), mask.mask.pixel(5, 40));
    }

    #[test]
    fn thermal_overlay_matches_per_pixel_projection_oracle() {
        // Aligned rig: thermal camera identical to RGB, offset 0.2 m along x.
        let rgb_cam = cam_64x48();
        let thermal_cam = cam_64x48();
        let thermal_from_rgb =
            RigidTransform::from_translation(Vec3::new(-0.2, 0.0, 0.0));
        let mask = FusedMask::from_mask(checkerboard_mask(4));
        let mut depth = full_depth(6.0);
        // A band without depth skips the thermal overlay.
        for u in 0..10 {
            depth.set(u, 0, 0.0);
        }
        let det = DetectionBox::new(1, 0.8, 24.0, 16.0, 44.0, 32.0).unwrap();
        let out = overlay_detections(
            &mask,
            &[],
            std::slice::from_ref(&det),
            &depth,
            &rgb_cam,
            Some(&thermal_from_rgb),
            Some(&thermal_cam),
            1e-9,
        );
        let c_det = ProbabilityVector::one_hot_smoothed(1, 4, 1e-9);
        for v in 0..48 {
            for u in 0..64 {
                let expected = match depth.valid_at(u, v) {
                    Some(d) => {
                        let p = unproject(&rgb_cam, u as f64, v as f64, d);
                        match project_point(&thermal_cam, thermal_from_rgb.apply(p)) {
                            Projection::Inside { u: tu, v: tv, .. } if det.contains(tu, tv) => {
                                let w = detection_weight(&det, tu, tv);
                                let base = ProbabilityVector::new(
                                    mask.mask.pixel(u, v).to_vec(),
                                )
                                .unwrap();
                                fuse_detection(&base, &c_det, w).into_values()
                            }
                            _ => mask.mask.pixel(u, v).to_vec(),
                        }
                    }
                    None => mask.mask.pixel(u, v).to_vec(),
                };
                assert_eq!(out.mask.pixel(u, v), &expected[..], "pixel ({u},{v})");
            }
        }
        // The offset rig must have shifted person mass for some pixels.
        let gained = (0..48)
            .flat_map(|v| (0..64).map(move |u| (u, v)))
            .filter(|&(u, v)| out.mask.pixel(u, v)[1] > mask.mask.pixel(u, v)[1] + 0.05)
            .count();
        assert!(gained > 50, "thermal overlay had an effect ({gained} pixels)");
    }

    fn hover_trajectory() -> Trajectory<f64> {
        Trajectory::new(vec![
            TrajectorySample {
                stamp: -1.0,
                pose: RigidTransform::identity(),
            },
            TrajectorySample {
                stamp: 100.0,
                pose: RigidTransform::identity(),
            },
        ])
        .unwrap()
    }

    fn identity_rig() -> RigExtrinsics<f64> {
        RigExtrinsics {
            t_base_lidar: RigidTransform::identity(),
            cameras: vec![CameraRig {
                name: "rgb".into(),
                kind: CameraKind::Rgb,
                t_cam_base: RigidTransform::new(UnitQuaternion::identity(), Vec3::zero()),
                model: cam_64x48(),
            }],
        }
    }

    #[test]
    fn first_frame_without_detections_passes_through() {
        let reg = ClassRegistry::new(vec![("a", false), ("b", false), ("c", true), ("d", false)])
            .unwrap();
        let cfg = FusionConfig::<f64>::for_registry(&reg);
        let mut state = ImageFusionState::new("rgb");
        let mask = checkerboard_mask(4);
        let depth = full_depth(5.0);
        let out = state
            .fuse_frame(&mask, &depth, &[], &[], &hover_trajectory(), &identity_rig(), &cfg)
            .unwrap();
        for v in 0..mask.height {
            for u in 0..mask.width {
                assert_eq!(out.mask.pixel(u, v), mask.pixel(u, v));
            }
        }
    }

    #[test]
    fn static_scene_converges_to_fixed_point() {
        let reg = ClassRegistry::new(vec![("a", false), ("b", false), ("c", true), ("d", false)])
            .unwrap();
        let cfg = FusionConfig::<f64>::for_registry(&reg);
        let mut state = ImageFusionState::new("rgb");
        let traj = hover_trajectory();
        let extr = identity_rig();
        let depth = full_depth(5.0);

        // Start the recurrence somewhere else, then feed a constant input.
        let mut warm = checkerboard_mask(4);
        for v in 0..warm.height {
            for u in 0..warm.width {
                warm.set_pixel(u, v, &ProbabilityVector::uniform(4));
            }
        }
        state
            .fuse_frame(&warm, &depth, &[], &[], &traj, &extr, &cfg)
            .unwrap();

        let target = checkerboard_mask(4);
        let mut last = None;
        for frame in 1..=50 {
            let mut mask = target.clone();
            mask.stamp = frame as f64 * 0.1;
            let mut d = depth.clone();
            d.stamp = mask.stamp;
            last = Some(
                state
                    .fuse_frame(&mask, &d, &[], &[], &traj, &extr, &cfg)
                    .unwrap(),
            );
        }
        let out = last.unwrap();
        for v in 0..target.height {
            for u in 0..target.width {
                for c in 0..4 {
                    assert!(
                        (out.mask.pixel(u, v)[c] - target.pixel(u, v)[c]).abs() < 1e-6,
                        "pixel ({u},{v},{c}) has not converged"
                    );
                }
            }
        }
    }

    #[test]
    fn flicker_argmax_follows_scalar_recurrence_oracle() {
        // 1x1 stream alternating A,A,B with a small alpha: the smoothed
        // argmax must match a direct scalar simulation of the recurrence.
        let reg = ClassRegistry::new(vec![("a", false), ("b", false)]).unwrap();
        let mut cfg = FusionConfig::<f64>::for_registry(&reg);
        cfg.alpha = vec![0.2, 0.2];
        let extr = {
            let mut rig = identity_rig();
            rig.cameras[0].model = CameraModel {
                fx: 1.0,
                fy: 1.0,
                cx: 0.5,
                cy: 0.5,
                width: 1,
                height: 1,
            };
            rig
        };
        let traj = hover_trajectory();
        let mut state = ImageFusionState::new("rgb");

        let a = ProbabilityVector::new(vec![0.9, 0.1]).unwrap();
        let b = ProbabilityVector::new(vec![0.1, 0.9]).unwrap();
        let mut depth = DepthImage::new(1, 1, 0.0);
        depth.set(0, 0, 3.0);

        let mut oracle = [0.5f64, 0.5];
        for frame in 0..60 {
            let input = if frame % 3 == 2 { &b } else { &a };
            let mut mask = ScoreMask::new(1, 1, 2, frame as f64 * 0.1);
            mask.set_pixel(0, 0, input);
            let mut d = depth.clone();
            d.stamp = mask.stamp;
            let out = state
                .fuse_frame(&mask, &d, &[], &[], &traj, &extr, &cfg)
                .unwrap();

            if frame > 0 {
                let raw = [
                    0.2 * input.values()[0] + 0.8 * oracle[0],
                    0.2 * input.values()[1] + 0.8 * oracle[1],
                ];
                let sum = raw[0] + raw[1];
                oracle = [raw[0] / sum, raw[1] / sum];
            } else {
                oracle = [input.values()[0], input.values()[1]];
            }
            let px = out.mask.pixel(0, 0);
            assert!((px[0] - oracle[0]).abs() < 1e-9, "frame {frame}");
            if frame > 5 {
                // Temporal majority is class a.
                assert_eq!(out.mask.argmax(0, 0), 0, "frame {frame}");
            }
        }
    }

    #[test]
    fn dynamic_classes_converge_faster_than_static() {
        let reg = ClassRegistry::new(vec![("static", false), ("dynamic", true)]).unwrap();
        let cfg = FusionConfig::<f64>::for_registry(&reg); // alpha 0.3 / 0.8
        let extr = {
            let mut rig = identity_rig();
            rig.cameras[0].model = CameraModel {
                fx: 1.0,
                fy: 1.0,
                cx: 0.5,
                cy: 0.5,
                width: 1,
                height: 1,
            };
            rig
        };
        let traj = hover_trajectory();
        let mut depth = DepthImage::new(1, 1, 0.0);
        depth.set(0, 0, 3.0);

        // Step change from class 0 to class 1 and vice versa; count frames
        // until within 0.01 of the new input per class.
        let mut state = ImageFusionState::new("rgb");
        let from = ProbabilityVector::new(vec![0.99, 0.01]).unwrap();
        let to = ProbabilityVector::new(vec![0.01, 0.99]).unwrap();
        let mut mask = ScoreMask::new(1, 1, 2, 0.0);
        mask.set_pixel(0, 0, &from);
        state
            .fuse_frame(&mask, &depth, &[], &[], &traj, &extr, &cfg)
            .unwrap();

        let mut static_frames = None;
        let mut dynamic_frames = None;
        for frame in 1..200 {
            let mut m = ScoreMask::new(1, 1, 2, frame as f64 * 0.1);
            m.set_pixel(0, 0, &to);
            let mut d = depth.clone();
            d.stamp = m.stamp;
            let out = state
                .fuse_frame(&m, &d, &[], &[], &traj, &extr, &cfg)
                .unwrap();
            let px = out.mask.pixel(0, 0);
            if static_frames.is_none() && (px[0] - to.values()[0]).abs() < 0.01 {
                static_frames = Some(frame);
            }
            if dynamic_frames.is_none() && (px[1] - to.values()[1]).abs() < 0.01 {
                dynamic_frames = Some(frame);
            }
            if static_frames.is_some() && dynamic_frames.is_some() {
                break;
            }
        }
        let (s, d) = (static_frames.unwrap(), dynamic_frames.unwrap());
        assert!(d <= s, "dynamic class ({d} frames) must not lag static ({s} frames)");
    }
}
