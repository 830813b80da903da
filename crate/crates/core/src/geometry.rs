//! Pose interpolation, the LiDAR-to-camera transform chain, pinhole
//! projection, and mask sampling.
//!
//! The transform chain for a point captured at `t_l` and observed by a camera
//! frame at `t_c` is
//!
//! ```text
//! T = T_cam_base * inv(world_T_base(t_c)) * world_T_base(t_l) * T_base_lidar
//! ```
//!
//! with both base poses interpolated on the continuous-time trajectory
//! (linear translation, shortest-arc slerp rotation).

use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::image::ScoreMask;
use crate::math::{RigidTransform, UnitQuaternion, Vec3};
use crate::prob::{renormalize_sum, ProbabilityVector};
use crate::scalar::Real;

/// One timestamped base pose (base frame in world).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample<T: Real> {
    /// Seconds on the recording clock.
    pub stamp: f64,
    pub pose: RigidTransform<T>,
}

/// Stamp-sorted pose sequence with strictly increasing stamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    samples: Vec<TrajectorySample<T>>,
}

/// Result of a trajectory query; `clamped` is set when the query stamp fell
/// outside the sampled range but within the configured slack.
#[derive(Debug, Clone, Copy)]
pub struct InterpolatedPose<T: Real> {
    pub pose: RigidTransform<T>,
    pub clamped: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn new(samples: Vec<TrajectorySample<T>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(FusionError::EmptyTrajectory);
        }
        for pair in samples.windows(2) {
            if pair[1].stamp <= pair[0].stamp {
                return Err(FusionError::InvalidConfig(format!(
                    "trajectory stamps must strictly increase ({} then {})",
                    pair[0].stamp, pair[1].stamp
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TrajectorySample<T>] {
        &self.samples
    }

    pub fn first_stamp(&self) -> f64 {
        self.samples[0].stamp
    }

    pub fn last_stamp(&self) -> f64 {
        self.samples[self.samples.len() - 1].stamp
    }

    pub fn covers(&self, stamp: f64, slack: f64) -> bool {
        stamp >= self.first_stamp() - slack && stamp <= self.last_stamp() + slack
    }

    /// Pose at `t`: exact sample on a stamp hit, interpolated between the
    /// bracketing samples otherwise. Queries outside the range by at most
    /// `slack` seconds clamp to the nearest endpoint and set the flag.
    pub fn interpolate(&self, t: f64, slack: f64) -> Result<InterpolatedPose<T>> {
        let first = self.first_stamp();
        let last = self.last_stamp();
        if t < first - slack || t > last + slack {
            return Err(FusionError::StampOutOfRange {
                stamp: t,
                first,
                last,
                slack,
            });
        }
        if t <= first {
            return Ok(InterpolatedPose {
                pose: self.samples[0].pose,
                clamped: t < first,
            });
        }
        if t >= last {
            return Ok(InterpolatedPose {
                pose: self.samples[self.samples.len() - 1].pose,
                clamped: t > last,
            });
        }
        let idx = self
            .samples
            .partition_point(|s| s.stamp <= t);
        let lo = &self.samples[idx - 1];
        if lo.stamp == t {
            return Ok(InterpolatedPose {
                pose: lo.pose,
                clamped: false,
            });
        }
        let hi = &self.samples[idx];
        let u = (t - lo.stamp) / (hi.stamp - lo.stamp);
        let u_t = T::from_f64_lit(u);
        Ok(InterpolatedPose {
            pose: RigidTransform::new(
                lo.pose.rotation.slerp(hi.pose.rotation, u_t),
                lo.pose.translation.lerp(hi.pose.translation, u_t),
            ),
            clamped: false,
        })
    }
}

/// Rectified pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CameraModel<T: Real> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> CameraModel<T> {
    pub fn validate(&self) -> Result<()> {
        if self.fx <= T::zero() || self.fy <= T::zero() {
            return Err(FusionError::InvalidCalibration(
                "focal lengths must be positive".into(),
            ));
        }
        let w = T::from_usize(self.width).unwrap();
        let h = T::from_usize(self.height).unwrap();
        if self.cx < T::zero() || self.cx > w || self.cy < T::zero() || self.cy > h {
            return Err(FusionError::InvalidCalibration(
                "principal point outside image".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of projecting a camera-frame point onto the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection<T: Real> {
    /// Inside `[0, W-1] x [0, H-1]`.
    Inside { u: T, v: T, depth: T },
    /// In front of the camera but off the pixel grid.
    OutOfImage { u: T, v: T, depth: T },
    BehindCamera,
}

impl<T: Real> Projection<T> {
    pub fn inside(&self) -> Option<(T, T, T)> {
        match *self {
            Projection::Inside { u, v, depth } => Some((u, v, depth)),
            _ => None,
        }
    }
}

/// Depth threshold below which a point counts as behind the camera (meters).
const MIN_DEPTH: f64 = 1e-6;

/// Pinhole projection of a camera-frame point.
pub fn project_point<T: Real>(cam: &CameraModel<T>, p_cam: Vec3<T>) -> Projection<T> {
    if p_cam.z <= T::from_f64_lit(MIN_DEPTH) {
        return Projection::BehindCamera;
    }
    let u = cam.fx * p_cam.x / p_cam.z + cam.cx;
    let v = cam.fy * p_cam.y / p_cam.z + cam.cy;
    let w = T::from_usize(cam.width - 1).unwrap();
    let h = T::from_usize(cam.height - 1).unwrap();
    if u >= T::zero() && u <= w && v >= T::zero() && v <= h {
        Projection::Inside { u, v, depth: p_cam.z }
    } else {
        Projection::OutOfImage { u, v, depth: p_cam.z }
    }
}

/// Inverse pinhole: pixel plus depth back to the camera frame.
pub fn unproject<T: Real>(cam: &CameraModel<T>, u: T, v: T, depth: T) -> Vec3<T> {
    Vec3::new(
        (u - cam.cx) / cam.fx * depth,
        (v - cam.cy) / cam.fy * depth,
        depth,
    )
}

/// Channel-wise bilinear blend of the four neighboring pixels, renormalized.
/// Returns `None` outside `[0, W-1] x [0, H-1]`.
pub fn bilinear_sample<T: Real>(mask: &ScoreMask<T>, u: T, v: T) -> Option<ProbabilityVector<T>> {
    let w = T::from_usize(mask.width - 1).unwrap();
    let h = T::from_usize(mask.height - 1).unwrap();
    if !(u >= T::zero() && u <= w && v >= T::zero() && v <= h) {
        return None;
    }
    let u0f = u.floor();
    let v0f = v.floor();
    let u0 = u0f.to_usize().unwrap().min(mask.width - 1);
    let v0 = v0f.to_usize().unwrap().min(mask.height - 1);
    let u1 = (u0 + 1).min(mask.width - 1);
    let v1 = (v0 + 1).min(mask.height - 1);
    let fu = u - u0f;
    let fv = v - v0f;
    let one = T::one();

    let w00 = (one - fu) * (one - fv);
    let w10 = fu * (one - fv);
    let w01 = (one - fu) * fv;
    let w11 = fu * fv;

    let p00 = mask.pixel(u0, v0);
    let p10 = mask.pixel(u1, v0);
    let p01 = mask.pixel(u0, v1);
    let p11 = mask.pixel(u1, v1);

    let mut values = Vec::with_capacity(mask.classes);
    for c in 0..mask.classes {
        values.push(p00[c] * w00 + p10[c] * w10 + p01[c] * w01 + p11[c] * w11);
    }
    renormalize_sum(&mut values);
    Some(ProbabilityVector::from_normalized_unchecked(values))
}

/// Camera kinds of the rig; thermal cameras contribute detections only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraKind {
    Rgb,
    Thermal,
}

/// One calibrated camera on the rig.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CameraRig<T: Real> {
    pub name: String,
    pub kind: CameraKind,
    /// Base frame expressed in the camera frame.
    pub t_cam_base: RigidTransform<T>,
    pub model: CameraModel<T>,
}

/// Static sensor-to-base transforms plus camera intrinsics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RigExtrinsics<T: Real> {
    /// LiDAR frame expressed in the base frame.
    pub t_base_lidar: RigidTransform<T>,
    pub cameras: Vec<CameraRig<T>>,
}

/// JSON calibration document: quaternions `[w,x,y,z]`, translations in meters.
#[derive(Debug, Serialize, Deserialize)]
struct TransformDoc {
    rotation: [f64; 4],
    translation: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraDoc {
    name: String,
    kind: CameraKind,
    t_cam_base: TransformDoc,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationDoc {
    t_base_lidar: TransformDoc,
    cameras: Vec<CameraDoc>,
}

fn transform_from_doc<T: Real>(doc: &TransformDoc) -> Result<RigidTransform<T>> {
    let q = doc.rotation;
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(FusionError::InvalidCalibration("degenerate quaternion".into()));
    }
    Ok(RigidTransform::new(
        UnitQuaternion::from_wxyz([
            T::from_f64_lit(q[0]),
            T::from_f64_lit(q[1]),
            T::from_f64_lit(q[2]),
            T::from_f64_lit(q[3]),
        ]),
        Vec3::new(
            T::from_f64_lit(doc.translation[0]),
            T::from_f64_lit(doc.translation[1]),
            T::from_f64_lit(doc.translation[2]),
        ),
    ))
}

fn transform_to_doc<T: Real>(t: &RigidTransform<T>) -> TransformDoc {
    TransformDoc {
        rotation: [
            t.rotation.w.as_f64(),
            t.rotation.x.as_f64(),
            t.rotation.y.as_f64(),
            t.rotation.z.as_f64(),
        ],
        translation: [
            t.translation.x.as_f64(),
            t.translation.y.as_f64(),
            t.translation.z.as_f64(),
        ],
    }
}

impl<T: Real> RigExtrinsics<T> {
    pub fn camera(&self, name: &str) -> Result<&CameraRig<T>> {
        self.cameras
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| FusionError::UnknownCamera(name.to_string()))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: CalibrationDoc = serde_json::from_str(json)?;
        let mut cameras = Vec::with_capacity(doc.cameras.len());
        for c in &doc.cameras {
            let model = CameraModel {
                fx: T::from_f64_lit(c.fx),
                fy: T::from_f64_lit(c.fy),
                cx: T::from_f64_lit(c.cx),
                cy: T::from_f64_lit(c.cy),
                width: c.width,
                height: c.height,
            };
            model.validate()?;
            cameras.push(CameraRig {
                name: c.name.clone(),
                kind: c.kind,
                t_cam_base: transform_from_doc(&c.t_cam_base)?,
                model,
            });
        }
        Ok(Self {
            t_base_lidar: transform_from_doc(&doc.t_base_lidar)?,
            cameras,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = CalibrationDoc {
            t_base_lidar: transform_to_doc(&self.t_base_lidar),
            cameras: self
                .cameras
                .iter()
                .map(|c| CameraDoc {
                    name: c.name.clone(),
                    kind: c.kind,
                    t_cam_base: transform_to_doc(&c.t_cam_base),
                    fx: c.model.fx.as_f64(),
                    fy: c.model.fy.as_f64(),
                    cx: c.model.cx.as_f64(),
                    cy: c.model.cy.as_f64(),
                    width: c.model.width,
                    height: c.model.height,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("calibration serializes")
    }
}

/// Full LiDAR-to-camera chain for a camera frame at `t_c` and a point
/// captured at `t_l`.
///
/// For `t_c == t_l` the motion factor is the identity by construction, so the
/// result reduces to the static extrinsic composition regardless of the
/// trajectory content.
pub fn chain_transform<T: Real>(
    extr: &RigExtrinsics<T>,
    camera: &str,
    trajectory: &Trajectory<T>,
    t_c: f64,
    t_l: f64,
    slack: f64,
) -> Result<RigidTransform<T>> {
    let cam = extr.camera(camera)?;
    if t_c == t_l {
        return Ok(cam.t_cam_base.compose(extr.t_base_lidar));
    }
    let base_at_c = trajectory.interpolate(t_c, slack)?.pose;
    let base_at_l = trajectory.interpolate(t_l, slack)?.pose;
    let motion = base_at_c.inverse().compose(base_at_l);
    Ok(cam
        .t_cam_base
        .compose(motion)
        .compose(extr.t_base_lidar))
}

/// World pose of a camera at `t`: `world_T_base(t) * inv(T_cam_base)`.
pub fn camera_world_pose<T: Real>(
    extr: &RigExtrinsics<T>,
    camera: &str,
    trajectory: &Trajectory<T>,
    t: f64,
    slack: f64,
) -> Result<RigidTransform<T>> {
    let cam = extr.camera(camera)?;
    let base = trajectory.interpolate(t, slack)?.pose;
    Ok(base.compose(cam.t_cam_base.inverse()))
}

/// World pose of the LiDAR at `t`: `world_T_base(t) * T_base_lidar`.
pub fn lidar_world_pose<T: Real>(
    extr: &RigExtrinsics<T>,
    trajectory: &Trajectory<T>,
    t: f64,
    slack: f64,
) -> Result<RigidTransform<T>> {
    let base = trajectory.interpolate(t, slack)?.pose;
    Ok(base.compose(extr.t_base_lidar))
}
