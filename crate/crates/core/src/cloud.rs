//! Semantic point clouds and detection boxes.

use crate::error::{FusionError, Result};
use crate::math::Vec3;
use crate::prob::ProbabilityVector;
use crate::registry::ClassId;
use crate::scalar::Real;

/// Reference frame of a cloud's point positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFrame {
    /// Sensor frame at each point's capture time.
    Lidar,
    World,
}

/// One LiDAR return with its per-class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticPoint<T: Real> {
    /// Meters, in the cloud's frame.
    pub position: Vec3<T>,
    pub intensity: T,
    /// Offset within the scan sweep, seconds.
    pub stamp_offset: f64,
    pub scores: ProbabilityVector<T>,
    pub argmax_class: ClassId,
}

impl<T: Real> SemanticPoint<T> {
    pub fn new(
        position: Vec3<T>,
        intensity: T,
        stamp_offset: f64,
        scores: ProbabilityVector<T>,
    ) -> Result<Self> {
        if !position.is_finite() {
            return Err(FusionError::NonFiniteInput {
                context: "point position",
            });
        }
        let argmax_class = scores.argmax();
        Ok(Self {
            position,
            intensity,
            stamp_offset,
            scores,
            argmax_class,
        })
    }

    /// Re-derive the cached argmax after a score update.
    pub fn set_scores(&mut self, scores: ProbabilityVector<T>) {
        self.argmax_class = scores.argmax();
        self.scores = scores;
    }
}

/// A full scan (or an aggregated cloud) of semantic points.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticCloud<T: Real> {
    pub points: Vec<SemanticPoint<T>>,
    /// Scan start, seconds.
    pub scan_stamp: f64,
    pub frame: CloudFrame,
}

impl<T: Real> SemanticCloud<T> {
    pub fn new(points: Vec<SemanticPoint<T>>, scan_stamp: f64, frame: CloudFrame) -> Self {
        Self {
            points,
            scan_stamp,
            frame,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Absolute capture stamp of a point under the given timestamp mode.
    pub fn point_stamp(&self, index: usize, per_point: bool) -> f64 {
        if per_point {
            self.scan_stamp + self.points[index].stamp_offset
        } else {
            self.scan_stamp
        }
    }
}

/// Axis-aligned detector output in image coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionBox<T: Real> {
    pub class_id: ClassId,
    /// Detector confidence in `[0,1]`.
    pub score: T,
    pub u_min: T,
    pub v_min: T,
    pub u_max: T,
    pub v_max: T,
}

impl<T: Real> DetectionBox<T> {
    pub fn new(class_id: ClassId, score: T, u_min: T, v_min: T, u_max: T, v_max: T) -> Result<Self> {
        if !(u_min < u_max && v_min < v_max) {
            return Err(FusionError::InvalidDetection(format!(
                "degenerate box [{u_min},{v_min},{u_max},{v_max}]"
            )));
        }
        if !(score >= T::zero() && score <= T::one()) {
            return Err(FusionError::InvalidDetection(format!(
                "score {score} outside [0,1]"
            )));
        }
        Ok(Self {
            class_id,
            score,
            u_min,
            v_min,
            u_max,
            v_max,
        })
    }

    #[inline]
    pub fn contains(&self, u: T, v: T) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }

    pub fn center(&self) -> (T, T) {
        let half = T::from_f64_lit(0.5);
        ((self.u_min + self.u_max) * half, (self.v_min + self.v_max) * half)
    }

    pub fn width(&self) -> T {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> T {
        self.v_max - self.v_min
    }
}
