//! Multi-modal semantic fusion for LiDAR + camera rigs.
//!
//! The library augments LiDAR point clouds and camera segmentation masks with
//! fused per-class probabilities from multiple sensors and aggregates them
//! into an allocentric sparse-voxel semantic map using log-space Bayesian
//! fusion. All math is generic over the scalar type (`f32`/`f64`, see
//! [`scalar::Real`]); the aliases below pin the default `f64` instantiation
//! used by the pipeline, simulator, and CLI.

pub mod cloud;
pub mod cloud_fusion;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod image_fusion;
pub mod math;
pub mod prob;
pub mod registry;
pub mod scalar;
pub mod voxel;

pub use error::{FusionError, Result};
pub use registry::{ClassId, ClassRegistry};
pub use scalar::Real;

/// Default scalar of the shipped pipeline.
pub type Scalar = f64;

pub type Probs = prob::ProbabilityVector<Scalar>;
pub type LogProbs = prob::LogProbabilityVector<Scalar>;
pub type Config = config::FusionConfig<Scalar>;
pub type Point3 = math::Vec3<Scalar>;
pub type Quat = math::UnitQuaternion<Scalar>;
pub type Pose = math::RigidTransform<Scalar>;
pub type PoseSample = geometry::TrajectorySample<Scalar>;
pub type PoseTrack = geometry::Trajectory<Scalar>;
pub type Camera = geometry::CameraModel<Scalar>;
pub type Rig = geometry::RigExtrinsics<Scalar>;
pub type Mask = image::ScoreMask<Scalar>;
pub type Depth = image::DepthImage<Scalar>;
pub type Fused = image::FusedMask<Scalar>;
pub type Cloud = cloud::SemanticCloud<Scalar>;
pub type CloudPoint = cloud::SemanticPoint<Scalar>;
pub type Detection = cloud::DetectionBox<Scalar>;
pub type Map = voxel::VoxelMap<Scalar>;
