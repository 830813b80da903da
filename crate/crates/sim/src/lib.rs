//! Deterministic synthetic scenes and sensor emulation: LiDAR scans with
//! noisy per-point class scores, camera score masks, depth images,
//! detections, trajectories, and exact ground truth.

pub mod camera;
pub mod error;
pub mod flight;
pub mod lidar;
pub mod noise;
pub mod scene;

pub use error::{Result, SimError};
pub use flight::{default_rig, generate_flight, FlightSpec, FlightSummary, SimSpec, Waypoint};
pub use lidar::LidarModel;
pub use noise::{ConfusionPair, NoiseSampler, SensorNoiseModel};
pub use scene::{generate_scene, PrimitiveSpec, SceneSpec, ScatterSpec, Scene, ShapeSpec};
