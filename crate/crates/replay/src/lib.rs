//! Recording format, multi-rate replay, and pipeline orchestration for the
//! semantic fusion engine.

pub mod error;
pub mod evaluate;
pub mod map_io;
pub mod payload;
pub mod pipeline;
pub mod queue;
pub mod recording;
pub mod report;

pub use error::{ReplayError, Result};
pub use pipeline::{run_pipeline, PipelineOptions, QueueCapacities, ReplayMode};
pub use recording::{Manifest, Message, Recording, RecordingWriter, SensorInfo, StreamKind};
pub use report::RunReport;
