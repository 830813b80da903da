//! Pipeline orchestration: image fusion per RGB frame, cloud fusion per scan,
//! map integration per fused cloud.
//!
//! Offline mode processes every message sequentially in stamp order and is
//! bit-deterministic. Realtime mode replays messages against the wall clock
//! (scaled by a factor) through bounded drop-oldest queues, mirroring a live
//! perception stack under load.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use semfuse_core::cloud_fusion::{augment_scan, cloud_to_world, CameraObservation};
use semfuse_core::geometry::CameraKind;
use semfuse_core::image_fusion::ImageFusionState;
use semfuse_core::{Cloud, Config, Depth, Detection, Map, Mask, PoseTrack, Rig};

use crate::error::{ReplayError, Result};
use crate::map_io;
use crate::payload;
use crate::recording::{
    recording_digest, Manifest, Message, Recording, SensorInfo, StreamInfo, StreamKind,
    FORMAT_VERSION, MANIFEST_FILE,
};
use crate::report::{LatencyStats, RunReport, StageReport};

/// Queue capacities of the realtime pipeline, one per stage input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueueCapacities {
    pub rgb_frames: usize,
    pub scans: usize,
    pub clouds: usize,
}

impl Default for QueueCapacities {
    fn default() -> Self {
        Self {
            rgb_frames: 4,
            scans: 4,
            clouds: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplayMode {
    /// Process everything in stamp order; nothing is dropped.
    Offline,
    /// Pace messages at `recorded_time / factor` wall time.
    Realtime { factor: f64 },
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub mode: ReplayMode,
    pub queues: QueueCapacities,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            mode: ReplayMode::Offline,
            queues: QueueCapacities::default(),
        }
    }
}

/// Output stream names inside the output directory.
pub const FUSED_CLOUD_STREAM: &str = "fused_clouds";
pub const MAP_BINARY_FILE: &str = "map.bin";
pub const MAP_NDJSON_FILE: &str = "map.ndjson";
pub const REPORT_FILE: &str = "report.json";

fn fused_mask_stream(camera: &str) -> String {
    format!("fused_masks_{camera}")
}

/// Append-only framed stream file with per-stream monotonicity enforcement.
struct StreamAppender {
    path: PathBuf,
    writer: BufWriter<File>,
    count: u64,
    last_stamp: Option<f64>,
}

impl StreamAppender {
    fn create(dir: &Path, name: &str) -> Result<Self> {
        let path = dir.join(format!("{name}.bin"));
        let file =
            File::create(&path).map_err(|e| ReplayError::io(path.display().to_string(), e))?;
        Ok(Self {
            path,
            writer: BufWriter::new(file),
            count: 0,
            last_stamp: None,
        })
    }

    fn append(&mut self, stamp: f64, payload: &[u8]) -> Result<()> {
        if let Some(last) = self.last_stamp {
            assert!(
                stamp >= last,
                "output stream {} stamps must be monotone ({stamp} after {last})",
                self.path.display()
            );
        }
        self.last_stamp = Some(stamp);
        let io = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            w.write_all(&stamp.to_le_bytes())?;
            w.write_all(&(payload.len() as u32).to_le_bytes())?;
            w.write_all(payload)
        };
        io(&mut self.writer).map_err(|e| ReplayError::io(self.path.display().to_string(), e))?;
        self.count += 1;
        Ok(())
    }

    fn finish(&mut self) -> Result<u64> {
        self.writer
            .flush()
            .map_err(|e| ReplayError::io(self.path.display().to_string(), e))?;
        Ok(self.count)
    }
}

/// Latest raw camera products, as consumed by the cloud-fusion stage.
#[derive(Default)]
struct LatestFrames {
    rgb: Option<(String, f64, Mask, Vec<Detection>)>,
    thermal: Option<(String, f64, Vec<Detection>)>,
}

impl LatestFrames {
    fn observations(&self, scan_stamp: f64) -> Vec<CameraObservation<f64>> {
        let mut obs = Vec::new();
        if let Some((camera, stamp, mask, dets)) = &self.rgb {
            if *stamp <= scan_stamp {
                obs.push(CameraObservation {
                    camera: camera.clone(),
                    stamp: *stamp,
                    mask: Some(mask.clone()),
                    detections: dets.clone(),
                });
            }
        }
        if let Some((camera, stamp, dets)) = &self.thermal {
            if *stamp <= scan_stamp {
                obs.push(CameraObservation {
                    camera: camera.clone(),
                    stamp: *stamp,
                    mask: None,
                    detections: dets.clone(),
                });
            }
        }
        obs
    }
}

struct ImageStage {
    state: ImageFusionState<f64>,
    trajectory: Arc<PoseTrack>,
    extr: Arc<Rig>,
    cfg: Config,
    out: StreamAppender,
    latest_thermal: Arc<Mutex<LatestFrames>>,
    processed: u64,
    warnings: Arc<AtomicU64>,
    latencies: Vec<f64>,
}

impl ImageStage {
    fn process(
        &mut self,
        stamp: f64,
        mask: &Mask,
        depth: &Depth,
        dets: &[Detection],
        started: Instant,
    ) -> Result<()> {
        let thermal_dets: Vec<Detection> = {
            let latest = self.latest_thermal.lock().unwrap();
            match &latest.thermal {
                Some((_, t, d)) if *t <= stamp => d.clone(),
                _ => Vec::new(),
            }
        };
        match self.state.fuse_frame(
            mask,
            depth,
            dets,
            &thermal_dets,
            &self.trajectory,
            &self.extr,
            &self.cfg,
        ) {
            Ok(fused) => {
                self.out.append(stamp, &payload::encode_fused_mask(&fused))?;
                self.processed += 1;
            }
            Err(_) => {
                self.warnings.fetch_add(1, Ordering::Relaxed);
            }
        }
        self.latencies.push(started.elapsed().as_secs_f64() * 1e3);
        Ok(())
    }
}

struct CloudStage {
    trajectory: Arc<PoseTrack>,
    extr: Arc<Rig>,
    cfg: Config,
    latest: Arc<Mutex<LatestFrames>>,
    out: StreamAppender,
    processed: u64,
    warnings: Arc<AtomicU64>,
    latencies: Vec<f64>,
}

impl CloudStage {
    fn process(&mut self, scan: &Cloud, started: Instant) -> Result<Option<Cloud>> {
        let observations = {
            let latest = self.latest.lock().unwrap();
            latest.observations(scan.scan_stamp)
        };
        let result = augment_scan(scan, &observations, &self.trajectory, &self.extr, &self.cfg)
            .and_then(|augmented| {
                let world =
                    cloud_to_world(&augmented.cloud, &self.trajectory, &self.extr, &self.cfg)?;
                Ok((augmented.warnings.len() as u64, world))
            });
        let out = match result {
            Ok((warn_count, world)) => {
                self.warnings.fetch_add(warn_count, Ordering::Relaxed);
                self.out
                    .append(world.scan_stamp, &payload::encode_scan(&world))?;
                self.processed += 1;
                Some(world)
            }
            Err(_) => {
                // Scan rejected (e.g. trajectory coverage); recorded, not fatal.
                self.warnings.fetch_add(1, Ordering::Relaxed);
                None
            }
        };
        self.latencies.push(started.elapsed().as_secs_f64() * 1e3);
        Ok(out)
    }
}

struct MapStage {
    map: Map,
    scan_counter: u64,
    processed: u64,
    latencies: Vec<f64>,
}

impl MapStage {
    fn process(&mut self, cloud: &Cloud, started: Instant) -> Result<()> {
        self.map.integrate_cloud(cloud, self.scan_counter)?;
        self.scan_counter += 1;
        self.processed += 1;
        self.latencies.push(started.elapsed().as_secs_f64() * 1e3);
        Ok(())
    }
}

/// Run the full fusion pipeline over a recording, writing fused masks, fused
/// clouds, the final map, and a run report into `out_dir` (which becomes a
/// readable recording itself).
pub fn run_pipeline(
    recording: &Recording,
    cfg: &Config,
    opts: &PipelineOptions,
    out_dir: &Path,
) -> Result<RunReport> {
    let registry = recording.registry()?;
    cfg.validate(registry.count())
        .map_err(|e| ReplayError::Config(e.to_string()))?;
    let extr = Arc::new(recording.extrinsics()?);
    let trajectory = Arc::new(recording.trajectory()?);

    std::fs::create_dir_all(out_dir)
        .map_err(|e| ReplayError::io(out_dir.display().to_string(), e))?;

    let rgb_camera = extr
        .cameras
        .iter()
        .find(|c| c.kind == CameraKind::Rgb)
        .map(|c| c.name.clone());

    let latest = Arc::new(Mutex::new(LatestFrames::default()));
    let warnings = Arc::new(AtomicU64::new(0));

    let image_stage = match rgb_camera.as_ref() {
        Some(camera) => Some(ImageStage {
            state: ImageFusionState::new(camera.clone()),
            trajectory: trajectory.clone(),
            extr: extr.clone(),
            cfg: cfg.clone(),
            out: StreamAppender::create(out_dir, &fused_mask_stream(camera))?,
            latest_thermal: latest.clone(),
            processed: 0,
            warnings: warnings.clone(),
            latencies: Vec::new(),
        }),
        None => None,
    };
    let cloud_stage = CloudStage {
        trajectory: trajectory.clone(),
        extr: extr.clone(),
        cfg: cfg.clone(),
        latest: latest.clone(),
        out: StreamAppender::create(out_dir, FUSED_CLOUD_STREAM)?,
        processed: 0,
        warnings: warnings.clone(),
        latencies: Vec::new(),
    };
    let map_stage = MapStage {
        map: Map::new(
            cfg.voxel_size,
            registry.count(),
            cfg.deque_len,
            cfg.horizon_mode,
            cfg.scan_merge,
            cfg.epsilon_prob,
        ),
        scan_counter: 0,
        processed: 0,
        latencies: Vec::new(),
    };

    let started = Instant::now();
    let (mut image_stage, mut cloud_stage, mut map_stage, drops) = match opts.mode {
        ReplayMode::Offline => run_offline(
            recording,
            image_stage,
            cloud_stage,
            map_stage,
            latest.clone(),
        )?,
        ReplayMode::Realtime { factor } => run_realtime(
            recording,
            image_stage,
            cloud_stage,
            map_stage,
            latest.clone(),
            &opts.queues,
            factor,
        )?,
    };
    let wall = started.elapsed().as_secs_f64();

    // Finalize outputs.
    map_io::write_map_binary(&map_stage.map, &registry, &out_dir.join(MAP_BINARY_FILE))?;
    map_io::write_map_ndjson(&map_stage.map, &registry, &out_dir.join(MAP_NDJSON_FILE))?;

    let mut streams = Vec::new();
    let cloud_count = cloud_stage.out.finish()?;
    streams.push(StreamInfo {
        name: FUSED_CLOUD_STREAM.into(),
        file: format!("{FUSED_CLOUD_STREAM}.bin"),
        kind: StreamKind::FusedCloud,
        sensor: "lidar".into(),
        count: cloud_count,
    });
    let mut image_report: Option<StageReport> = None;
    if let Some(stage) = image_stage.as_mut() {
        let camera = stage.state.camera().to_string();
        let count = stage.out.finish()?;
        streams.push(StreamInfo {
            name: fused_mask_stream(&camera),
            file: format!("{}.bin", fused_mask_stream(&camera)),
            kind: StreamKind::FusedMask,
            sensor: camera,
            count,
        });
        image_report = Some(StageReport {
            name: "image_fusion".into(),
            processed: stage.processed,
            dropped: drops.0,
            throughput_hz: stage.processed as f64 / wall.max(1e-9),
            latency: LatencyStats::from_samples(&mut stage.latencies),
        });
    }

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        seed: recording.manifest().seed,
        classes: recording.manifest().classes.clone(),
        calibration: recording.manifest().calibration.clone(),
        sensors: vec![SensorInfo {
            name: "fusion".into(),
            kind: "fusion".into(),
            rate_hz: 0.0,
        }],
        streams,
        gt_map: None,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out_dir.join(MANIFEST_FILE), manifest_json)
        .map_err(|e| ReplayError::io(out_dir.display().to_string(), e))?;

    let mut report = RunReport {
        mode: match opts.mode {
            ReplayMode::Offline => "offline".into(),
            ReplayMode::Realtime { factor } => format!("realtime x{factor}"),
        },
        wall_time_s: wall,
        stages: Vec::new(),
        map_voxels: map_stage.map.len() as u64,
        warnings: warnings.load(Ordering::Relaxed),
    };
    if let Some(r) = image_report {
        report.stages.push(r);
    }
    report.stages.push(StageReport {
        name: "cloud_fusion".into(),
        processed: cloud_stage.processed,
        dropped: drops.1,
        throughput_hz: cloud_stage.processed as f64 / wall.max(1e-9),
        latency: LatencyStats::from_samples(&mut cloud_stage.latencies),
    });
    report.stages.push(StageReport {
        name: "map_integration".into(),
        processed: map_stage.processed,
        dropped: drops.2,
        throughput_hz: map_stage.processed as f64 / wall.max(1e-9),
        latency: LatencyStats::from_samples(&mut map_stage.latencies),
    });

    let report_json = serde_json::to_string_pretty(&report)?;
    std::fs::write(out_dir.join(REPORT_FILE), report_json)
        .map_err(|e| ReplayError::io(out_dir.display().to_string(), e))?;
    Ok(report)
}

type StageBundle = (Option<ImageStage>, CloudStage, MapStage, (u64, u64, u64));

fn run_offline(
    recording: &Recording,
    mut image_stage: Option<ImageStage>,
    mut cloud_stage: CloudStage,
    mut map_stage: MapStage,
    latest: Arc<Mutex<LatestFrames>>,
) -> Result<StageBundle> {
    for msg in recording.messages()? {
        match msg? {
            Message::RgbFrame {
                camera,
                stamp,
                mask,
                depth,
                detections,
            } => {
                {
                    let mut l = latest.lock().unwrap();
                    l.rgb = Some((camera.clone(), stamp, mask.clone(), detections.clone()));
                }
                if let Some(stage) = image_stage.as_mut() {
                    if stage.state.camera() == camera {
                        stage.process(stamp, &mask, &depth, &detections, Instant::now())?;
                    }
                }
            }
            Message::ThermalFrame {
                camera,
                stamp,
                detections,
            } => {
                let mut l = latest.lock().unwrap();
                l.thermal = Some((camera, stamp, detections));
            }
            Message::Scan(scan) => {
                let started = Instant::now();
                if let Some(world) = cloud_stage.process(&scan, started)? {
                    map_stage.process(&world, Instant::now())?;
                }
            }
            Message::Pose(_) | Message::ScanGt { .. } | Message::FusedMask { .. } => {}
        }
    }
    Ok((image_stage, cloud_stage, map_stage, (0, 0, 0)))
}

#[allow(clippy::too_many_arguments)]
fn run_realtime(
    recording: &Recording,
    image_stage: Option<ImageStage>,
    cloud_stage: CloudStage,
    map_stage: MapStage,
    latest: Arc<Mutex<LatestFrames>>,
    queues: &QueueCapacities,
    factor: f64,
) -> Result<StageBundle> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(ReplayError::Config(format!(
            "realtime factor {factor} must be positive"
        )));
    }

    let (rgb_tx, rgb_rx) = crate::queue::bounded::<(Instant, f64, Mask, Depth, Vec<Detection>)>(
        queues.rgb_frames,
    );
    let (scan_tx, scan_rx) = crate::queue::bounded::<(Instant, Cloud)>(queues.scans);
    let (cloud_tx, cloud_rx) = crate::queue::bounded::<(Instant, Cloud)>(queues.clouds);

    let image_camera = image_stage.as_ref().map(|s| s.state.camera().to_string());

    let image_handle = std::thread::spawn(move || -> Result<Option<ImageStage>> {
        let mut stage = image_stage;
        while let Some((arrived, stamp, mask, depth, dets)) = rgb_rx.pop() {
            if let Some(s) = stage.as_mut() {
                s.process(stamp, &mask, &depth, &dets, arrived)?;
            }
        }
        Ok(stage)
    });

    let cloud_handle = std::thread::spawn(move || -> Result<CloudStage> {
        let mut stage = cloud_stage;
        while let Some((arrived, scan)) = scan_rx.pop() {
            if let Some(world) = stage.process(&scan, arrived)? {
                cloud_tx.push((Instant::now(), world));
            }
        }
        Ok(stage)
    });

    let map_handle = std::thread::spawn(move || -> Result<(MapStage, u64)> {
        let mut stage = map_stage;
        while let Some((arrived, cloud)) = cloud_rx.pop() {
            stage.process(&cloud, arrived)?;
        }
        let dropped = cloud_rx.dropped();
        Ok((stage, dropped))
    });

    // Replay clock: message at stamp t is released (t - t0) / factor after start.
    let mut first_stamp: Option<f64> = None;
    let start = Instant::now();
    for msg in recording.messages()? {
        let msg = msg?;
        let stamp = msg.stamp();
        let t0 = *first_stamp.get_or_insert(stamp);
        let target = (stamp - t0).max(0.0) / factor;
        let elapsed = start.elapsed().as_secs_f64();
        if target > elapsed {
            std::thread::sleep(Duration::from_secs_f64(target - elapsed));
        }
        match msg {
            Message::RgbFrame {
                camera,
                stamp,
                mask,
                depth,
                detections,
            } => {
                {
                    let mut l = latest.lock().unwrap();
                    l.rgb = Some((camera.clone(), stamp, mask.clone(), detections.clone()));
                }
                if image_camera.as_deref() == Some(camera.as_str()) {
                    rgb_tx.push((Instant::now(), stamp, mask, depth, detections));
                }
            }
            Message::ThermalFrame {
                camera,
                stamp,
                detections,
            } => {
                let mut l = latest.lock().unwrap();
                l.thermal = Some((camera, stamp, detections));
            }
            Message::Scan(scan) => {
                scan_tx.push((Instant::now(), scan));
            }
            Message::Pose(_) | Message::ScanGt { .. } | Message::FusedMask { .. } => {}
        }
    }
    rgb_tx.close();
    scan_tx.close();
    let rgb_drops = rgb_tx.dropped();
    let scan_drops = scan_tx.dropped();

    let image_stage = image_handle.join().expect("image worker panicked")?;
    let cloud_stage = cloud_handle.join().expect("cloud worker panicked")?;
    let (map_stage, cloud_drops) = map_handle.join().expect("map worker panicked")?;
    Ok((
        image_stage,
        cloud_stage,
        map_stage,
        (rgb_drops, scan_drops, cloud_drops),
    ))
}

/// Fused clouds written by a pipeline run, in stamp order.
pub fn read_fused_clouds(out_dir: &Path) -> Result<Vec<Cloud>> {
    let rec = Recording::open(out_dir)?;
    let mut clouds = Vec::new();
    for msg in rec.messages()? {
        if let Message::Scan(c) = msg? {
            clouds.push(c);
        }
    }
    Ok(clouds)
}

/// Output recording digest (for determinism checks).
pub fn output_digest(out_dir: &Path) -> Result<String> {
    recording_digest(out_dir)
}
