//! Directory-based recording: `manifest.json` plus length-prefixed binary
//! record files, one per stream, replayable in global stamp order.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semfuse_core::geometry::TrajectorySample;
use semfuse_core::{Cloud, ClassRegistry, Depth, Detection, Mask, PoseTrack, Rig};

use crate::error::{ReplayError, Result};
use crate::payload;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Trajectory,
    Scan,
    RgbFrame,
    ThermalFrame,
    ScanGt,
    FusedCloud,
    FusedMask,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorInfo {
    pub name: String,
    pub kind: String,
    pub rate_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamInfo {
    pub name: String,
    pub file: String,
    pub kind: StreamKind,
    /// Sensor (camera name for frames) this stream belongs to.
    pub sensor: String,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    /// Class registry document (`{"classes":[...]}`).
    pub classes: serde_json::Value,
    /// Calibration document (quaternions `[w,x,y,z]`, translations meters).
    pub calibration: serde_json::Value,
    pub sensors: Vec<SensorInfo>,
    pub streams: Vec<StreamInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_map: Option<String>,
}

impl Manifest {
    pub fn registry(&self) -> Result<ClassRegistry> {
        Ok(ClassRegistry::from_json(&self.classes.to_string())?)
    }

    pub fn extrinsics(&self) -> Result<Rig> {
        Ok(Rig::from_json(&self.calibration.to_string())?)
    }

    pub fn class_count(&self) -> Result<usize> {
        Ok(self.registry()?.count())
    }
}

/// A message replayed from a recording, in global stamp order.
#[derive(Debug, Clone)]
pub enum Message {
    Pose(TrajectorySample<f64>),
    Scan(Cloud),
    RgbFrame {
        camera: String,
        stamp: f64,
        mask: Mask,
        depth: Depth,
        detections: Vec<Detection>,
    },
    ThermalFrame {
        camera: String,
        stamp: f64,
        detections: Vec<Detection>,
    },
    ScanGt {
        stamp: f64,
        labels: Vec<u16>,
    },
    FusedMask {
        camera: String,
        stamp: f64,
        argmax: Vec<u16>,
        mask: Mask,
    },
}

impl Message {
    pub fn stamp(&self) -> f64 {
        match self {
            Message::Pose(s) => s.stamp,
            Message::Scan(c) => c.scan_stamp,
            Message::RgbFrame { stamp, .. } => *stamp,
            Message::ThermalFrame { stamp, .. } => *stamp,
            Message::ScanGt { stamp, .. } => *stamp,
            Message::FusedMask { stamp, .. } => *stamp,
        }
    }
}

/// Streaming writer; streams are declared up front, stamps must be monotone
/// per stream, and `finalize` produces the manifest digest.
pub struct RecordingWriter {
    dir: PathBuf,
    manifest: Manifest,
    files: Vec<BufWriter<File>>,
    last_stamp: Vec<Option<f64>>,
    index: HashMap<String, usize>,
}

impl RecordingWriter {
    pub fn create(
        dir: &Path,
        seed: u64,
        registry: &ClassRegistry,
        extrinsics: &Rig,
        sensors: Vec<SensorInfo>,
    ) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| ReplayError::io(dir.display().to_string(), e))?;
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            seed,
            classes: serde_json::from_str(&registry.to_json())?,
            calibration: serde_json::from_str(&extrinsics.to_json())?,
            sensors,
            streams: Vec::new(),
            gt_map: None,
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            files: Vec::new(),
            last_stamp: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn add_stream(&mut self, name: &str, kind: StreamKind, sensor: &str) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(ReplayError::Manifest(format!("duplicate stream '{name}'")));
        }
        let file_name = format!("{name}.bin");
        let path = self.dir.join(&file_name);
        let file =
            File::create(&path).map_err(|e| ReplayError::io(path.display().to_string(), e))?;
        self.index.insert(name.to_string(), self.files.len());
        self.files.push(BufWriter::new(file));
        self.last_stamp.push(None);
        self.manifest.streams.push(StreamInfo {
            name: name.to_string(),
            file: file_name,
            kind,
            sensor: sensor.to_string(),
            count: 0,
        });
        Ok(())
    }

    pub fn append(&mut self, stream: &str, stamp: f64, payload: &[u8]) -> Result<()> {
        let &i = self
            .index
            .get(stream)
            .ok_or_else(|| ReplayError::Manifest(format!("unknown stream '{stream}'")))?;
        if let Some(last) = self.last_stamp[i] {
            if stamp < last {
                return Err(ReplayError::Manifest(format!(
                    "stream '{stream}': stamp {stamp} after {last} is not monotone"
                )));
            }
        }
        self.last_stamp[i] = Some(stamp);
        let w = &mut self.files[i];
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            w.write_all(&stamp.to_le_bytes())?;
            w.write_all(&(payload.len() as u32).to_le_bytes())?;
            w.write_all(payload)
        };
        write(w).map_err(|e| ReplayError::io(format!("{stream}.bin"), e))?;
        self.manifest.streams[i].count += 1;
        Ok(())
    }

    pub fn set_gt_map_file(&mut self, file_name: &str) {
        self.manifest.gt_map = Some(file_name.to_string());
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Flush everything, write the manifest, and return the recording digest.
    pub fn finalize(mut self) -> Result<String> {
        for (i, f) in self.files.iter_mut().enumerate() {
            f.flush()
                .map_err(|e| ReplayError::io(self.manifest.streams[i].file.clone(), e))?;
        }
        let manifest_json = serde_json::to_string_pretty(&self.manifest)?;
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, &manifest_json)
            .map_err(|e| ReplayError::io(path.display().to_string(), e))?;
        recording_digest(&self.dir)
    }
}

/// SHA-256 over the manifest and every file it references, hex-encoded.
pub fn recording_digest(dir: &Path) -> Result<String> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_bytes = fs::read(&manifest_path)
        .map_err(|e| ReplayError::io(manifest_path.display().to_string(), e))?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)?;
    let mut hasher = Sha256::new();
    hasher.update(&manifest_bytes);
    let mut files: Vec<&str> = manifest.streams.iter().map(|s| s.file.as_str()).collect();
    if let Some(gt) = &manifest.gt_map {
        files.push(gt.as_str());
    }
    for file in files {
        let path = dir.join(file);
        let bytes =
            fs::read(&path).map_err(|e| ReplayError::io(path.display().to_string(), e))?;
        hasher.update(file.as_bytes());
        hasher.update(bytes);
    }
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// An opened recording directory.
pub struct Recording {
    dir: PathBuf,
    manifest: Manifest,
}

struct StreamCursor {
    info: StreamInfo,
    reader: BufReader<File>,
    remaining: u64,
    seq: u64,
}

impl StreamCursor {
    fn next_record(&mut self) -> Result<Option<(f64, Vec<u8>)>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let mut head = [0u8; 12];
        self.reader
            .read_exact(&mut head)
            .map_err(|e| ReplayError::io(self.info.file.clone(), e))?;
        let stamp = f64::from_le_bytes(head[0..8].try_into().unwrap());
        let len = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let mut payload = vec![0u8; len];
        self.reader
            .read_exact(&mut payload)
            .map_err(|e| ReplayError::corrupt(&self.info.file, format!("truncated record: {e}")))?;
        self.remaining -= 1;
        self.seq += 1;
        Ok(Some((stamp, payload)))
    }
}

impl Recording {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&manifest_path)
            .map_err(|e| ReplayError::io(manifest_path.display().to_string(), e))?;
        let manifest: Manifest = serde_json::from_slice(&bytes)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(ReplayError::Manifest(format!(
                "unsupported format version {}",
                manifest.format_version
            )));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn registry(&self) -> Result<ClassRegistry> {
        self.manifest.registry()
    }

    pub fn extrinsics(&self) -> Result<Rig> {
        self.manifest.extrinsics()
    }

    /// Iterator over all messages in global stamp order (stamp ties broken by
    /// manifest stream order, then by in-stream sequence).
    pub fn messages(&self) -> Result<MessageIter> {
        let mut cursors = Vec::new();
        for info in &self.manifest.streams {
            let path = self.dir.join(&info.file);
            let file =
                File::open(&path).map_err(|e| ReplayError::io(path.display().to_string(), e))?;
            cursors.push(StreamCursor {
                info: info.clone(),
                reader: BufReader::new(file),
                remaining: info.count,
                seq: 0,
            });
        }
        let mut heads = Vec::with_capacity(cursors.len());
        for c in cursors.iter_mut() {
            heads.push(c.next_record()?);
        }
        Ok(MessageIter { cursors, heads })
    }

    /// The full pose track of the recording (needed up front by both replay
    /// modes, since interpolation brackets stamps on both sides).
    pub fn trajectory(&self) -> Result<PoseTrack> {
        let mut samples = Vec::new();
        for msg in self.messages()? {
            if let Message::Pose(s) = msg? {
                samples.push(s);
            }
        }
        Ok(PoseTrack::new(samples)?)
    }

    pub fn gt_map_path(&self) -> Option<PathBuf> {
        self.manifest.gt_map.as_ref().map(|f| self.dir.join(f))
    }
}

pub struct MessageIter {
    cursors: Vec<StreamCursor>,
    heads: Vec<Option<(f64, Vec<u8>)>>,
}

impl Iterator for MessageIter {
    type Item = Result<Message>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut best: Option<usize> = None;
        for (i, head) in self.heads.iter().enumerate() {
            if let Some((stamp, _)) = head {
                match best {
                    Some(b) => {
                        let (bs, _) = self.heads[b].as_ref().unwrap();
                        if stamp < bs {
                            best = Some(i);
                        }
                    }
                    None => best = Some(i),
                }
            }
        }
        let i = best?;
        let (stamp, bytes) = self.heads[i].take().unwrap();
        match self.cursors[i].next_record() {
            Ok(next) => self.heads[i] = next,
            Err(e) => return Some(Err(e)),
        }
        let info = &self.cursors[i].info;
        let entry = info.file.clone();
        let msg = match info.kind {
            StreamKind::Trajectory => payload::decode_pose(&entry, &bytes).map(|pose| {
                Message::Pose(TrajectorySample { stamp, pose })
            }),
            StreamKind::Scan | StreamKind::FusedCloud => {
                payload::decode_scan(&entry, stamp, &bytes).map(Message::Scan)
            }
            StreamKind::RgbFrame => {
                payload::decode_rgb_frame(&entry, stamp, &bytes).map(|(mask, depth, detections)| {
                    Message::RgbFrame {
                        camera: info.sensor.clone(),
                        stamp,
                        mask,
                        depth,
                        detections,
                    }
                })
            }
            StreamKind::ThermalFrame => {
                payload::decode_thermal_frame(&entry, &bytes).map(|detections| {
                    Message::ThermalFrame {
                        camera: info.sensor.clone(),
                        stamp,
                        detections,
                    }
                })
            }
            StreamKind::ScanGt => {
                payload::decode_labels(&entry, &bytes).map(|labels| Message::ScanGt { stamp, labels })
            }
            StreamKind::FusedMask => payload::decode_fused_mask(&entry, stamp, &bytes)
                .map(|(argmax, mask)| Message::FusedMask {
                    camera: info.sensor.clone(),
                    stamp,
                    argmax,
                    mask,
                }),
        };
        Some(msg)
    }
}
