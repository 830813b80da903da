//! Binary payload encoding of the recording messages.
//!
//! Everything is little-endian. A stream file is a plain sequence of
//! records, each framed as
//!
//! ```text
//! stamp: f64 | payload_len: u32 | payload bytes
//! ```
//!
//! Payloads:
//!
//! * trajectory sample: `qw qx qy qz tx ty tz` as 7 f64
//! * scan: `frame u8 (0 lidar, 1 world) | classes u16 | count u32`, then per
//!   point `x y z intensity stamp_offset` f64 plus `classes` f64 scores
//! * rgb frame: `classes u16 | width u32 | height u32`, mask scores
//!   (`w*h*classes` f64, pixel-major), depth (`w*h` f64, 0 = invalid),
//!   `n_det u32`, then per detection `class u16 | score f64 | u_min v_min
//!   u_max v_max f64`
//! * thermal frame: `n_det u32`, detections as above
//! * label image / gt labels: `count u32` then `count` u16 class ids
//! * fused mask: `classes u16 | width u32 | height u32`, argmax index map
//!   (`w*h` u16), raw score tensor (`w*h*classes` f64)

use semfuse_core::cloud::{CloudFrame, SemanticCloud, SemanticPoint};
use semfuse_core::image::{DepthImage, ScoreMask};
use semfuse_core::math::{RigidTransform, UnitQuaternion, Vec3};
use semfuse_core::prob::ProbabilityVector;
use semfuse_core::{Cloud, Depth, Detection, Fused, Mask, Pose};

use crate::error::{ReplayError, Result};

pub struct Reader<'a> {
    entry: &'a str,
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(entry: &'a str, data: &'a [u8]) -> Self {
        Self { entry, data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(ReplayError::corrupt(
                self.entry,
                format!("truncated payload at offset {}", self.pos),
            ));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(ReplayError::corrupt(
                self.entry,
                format!("{} trailing bytes", self.data.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_i32(out: &mut Vec<u8>, v: i32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_pose(pose: &Pose) -> Vec<u8> {
    let mut out = Vec::with_capacity(56);
    for v in [
        pose.rotation.w,
        pose.rotation.x,
        pose.rotation.y,
        pose.rotation.z,
        pose.translation.x,
        pose.translation.y,
        pose.translation.z,
    ] {
        put_f64(&mut out, v);
    }
    out
}

pub fn decode_pose(entry: &str, data: &[u8]) -> Result<Pose> {
    let mut r = Reader::new(entry, data);
    let vals = r.f64s(7)?;
    r.finish()?;
    Ok(RigidTransform::new(
        UnitQuaternion::from_wxyz([vals[0], vals[1], vals[2], vals[3]]),
        Vec3::new(vals[4], vals[5], vals[6]),
    ))
}

pub fn encode_scan(cloud: &Cloud) -> Vec<u8> {
    let classes = cloud.points.first().map_or(0, |p| p.scores.len());
    let mut out =
        Vec::with_capacity(7 + cloud.points.len() * (5 + classes) * 8);
    out.push(match cloud.frame {
        CloudFrame::Lidar => 0,
        CloudFrame::World => 1,
    });
    put_u16(&mut out, classes as u16);
    put_u32(&mut out, cloud.points.len() as u32);
    for p in &cloud.points {
        put_f64(&mut out, p.position.x);
        put_f64(&mut out, p.position.y);
        put_f64(&mut out, p.position.z);
        put_f64(&mut out, p.intensity);
        put_f64(&mut out, p.stamp_offset);
        for &s in p.scores.values() {
            put_f64(&mut out, s);
        }
    }
    out
}

pub fn decode_scan(entry: &str, stamp: f64, data: &[u8]) -> Result<Cloud> {
    let mut r = Reader::new(entry, data);
    let frame = match r.u8()? {
        0 => CloudFrame::Lidar,
        1 => CloudFrame::World,
        other => {
            return Err(ReplayError::corrupt(entry, format!("bad frame tag {other}")));
        }
    };
    let classes = r.u16()? as usize;
    let count = r.u32()? as usize;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let head = r.f64s(5)?;
        let scores = r.f64s(classes)?;
        let scores = ProbabilityVector::new(scores)
            .map_err(|e| ReplayError::corrupt(entry, e.to_string()))?;
        points.push(
            SemanticPoint::new(Vec3::new(head[0], head[1], head[2]), head[3], head[4], scores)
                .map_err(|e| ReplayError::corrupt(entry, e.to_string()))?,
        );
    }
    r.finish()?;
    Ok(SemanticCloud::new(points, stamp, frame))
}

fn encode_detections(out: &mut Vec<u8>, dets: &[Detection]) {
    put_u32(out, dets.len() as u32);
    for d in dets {
        put_u16(out, d.class_id as u16);
        put_f64(out, d.score);
        put_f64(out, d.u_min);
        put_f64(out, d.v_min);
        put_f64(out, d.u_max);
        put_f64(out, d.v_max);
    }
}

fn decode_detections(entry: &str, r: &mut Reader) -> Result<Vec<Detection>> {
    let n = r.u32()? as usize;
    let mut dets = Vec::with_capacity(n);
    for _ in 0..n {
        let class = r.u16()? as usize;
        let score = r.f64()?;
        let coords = r.f64s(4)?;
        dets.push(
            Detection::new(class, score, coords[0], coords[1], coords[2], coords[3])
                .map_err(|e| ReplayError::corrupt(entry, e.to_string()))?,
        );
    }
    Ok(dets)
}

pub fn encode_rgb_frame(mask: &Mask, depth: &Depth, dets: &[Detection]) -> Vec<u8> {
    let mut out = Vec::with_capacity(
        10 + mask.raw().len() * 8 + depth.raw().len() * 8 + 4 + dets.len() * 42,
    );
    put_u16(&mut out, mask.classes as u16);
    put_u32(&mut out, mask.width as u32);
    put_u32(&mut out, mask.height as u32);
    for &s in mask.raw() {
        put_f64(&mut out, s);
    }
    for &d in depth.raw() {
        put_f64(&mut out, d);
    }
    encode_detections(&mut out, dets);
    out
}

pub fn decode_rgb_frame(
    entry: &str,
    stamp: f64,
    data: &[u8],
) -> Result<(Mask, Depth, Vec<Detection>)> {
    let mut r = Reader::new(entry, data);
    let classes = r.u16()? as usize;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let scores = r.f64s(width * height * classes)?;
    let mask = ScoreMask::from_scores(width, height, classes, stamp, scores)
        .map_err(|e| ReplayError::corrupt(entry, e.to_string()))?;
    let depths = r.f64s(width * height)?;
    let depth = DepthImage::from_depths(width, height, stamp, depths)
        .map_err(|e| ReplayError::corrupt(entry, e.to_string()))?;
    let dets = decode_detections(entry, &mut r)?;
    r.finish()?;
    Ok((mask, depth, dets))
}

pub fn encode_thermal_frame(dets: &[Detection]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + dets.len() * 42);
    encode_detections(&mut out, dets);
    out
}

pub fn decode_thermal_frame(entry: &str, data: &[u8]) -> Result<Vec<Detection>> {
    let mut r = Reader::new(entry, data);
    let dets = decode_detections(entry, &mut r)?;
    r.finish()?;
    Ok(dets)
}

pub fn encode_labels(labels: &[u16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + labels.len() * 2);
    put_u32(&mut out, labels.len() as u32);
    for &l in labels {
        put_u16(&mut out, l);
    }
    out
}

pub fn decode_labels(entry: &str, data: &[u8]) -> Result<Vec<u16>> {
    let mut r = Reader::new(entry, data);
    let n = r.u32()? as usize;
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(r.u16()?);
    }
    r.finish()?;
    Ok(labels)
}

pub fn encode_fused_mask(fused: &Fused) -> Vec<u8> {
    let (w, h, c) = (fused.width(), fused.height(), fused.classes());
    let mut out = Vec::with_capacity(10 + w * h * 2 + w * h * c * 8);
    put_u16(&mut out, c as u16);
    put_u32(&mut out, w as u32);
    put_u32(&mut out, h as u32);
    for v in 0..h {
        for u in 0..w {
            put_u16(&mut out, fused.mask.argmax(u, v) as u16);
        }
    }
    for &s in fused.mask.raw() {
        put_f64(&mut out, s);
    }
    out
}

pub fn decode_fused_mask(entry: &str, stamp: f64, data: &[u8]) -> Result<(Vec<u16>, Mask)> {
    let mut r = Reader::new(entry, data);
    let classes = r.u16()? as usize;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let mut argmax = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        argmax.push(r.u16()?);
    }
    let scores = r.f64s(width * height * classes)?;
    let mask = ScoreMask::from_scores(width, height, classes, stamp, scores)
        .map_err(|e| ReplayError::corrupt(entry, e.to_string()))?;
    r.finish()?;
    Ok((argmax, mask))
}
