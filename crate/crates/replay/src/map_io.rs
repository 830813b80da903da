//! Voxel map export formats: newline-delimited JSON and a compact binary.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic "SVXM" | version u32 | voxel_size f64 | classes u16
//! per class: name_len u16 | utf8 name bytes
//! voxel_count u64
//! per voxel: ix iy iz i32 | mean x y z f64 | point_count u64
//!            | posterior classes*f64 | argmax u16
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use semfuse_core::math::Vec3;
use semfuse_core::prob::ProbabilityVector;
use semfuse_core::voxel::{VoxelKey, VoxelMap, VoxelRecord};
use semfuse_core::{ClassRegistry, Map, Probs, Scalar};

use crate::error::{ReplayError, Result};
use crate::payload::{put_f64, put_i32, put_u16, put_u32, put_u64, Reader};

const MAGIC: &[u8; 4] = b"SVXM";
const VERSION: u32 = 1;

/// One line of the newline-delimited JSON export.
#[derive(Debug, Serialize, Deserialize)]
pub struct MapJsonRecord {
    pub key: [i32; 3],
    pub mean: [f64; 3],
    pub count: u64,
    pub posterior: Vec<f64>,
    pub argmax: String,
}

pub fn write_map_ndjson(map: &Map, registry: &ClassRegistry, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| ReplayError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    for rec in map.export() {
        let line = MapJsonRecord {
            key: [rec.key.ix, rec.key.iy, rec.key.iz],
            mean: rec.mean_position.to_array(),
            count: rec.point_count,
            posterior: rec.posterior.values().to_vec(),
            argmax: registry.name(rec.argmax).to_string(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")
            .map_err(|e| ReplayError::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| ReplayError::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn write_map_binary(map: &Map, registry: &ClassRegistry, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_f64(&mut out, map.voxel_size());
    put_u16(&mut out, registry.count() as u16);
    for name in registry.names() {
        put_u16(&mut out, name.len() as u16);
        out.extend_from_slice(name.as_bytes());
    }
    let records = map.export();
    put_u64(&mut out, records.len() as u64);
    for rec in &records {
        put_i32(&mut out, rec.key.ix);
        put_i32(&mut out, rec.key.iy);
        put_i32(&mut out, rec.key.iz);
        put_f64(&mut out, rec.mean_position.x);
        put_f64(&mut out, rec.mean_position.y);
        put_f64(&mut out, rec.mean_position.z);
        put_u64(&mut out, rec.point_count);
        for &p in rec.posterior.values() {
            put_f64(&mut out, p);
        }
        put_u16(&mut out, rec.argmax as u16);
    }
    std::fs::write(path, out).map_err(|e| ReplayError::io(path.display().to_string(), e))?;
    Ok(())
}

/// Read a binary map file back into a queryable map plus its class names.
pub fn read_map_binary(path: &Path, epsilon_prob: Scalar) -> Result<(Map, Vec<String>)> {
    let entry = path.display().to_string();
    let mut file = File::open(path).map_err(|e| ReplayError::io(entry.clone(), e))?;
    let mut data = Vec::new();
    file.read_to_end(&mut data)
        .map_err(|e| ReplayError::io(entry.clone(), e))?;
    let mut r = Reader::new(&entry, &data);

    let magic = [r.u8()?, r.u8()?, r.u8()?, r.u8()?];
    if &magic != MAGIC {
        return Err(ReplayError::corrupt(&entry, "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ReplayError::corrupt(&entry, format!("unsupported version {version}")));
    }
    let voxel_size = r.f64()?;
    let classes = r.u16()? as usize;
    let mut names = Vec::with_capacity(classes);
    for _ in 0..classes {
        let len = r.u16()? as usize;
        let mut name = vec![0u8; len];
        for b in name.iter_mut() {
            *b = r.u8()?;
        }
        names.push(String::from_utf8(name).map_err(|e| ReplayError::corrupt(&entry, e.to_string()))?);
    }
    let count = r.u64()? as usize;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let key = VoxelKey {
            ix: r.i32()?,
            iy: r.i32()?,
            iz: r.i32()?,
        };
        let mean = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
        let point_count = r.u64()?;
        let posterior: Probs = ProbabilityVector::new(r.f64s(classes)?)
            .map_err(|e| ReplayError::corrupt(&entry, e.to_string()))?;
        let argmax = r.u16()? as usize;
        records.push(VoxelRecord {
            key,
            mean_position: mean,
            point_count,
            posterior,
            argmax,
        });
    }
    r.finish()?;
    Ok((
        VoxelMap::from_records(voxel_size, classes, epsilon_prob, records),
        names,
    ))
}
