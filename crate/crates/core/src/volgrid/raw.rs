//! Raw volume format: a JSON sidecar describing the lattice plus a
//! little-endian payload file.
//!
//! ```json
//! {"dims": [22, 512, 512], "spacing_mm": [3.0, 0.45, 0.45],
//!  "origin_mm": [0.0, 0.0, 0.0], "dtype": "int16"}
//! ```
//!
//! The payload lives next to the sidecar with the same stem and a `.raw`
//! extension unless the sidecar names it in `data_file`.

use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use super::{Geometry, VoxelGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawDtype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl RawDtype {
    fn size(self) -> usize {
        match self {
            RawDtype::Uint8 => 1,
            RawDtype::Int16 => 2,
            RawDtype::Int32 | RawDtype::Float32 => 4,
            RawDtype::Float64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub dtype: RawDtype,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<String>,
}

fn parse_header(text: &str, sidecar: &Path) -> Result<RawHeader> {
    let invalid = |reason: String| Error::InvalidHeader {
        path: sidecar.to_path_buf(),
        reason,
    };
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
    if let Some(dt) = value.get("dtype").and_then(|d| d.as_str()) {
        if serde_json::from_value::<RawDtype>(serde_json::Value::String(dt.to_owned())).is_err() {
            return Err(Error::UnsupportedDatatype(format!("raw dtype {dt:?}")));
        }
    }
    if let Some(obj) = value.as_object_mut() {
        obj.entry("origin_mm").or_insert(serde_json::json!([0.0, 0.0, 0.0]));
    }
    serde_json::from_value(value).map_err(|e| invalid(e.to_string()))
}

/// Sidecar path for either a `.json` or a `.raw` path.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn payload_path(sidecar: &Path, header: &RawHeader) -> PathBuf {
    match &header.data_file {
        Some(name) => sidecar.parent().unwrap_or(Path::new(".")).join(name),
        None => sidecar.with_extension("raw"),
    }
}

pub fn read_raw(path: &Path) -> Result<VoxelGrid> {
    let sidecar = sidecar_path(path);
    let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let header = parse_header(&text, &sidecar)?;
    let payload = payload_path(&sidecar, &header);
    let bytes = std::fs::read(&payload).map_err(|e| Error::io(&payload, e))?;
    let geom = Geometry::with_origin(header.dims, header.spacing_mm, header.origin_mm)?;
    let n = geom.len();
    let size = header.dtype.size();
    if bytes.len() != n * size {
        return Err(Error::DimensionMismatch {
            expected: n * size,
            found: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(size)
        .map(|b| match header.dtype {
            RawDtype::Uint8 => b[0] as f64,
            RawDtype::Int16 => LittleEndian::read_i16(b) as f64,
            RawDtype::Int32 => LittleEndian::read_i32(b) as f64,
            RawDtype::Float32 => LittleEndian::read_f32(b) as f64,
            RawDtype::Float64 => LittleEndian::read_f64(b),
        })
        .collect();
    VoxelGrid::new(geom, data)
}

/// Write sidecar + payload. `path` may end in `.json` or `.raw`.
pub fn write_raw(path: &Path, grid: &VoxelGrid, dtype: RawDtype) -> Result<()> {
    let g = grid.geometry();
    let header = RawHeader {
        dims: g.dims,
        spacing_mm: g.spacing_mm,
        origin_mm: g.origin_mm,
        dtype,
        data_file: None,
    };
    let sidecar = sidecar_path(path);
    let payload = payload_path(&sidecar, &header);
    let mut bytes = Vec::with_capacity(g.len() * dtype.size());
    for &v in grid.data() {
        let mut buf = [0u8; 8];
        let s = dtype.size();
        match dtype {
            RawDtype::Uint8 => buf[0] = v.round().clamp(0.0, 255.0) as u8,
            RawDtype::Int16 => LittleEndian::write_i16(&mut buf, v.round() as i16),
            RawDtype::Int32 => LittleEndian::write_i32(&mut buf, v.round() as i32),
            RawDtype::Float32 => LittleEndian::write_f32(&mut buf, v as f32),
            RawDtype::Float64 => LittleEndian::write_f64(&mut buf, v),
        }
        bytes.extend_from_slice(&buf[..s]);
    }
    let text = serde_json::to_string_pretty(&header)?;
    std::fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
    std::fs::write(&payload, bytes).map_err(|e| Error::io(&payload, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let g = Geometry::with_origin([2, 3, 4], [3.0, 0.45, 0.45], [1.0, 2.0, 3.0]).unwrap();
        let grid = VoxelGrid::from_fn(g, |[d, h, w]| d as f64 * 0.1 - h as f64 + w as f64 * 1e-3);
        let p = dir.path().join("vol.json");
        write_raw(&p, &grid, RawDtype::Float64).unwrap();
        let back = read_raw(&dir.path().join("vol.raw")).unwrap();
        assert_eq!(back, grid);

        std::fs::write(dir.path().join("vol.raw"), [0u8; 7]).unwrap();
        assert!(matches!(read_raw(&p), Err(Error::DimensionMismatch { expected: 192, found: 7 })));
    }

    #[test]
    fn unknown_dtype_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.json");
        std::fs::write(&p, r#"{"dims":[1,1,1],"spacing_mm":[1,1,1],"dtype":"complex64"}"#).unwrap();
        assert!(matches!(read_raw(&p), Err(Error::UnsupportedDatatype(_))));
        std::fs::write(&p, r#"{"dims":[1,1],"spacing_mm":[1,1,1],"dtype":"uint8"}"#).unwrap();
        assert!(matches!(read_raw(&p), Err(Error::InvalidHeader { .. })));
    }
}
