//! Minimal NIfTI-1 single-file codec (`.nii` and `.nii.gz`).
//!
//! Reads 3D volumes of datatype uint8, int16, int32, float32 and float64
//! with `scl_slope` / `scl_inter` scaling. The stored affine is used only to
//! recover the voxel origin and the sign of the left-right axis; no
//! reorientation is performed. NIfTI's `(i, j, k)` maps to
//! `(width, height, depth)`.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{Geometry, VoxelGrid};
use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;

/// NIfTI datatype codes handled by the codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Int32 => 8,
            Datatype::Float32 => 16,
            Datatype::Float64 => 64,
        }
    }

    pub fn from_code(code: i16) -> Option<Self> {
        Some(match code {
            2 => Datatype::Uint8,
            4 => Datatype::Int16,
            8 => Datatype::Int32,
            16 => Datatype::Float32,
            64 => Datatype::Float64,
            _ => return None,
        })
    }

    pub fn size(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Int32 | Datatype::Float32 => 4,
            Datatype::Float64 => 8,
        }
    }
}

/// A decoded NIfTI volume.
#[derive(Debug, Clone)]
pub struct NiftiVolume {
    pub grid: VoxelGrid,
    pub datatype: Datatype,
    /// +1 when increasing width index moves toward world +x, -1 otherwise.
    pub width_axis_sign: f64,
}

pub fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

pub fn read_nifti(path: &Path) -> Result<NiftiVolume> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if is_gzip(&raw) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        out
    } else {
        raw
    };
    decode(&bytes, path)
}

fn header_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::InvalidHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<NiftiVolume> {
    if bytes.len() < HEADER_SIZE {
        return Err(header_err(
            path,
            format!("file is {} bytes, shorter than a NIfTI-1 header", bytes.len()),
        ));
    }
    if LittleEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        decode_with::<LittleEndian>(bytes, path)
    } else if BigEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        decode_with::<BigEndian>(bytes, path)
    } else {
        Err(header_err(path, "sizeof_hdr is not 348"))
    }
}

fn decode_with<B: ByteOrder>(bytes: &[u8], path: &Path) -> Result<NiftiVolume> {
    let magic = &bytes[344..348];
    if magic != b"n+1\0" {
        return Err(header_err(
            path,
            format!("magic {:?} is not single-file NIfTI-1", String::from_utf8_lossy(magic)),
        ));
    }
    let i16_at = |off: usize| B::read_i16(&bytes[off..off + 2]);
    let f32_at = |off: usize| B::read_f32(&bytes[off..off + 4]) as f64;

    let dim: Vec<i16> = (0..8).map(|i| i16_at(40 + 2 * i)).collect();
    let ndim = dim[0];
    if !(3..=7).contains(&ndim) {
        return Err(header_err(path, format!("dim[0] = {ndim}, expected a 3D volume")));
    }
    if (4..=ndim as usize).any(|i| dim[i] > 1) {
        return Err(header_err(path, format!("only 3D volumes are supported, dims {:?}", &dim[1..=ndim as usize])));
    }
    if dim[1..4].iter().any(|&d| d < 1) {
        return Err(header_err(path, format!("non-positive dimension in {:?}", &dim[1..4])));
    }
    let (nx, ny, nz) = (dim[1] as usize, dim[2] as usize, dim[3] as usize);

    let code = i16_at(70);
    let datatype = Datatype::from_code(code)
        .ok_or_else(|| Error::UnsupportedDatatype(format!("NIfTI datatype code {code}")))?;

    let pixdim: Vec<f64> = (0..8).map(|i| f32_at(76 + 4 * i)).collect();
    let spacing = [pixdim[3].abs(), pixdim[2].abs(), pixdim[1].abs()];
    if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(header_err(path, format!("non-positive pixdim {:?}", &pixdim[1..4])));
    }

    let vox_offset = f32_at(108);
    let offset = if vox_offset >= HEADER_SIZE as f64 { vox_offset as usize } else { DATA_OFFSET };
    let slope = f32_at(112);
    let inter = f32_at(116);
    let (slope, inter) = if slope != 0.0 && slope.is_finite() {
        (slope, if inter.is_finite() { inter } else { 0.0 })
    } else {
        (1.0, 0.0)
    };

    let qform_code = i16_at(252);
    let sform_code = i16_at(254);
    let (lin, trans) = if sform_code > 0 {
        let row = |off: usize| [f32_at(off), f32_at(off + 4), f32_at(off + 8), f32_at(off + 12)];
        let (rx, ry, rz) = (row(280), row(296), row(312));
        (
            [[rx[0], rx[1], rx[2]], [ry[0], ry[1], ry[2]], [rz[0], rz[1], rz[2]]],
            [rx[3], ry[3], rz[3]],
        )
    } else if qform_code > 0 {
        let (b, c, d) = (f32_at(256), f32_at(260), f32_at(264));
        let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
        let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let r = [
            [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
            [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
            [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ];
        let sp = [pixdim[1], pixdim[2], pixdim[3] * qfac];
        let lin = std::array::from_fn(|i| std::array::from_fn(|j| r[i][j] * sp[j]));
        (lin, [f32_at(268), f32_at(272), f32_at(276)])
    } else {
        ([[pixdim[1], 0.0, 0.0], [0.0, pixdim[2], 0.0], [0.0, 0.0, pixdim[3]]], [0.0; 3])
    };
    let width_axis_sign = if lin[0][0] < 0.0 { -1.0 } else { 1.0 };
    let origin = [trans[2], trans[1], trans[0]];

    let n = nx * ny * nz;
    let expected = n * datatype.size();
    let found = bytes.len().saturating_sub(offset);
    if found != expected {
        return Err(Error::DimensionMismatch { expected, found });
    }
    let payload = &bytes[offset..];
    let mut data = decode_payload::<B>(payload, datatype, n);
    if slope != 1.0 || inter != 0.0 {
        for v in &mut data {
            *v = *v * slope + inter;
        }
    }
    // NIfTI stores i fastest; (i, j, k) = (width, height, depth) matches our
    // storage order directly.
    let geom = Geometry::with_origin([nz, ny, nx], spacing, origin)?;
    Ok(NiftiVolume {
        grid: VoxelGrid::new(geom, data)?,
        datatype,
        width_axis_sign,
    })
}

fn decode_payload<B: ByteOrder>(p: &[u8], dt: Datatype, n: usize) -> Vec<f64> {
    let s = dt.size();
    (0..n)
        .map(|i| {
            let b = &p[i * s..(i + 1) * s];
            match dt {
                Datatype::Uint8 => b[0] as f64,
                Datatype::Int16 => B::read_i16(b) as f64,
                Datatype::Int32 => B::read_i32(b) as f64,
                Datatype::Float32 => B::read_f32(b) as f64,
                Datatype::Float64 => B::read_f64(b),
            }
        })
        .collect()
}

/// Encode a grid as a little-endian single-file NIfTI-1 image.
///
/// Only `Uint8` and `Float32` are written. The affine is stored as an sform
/// with diagonal `(±sx, sy, sz)` and the grid origin as translation.
pub fn encode(grid: &VoxelGrid, datatype: Datatype, width_axis_sign: f64) -> Result<Vec<u8>> {
    if !matches!(datatype, Datatype::Uint8 | Datatype::Float32) {
        return Err(Error::UnsupportedDatatype(format!(
            "writing {datatype:?} is not supported; use uint8 or float32"
        )));
    }
    let g = grid.geometry();
    let [nz, ny, nx] = g.dims;
    if [nx, ny, nz].iter().any(|&d| d == 0 || d > i16::MAX as usize) {
        return Err(Error::InvalidGeometry(format!("dims {:?} not representable in NIfTI-1", g.dims)));
    }
    let [sz, sy, sx] = g.spacing_mm;
    let [oz, oy, ox] = g.origin_mm;
    let mut h = vec![0u8; DATA_OFFSET];
    LittleEndian::write_i32(&mut h[0..4], HEADER_SIZE as i32);
    h[38] = b'r';
    for (i, d) in [3i16, nx as i16, ny as i16, nz as i16, 1, 1, 1, 1].iter().enumerate() {
        LittleEndian::write_i16(&mut h[40 + 2 * i..42 + 2 * i], *d);
    }
    LittleEndian::write_i16(&mut h[70..72], datatype.code());
    LittleEndian::write_i16(&mut h[72..74], (datatype.size() * 8) as i16);
    for (i, p) in [1.0f32, sx as f32, sy as f32, sz as f32, 0.0, 0.0, 0.0, 0.0].iter().enumerate() {
        LittleEndian::write_f32(&mut h[76 + 4 * i..80 + 4 * i], *p);
    }
    LittleEndian::write_f32(&mut h[108..112], DATA_OFFSET as f32);
    LittleEndian::write_f32(&mut h[112..116], 1.0);
    // xyzt_units: mm
    h[123] = 2;
    LittleEndian::write_i16(&mut h[254..256], 1);
    let sign = if width_axis_sign < 0.0 { -1.0 } else { 1.0 };
    let srow = [
        [sign * sx, 0.0, 0.0, ox],
        [0.0, sy, 0.0, oy],
        [0.0, 0.0, sz, oz],
    ];
    for (r, row) in srow.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let off = 280 + 16 * r + 4 * c;
            LittleEndian::write_f32(&mut h[off..off + 4], *v as f32);
        }
    }
    h[344..348].copy_from_slice(b"n+1\0");

    let mut out = h;
    out.reserve(grid.data().len() * datatype.size());
    for &v in grid.data() {
        match datatype {
            Datatype::Uint8 => out.push(v.round().clamp(0.0, 255.0) as u8),
            _ => {
                let mut b = [0u8; 4];
                LittleEndian::write_f32(&mut b, v as f32);
                out.extend_from_slice(&b);
            }
        }
    }
    Ok(out)
}

/// Write a NIfTI file; gzip-compressed when the path ends in `.gz`.
pub fn write_nifti(path: &Path, grid: &VoxelGrid, datatype: Datatype, width_axis_sign: f64) -> Result<()> {
    let bytes = encode(grid, datatype, width_axis_sign)?;
    let gz = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    if gz {
        // default gzip header has mtime 0, so output is byte-reproducible
        let mut enc = GzEncoder::new(w, Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?;
    } else {
        w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_grid() -> VoxelGrid {
        let g = Geometry::with_origin([3, 4, 5], [3.0, 0.45, 0.45], [-10.0, 2.5, 7.0]).unwrap();
        VoxelGrid::from_fn(g, |[d, h, w]| (d * 20 + h * 5 + w) as f64)
    }

    #[test]
    fn encode_decode_float32() {
        let grid = sample_grid();
        let bytes = encode(&grid, Datatype::Float32, 1.0).unwrap();
        let vol = decode(&bytes, Path::new("mem.nii")).unwrap();
        assert_eq!(vol.grid.dims(), [3, 4, 5]);
        assert_eq!(vol.grid.data(), grid.data());
        for a in 0..3 {
            assert!((vol.grid.spacing_mm()[a] - grid.spacing_mm()[a]).abs() < 1e-6);
            assert!((vol.grid.geometry().origin_mm[a] - grid.geometry().origin_mm[a]).abs() < 1e-5);
        }
        assert_eq!(vol.width_axis_sign, 1.0);
        assert_eq!(vol.datatype, Datatype::Float32);
    }

    #[test]
    fn width_sign_roundtrip() {
        let bytes = encode(&sample_grid(), Datatype::Uint8, -1.0).unwrap();
        let vol = decode(&bytes, Path::new("mem.nii")).unwrap();
        assert_eq!(vol.width_axis_sign, -1.0);
        assert_eq!(vol.grid.spacing_mm()[2], 0.45f32 as f64);
    }

    #[test]
    fn scaling_applied() {
        let grid = sample_grid();
        let mut bytes = encode(&grid, Datatype::Uint8, 1.0).unwrap();
        LittleEndian::write_f32(&mut bytes[112..116], 2.0);
        LittleEndian::write_f32(&mut bytes[116..120], -1.0);
        let vol = decode(&bytes, Path::new("mem.nii")).unwrap();
        for (a, b) in grid.data().iter().zip(vol.grid.data()) {
            assert_eq!(*b, a * 2.0 - 1.0);
        }
    }

    #[test]
    fn int16_big_endian() {
        // hand-built big-endian int16 header
        let mut h = vec![0u8; DATA_OFFSET];
        BigEndian::write_i32(&mut h[0..4], 348);
        for (i, d) in [3i16, 2, 1, 1, 1, 1, 1, 1].iter().enumerate() {
            BigEndian::write_i16(&mut h[40 + 2 * i..42 + 2 * i], *d);
        }
        BigEndian::write_i16(&mut h[70..72], 4);
        for (i, p) in [1.0f32, 0.5, 0.5, 3.0].iter().enumerate() {
            BigEndian::write_f32(&mut h[76 + 4 * i..80 + 4 * i], *p);
        }
        BigEndian::write_f32(&mut h[108..112], 352.0);
        h[344..348].copy_from_slice(b"n+1\0");
        h.extend_from_slice(&(-300i16).to_be_bytes());
        h.extend_from_slice(&1200i16.to_be_bytes());
        let vol = decode(&h, Path::new("be.nii")).unwrap();
        assert_eq!(vol.grid.data(), &[-300.0, 1200.0]);
        assert_eq!(vol.grid.spacing_mm(), [3.0, 0.5, 0.5]);
    }

    #[test]
    fn distinct_diagnostics() {
        let p = Path::new("x.nii");
        assert!(matches!(decode(&[0u8; 10], p), Err(Error::InvalidHeader { .. })));

        let mut bytes = encode(&sample_grid(), Datatype::Float32, 1.0).unwrap();
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(
            decode(&bytes, p),
            Err(Error::DimensionMismatch { expected: 240, found: 236 })
        ));

        let mut bytes = encode(&sample_grid(), Datatype::Float32, 1.0).unwrap();
        LittleEndian::write_i16(&mut bytes[70..72], 128); // RGB24
        assert!(matches!(decode(&bytes, p), Err(Error::UnsupportedDatatype(_))));

        let mut bytes = encode(&sample_grid(), Datatype::Float32, 1.0).unwrap();
        bytes[344..348].copy_from_slice(b"ni1\0");
        assert!(matches!(decode(&bytes, p), Err(Error::InvalidHeader { .. })));

        assert!(encode(&sample_grid(), Datatype::Int16, 1.0).is_err());
    }
}
