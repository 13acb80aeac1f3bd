//! Voxel grids, binary masks and the operations that act on them directly.
//!
//! Axis order is always `(depth, height, width)`: depth indexes axial slices
//! and width is the left-right axis. Data are stored row-major with width
//! varying fastest, so voxel `(d, h, w)` lives at `(d * H + h) * W + w`.

mod io;
pub mod nifti;
pub mod raw;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::percentile_sorted;

pub use io::{load_mask, load_volume, save_mask, save_volume, VolumeKind};

/// Default binarization threshold for masks.
pub const DEFAULT_MASK_THRESHOLD: f64 = 0.5;

/// Dimensions and physical placement of a voxel lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    /// Physical position of the center of voxel `(0, 0, 0)`.
    pub origin_mm: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3]) -> Result<Self> {
        Self::with_origin(dims, spacing_mm, [0.0; 3])
    }

    pub fn with_origin(dims: [usize; 3], spacing_mm: [f64; 3], origin_mm: [f64; 3]) -> Result<Self> {
        if spacing_mm.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be positive and finite, got {spacing_mm:?}"
            )));
        }
        if origin_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGeometry(format!("non-finite origin {origin_mm:?}")));
        }
        Ok(Geometry {
            dims,
            spacing_mm,
            origin_mm,
        })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, d: usize, h: usize, w: usize) -> usize {
        (d * self.dims[1] + h) * self.dims[2] + w
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let w = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], w]
    }

    /// Voxel volume in mm³.
    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing_mm.iter().product()
    }

    /// Physical position of a (possibly fractional) voxel index.
    pub fn to_physical(&self, idx: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.origin_mm[a] + idx[a] * self.spacing_mm[a])
    }

    /// Fractional voxel index of a physical position.
    pub fn to_index(&self, p: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| (p[a] - self.origin_mm[a]) / self.spacing_mm[a])
    }

    /// Physical center of the lattice.
    pub fn center_mm(&self) -> [f64; 3] {
        self.to_physical(std::array::from_fn(|a| (self.dims[a] as f64 - 1.0) / 2.0))
    }

    /// Same dims and spacing (origin ignored; masks from different raters may
    /// carry slightly different headers).
    pub fn compatible(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self
                .spacing_mm
                .iter()
                .zip(other.spacing_mm.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-6 * a.abs().max(1.0))
    }

    pub fn ensure_compatible(&self, other: &Geometry) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "dims {:?} spacing {:?} vs dims {:?} spacing {:?}",
                self.dims, self.spacing_mm, other.dims, other.spacing_mm
            )))
        }
    }
}

/// Dense scalar volume.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    geom: Geometry,
    data: Vec<f64>,
}

impl VoxelGrid {
    pub fn new(geom: Geometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != geom.len() {
            return Err(Error::InvalidGeometry(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                geom.dims
            )));
        }
        Ok(VoxelGrid { geom, data })
    }

    pub fn filled(geom: Geometry, value: f64) -> Self {
        VoxelGrid {
            data: vec![value; geom.len()],
            geom,
        }
    }

    pub fn from_fn(geom: Geometry, mut f: impl FnMut([usize; 3]) -> f64) -> Self {
        let data = (0..geom.len()).map(|i| f(geom.coords(i))).collect();
        VoxelGrid { geom, data }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    pub fn spacing_mm(&self) -> [f64; 3] {
        self.geom.spacing_mm
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, d: usize, h: usize, w: usize) -> f64 {
        self.data[self.geom.index(d, h, w)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> VoxelGrid {
        VoxelGrid {
            geom: self.geom,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean and population standard deviation.
    pub fn mean_std(&self) -> (f64, f64) {
        mean_std(&self.data)
    }
}

pub(crate) fn mean_std(data: &[f64]) -> (f64, f64) {
    if data.is_empty() {
        return (0.0, 0.0);
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Binary segmentation mask. Voxels are stored as `0` / `1` bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    geom: Geometry,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn empty(geom: Geometry) -> Self {
        BinaryMask {
            data: vec![0; geom.len()],
            geom,
        }
    }

    /// Build from raw bytes; any nonzero byte counts as foreground.
    pub fn from_bytes(geom: Geometry, bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() != geom.len() {
            return Err(Error::InvalidGeometry(format!(
                "mask length {} does not match dims {:?}",
                bytes.len(),
                geom.dims
            )));
        }
        let data = bytes.into_iter().map(|b| u8::from(b != 0)).collect();
        Ok(BinaryMask { geom, data })
    }

    pub fn from_fn(geom: Geometry, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let data = (0..geom.len()).map(|i| u8::from(f(geom.coords(i)))).collect();
        BinaryMask { geom, data }
    }

    /// Mask with the given voxel indices set.
    pub fn from_voxels(geom: Geometry, voxels: &[[usize; 3]]) -> Result<Self> {
        let mut m = BinaryMask::empty(geom);
        for v in voxels {
            if (0..3).any(|a| v[a] >= geom.dims[a]) {
                return Err(Error::InvalidArgument(format!(
                    "voxel {v:?} outside dims {:?}",
                    geom.dims
                )));
            }
            m.set(*v, true);
        }
        Ok(m)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    pub fn spacing_mm(&self) -> [f64; 3] {
        self.geom.spacing_mm
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn is_set(&self, v: [usize; 3]) -> bool {
        self.data[self.geom.index(v[0], v[1], v[2])] != 0
    }

    #[inline]
    pub fn is_set_index(&self, idx: usize) -> bool {
        self.data[idx] != 0
    }

    pub fn set(&mut self, v: [usize; 3], on: bool) {
        let i = self.geom.index(v[0], v[1], v[2]);
        self.data[i] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&b| b == 0)
    }

    /// Foreground voxel indices in storage order.
    pub fn voxels(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(|(i, _)| self.geom.coords(i))
    }

    pub fn to_grid(&self) -> VoxelGrid {
        VoxelGrid {
            geom: self.geom,
            data: self.data.iter().map(|&b| f64::from(b)).collect(),
        }
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.geom.ensure_compatible(&other.geom)?;
        Ok(BinaryMask {
            geom: self.geom,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a | b).collect(),
        })
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.geom.ensure_compatible(&other.geom)?;
        Ok(BinaryMask {
            geom: self.geom,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a & b).collect(),
        })
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            geom: self.geom,
            data: self.data.iter().map(|&b| 1 - b).collect(),
        }
    }
}

/// Voxel is foreground iff its value is strictly greater than `threshold`.
pub fn binarize(grid: &VoxelGrid, threshold: f64) -> BinaryMask {
    BinaryMask {
        geom: grid.geom,
        data: grid.data.iter().map(|&v| u8::from(v > threshold)).collect(),
    }
}

/// Foreground volume in millilitres.
pub fn volume_ml(mask: &BinaryMask) -> f64 {
    mask.count() as f64 * mask.geom.voxel_volume_mm3() / 1000.0
}

/// Default intensity clip percentiles for CT normalization.
pub const CT_CLIP_PERCENTILES: (f64, f64) = (0.5, 99.5);

/// Percentile clipping followed by z-scoring.
///
/// Clip bounds are the `lo_pct` / `hi_pct` percentiles of the nonzero voxels.
/// Zero voxels are treated as background padding and are not clipped; mean
/// and standard deviation are then taken over the whole clipped volume. A
/// volume with zero variance maps to all zeros.
pub fn normalize_ct(grid: &VoxelGrid, lo_pct: f64, hi_pct: f64) -> Result<VoxelGrid> {
    if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct >= hi_pct {
        return Err(Error::InvalidArgument(format!(
            "clip percentiles must satisfy 0 <= lo < hi <= 100, got ({lo_pct}, {hi_pct})"
        )));
    }
    let mut nonzero: Vec<f64> = grid.data.iter().copied().filter(|&v| v != 0.0).collect();
    nonzero.sort_by(f64::total_cmp);
    let clipped = match (percentile_sorted(&nonzero, lo_pct), percentile_sorted(&nonzero, hi_pct)) {
        (Some(lo), Some(hi)) => grid
            .data
            .iter()
            .map(|&v| if v == 0.0 { 0.0 } else { v.clamp(lo, hi) })
            .collect::<Vec<_>>(),
        _ => grid.data.clone(),
    };
    let (mean, std) = mean_std(&clipped);
    let data = if std > 0.0 && std.is_finite() {
        clipped.iter().map(|v| (v - mean) / std).collect()
    } else {
        vec![0.0; clipped.len()]
    };
    VoxelGrid::new(grid.geom, data)
}

/// Interpolation scheme for resampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

/// Sample `grid` at a fractional voxel index. Indices outside the lattice
/// are clamped to the edge.
pub fn sample_clamped(grid: &VoxelGrid, idx: [f64; 3], interp: Interpolation) -> f64 {
    let dims = grid.geom.dims;
    let c: [f64; 3] = std::array::from_fn(|a| idx[a].clamp(0.0, (dims[a] - 1) as f64));
    match interp {
        Interpolation::Nearest => {
            let i: [usize; 3] = std::array::from_fn(|a| (c[a].round() as usize).min(dims[a] - 1));
            grid.get(i[0], i[1], i[2])
        }
        Interpolation::Trilinear => trilinear(grid, c),
    }
}

/// Trilinear interpolation at an in-bounds fractional index.
#[inline]
pub(crate) fn trilinear(grid: &VoxelGrid, c: [f64; 3]) -> f64 {
    let dims = grid.geom.dims;
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut t = [0.0f64; 3];
    for a in 0..3 {
        let f = c[a].floor();
        lo[a] = (f as usize).min(dims[a] - 1);
        hi[a] = (lo[a] + 1).min(dims[a] - 1);
        t[a] = c[a] - f;
    }
    let g = |d: usize, h: usize, w: usize| grid.data[(d * dims[1] + h) * dims[2] + w];
    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
    let c00 = lerp(g(lo[0], lo[1], lo[2]), g(lo[0], lo[1], hi[2]), t[2]);
    let c01 = lerp(g(lo[0], hi[1], lo[2]), g(lo[0], hi[1], hi[2]), t[2]);
    let c10 = lerp(g(hi[0], lo[1], lo[2]), g(hi[0], lo[1], hi[2]), t[2]);
    let c11 = lerp(g(hi[0], hi[1], lo[2]), g(hi[0], hi[1], hi[2]), t[2]);
    let c0 = lerp(c00, c01, t[1]);
    let c1 = lerp(c10, c11, t[1]);
    lerp(c0, c1, t[0])
}

/// Resample onto a new spacing covering the same physical extent.
///
/// Output dims are `round(dims * old / new)` per axis. Voxel centers are
/// placed so that the outer faces of the lattice stay put; edge samples are
/// clamped to the input lattice.
pub fn resample(grid: &VoxelGrid, new_spacing: [f64; 3], interp: Interpolation) -> Result<VoxelGrid> {
    if new_spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "target spacing must be positive, got {new_spacing:?}"
        )));
    }
    let g = grid.geom;
    if new_spacing == g.spacing_mm {
        return Ok(grid.clone());
    }
    let mut dims = [0usize; 3];
    for a in 0..3 {
        let extent = g.dims[a] as f64 * g.spacing_mm[a];
        dims[a] = (extent / new_spacing[a]).round() as usize;
        if dims[a] == 0 {
            return Err(Error::InvalidGeometry(format!(
                "resampling axis {a} (extent {extent} mm) to spacing {} mm leaves zero voxels",
                new_spacing[a]
            )));
        }
    }
    let origin = std::array::from_fn(|a| g.origin_mm[a] + 0.5 * (new_spacing[a] - g.spacing_mm[a]));
    let out_geom = Geometry::with_origin(dims, new_spacing, origin)?;
    let scale: [f64; 3] = std::array::from_fn(|a| new_spacing[a] / g.spacing_mm[a]);
    let data = (0..out_geom.len())
        .map(|i| {
            let o = out_geom.coords(i);
            let src = std::array::from_fn(|a| (o[a] as f64 + 0.5) * scale[a] - 0.5);
            sample_clamped(grid, src, interp)
        })
        .collect();
    VoxelGrid::new(out_geom, data)
}

/// Resample a mask with nearest-neighbour interpolation; the result stays binary.
pub fn resample_mask(mask: &BinaryMask, new_spacing: [f64; 3]) -> Result<BinaryMask> {
    let g = resample(&mask.to_grid(), new_spacing, Interpolation::Nearest)?;
    Ok(binarize(&g, DEFAULT_MASK_THRESHOLD))
}
