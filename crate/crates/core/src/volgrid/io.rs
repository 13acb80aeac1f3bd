use std::path::Path;

use super::nifti::{self, Datatype};
use super::raw::{self, RawDtype};
use super::{binarize, BinaryMask, VoxelGrid, DEFAULT_MASK_THRESHOLD};
use crate::error::{Error, Result};

/// What a file is expected to contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeKind {
    Image,
    /// Values are binarized at [`DEFAULT_MASK_THRESHOLD`] on load.
    Mask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Nifti,
    Raw,
}

fn format_of(path: &Path) -> Result<Format> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    if name.ends_with(".nii") || name.ends_with(".nii.gz") {
        Ok(Format::Nifti)
    } else if name.ends_with(".json") || name.ends_with(".raw") {
        Ok(Format::Raw)
    } else {
        Err(Error::UnsupportedFormat(format!(
            "{} (expected .nii, .nii.gz, or a .json/.raw pair)",
            path.display()
        )))
    }
}

/// Load a volume from NIfTI-1 or the raw sidecar format.
pub fn load_volume(path: &Path, kind: VolumeKind) -> Result<VoxelGrid> {
    let grid = match format_of(path)? {
        Format::Nifti => nifti::read_nifti(path)?.grid,
        Format::Raw => raw::read_raw(path)?,
    };
    Ok(match kind {
        VolumeKind::Image => grid,
        VolumeKind::Mask => binarize(&grid, DEFAULT_MASK_THRESHOLD).to_grid(),
    })
}

/// Load and binarize a mask.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let grid = load_volume(path, VolumeKind::Image)?;
    Ok(binarize(&grid, DEFAULT_MASK_THRESHOLD))
}

/// Save an intensity volume (float32 NIfTI, or float64 raw).
pub fn save_volume(path: &Path, grid: &VoxelGrid) -> Result<()> {
    match format_of(path)? {
        Format::Nifti => nifti::write_nifti(path, grid, Datatype::Float32, 1.0),
        Format::Raw => raw::write_raw(path, grid, RawDtype::Float64),
    }
}

/// Save a mask as uint8.
pub fn save_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let grid = mask.to_grid();
    match format_of(path)? {
        Format::Nifti => nifti::write_nifti(path, &grid, Datatype::Uint8, 1.0),
        Format::Raw => raw::write_raw(path, &grid, RawDtype::Uint8),
    }
}
