//! Symmetry channel: sagittal flip, rigid co-registration of the flipped
//! volume to the original and resampling into the original lattice.

mod registration;
mod transform;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::volgrid::{Interpolation, VoxelGrid};

pub use registration::{rigid_register, LevelTrace, Registration, RegistrationOptions};
pub use transform::{resample_transform, Affine, OutOfBounds, RigidTransform};

/// Reverse the width (left-right) axis. Spacing and origin are kept, so
/// the flip is about the physical midplane of the lattice.
pub fn flip_sagittal(grid: &VoxelGrid) -> VoxelGrid {
    let [_, _, w] = grid.dims();
    VoxelGrid::from_fn(*grid.geometry(), |[d, h, x]| grid.get(d, h, w - 1 - x))
}

/// Half of the width axis, by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidthHalf {
    /// Width indices below the midplane.
    Lower,
    /// Width indices above the midplane.
    Upper,
}

impl WidthHalf {
    fn contains(self, w: usize, width: usize) -> bool {
        // 2w + 1 is twice the voxel-center coordinate; the midplane sits at `width`
        match self {
            WidthHalf::Lower => 2 * w + 1 < width,
            WidthHalf::Upper => 2 * w + 1 > width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorMode {
    /// The whole flipped and co-registered volume.
    #[default]
    Full,
    /// Keep the original image and overwrite one half with the mirrored
    /// volume, so that half shows the reflected opposite hemisphere.
    ReplaceHalf(WidthHalf),
}

#[derive(Debug, Clone)]
pub struct MirrorChannel {
    pub channel: VoxelGrid,
    pub registration: Registration,
}

/// Build the mirrored channel for `image`.
pub fn build_mirror_channel(image: &VoxelGrid, opts: &RegistrationOptions, mode: MirrorMode) -> Result<MirrorChannel> {
    let flipped = flip_sagittal(image);
    let registration = rigid_register(&flipped, image, opts)?;
    let mirrored = resample_transform(
        &flipped,
        &registration.transform,
        image.geometry(),
        Interpolation::Trilinear,
        OutOfBounds::MinIntensity,
    );
    let channel = match mode {
        MirrorMode::Full => mirrored,
        MirrorMode::ReplaceHalf(half) => {
            let width = image.dims()[2];
            VoxelGrid::from_fn(*image.geometry(), |[d, h, w]| {
                if half.contains(w, width) {
                    mirrored.get(d, h, w)
                } else {
                    image.get(d, h, w)
                }
            })
        }
    };
    Ok(MirrorChannel { channel, registration })
}

/// Two-channel network input `[image, mirror]`.
pub fn model_input(image: &VoxelGrid, opts: &RegistrationOptions, mode: MirrorMode) -> Result<[VoxelGrid; 2]> {
    let m = build_mirror_channel(image, opts, mode)?;
    Ok([image.clone(), m.channel])
}
