//! Agreement evaluation for 3D lesion segmentations.
//!
//! The crate covers the full evaluation protocol for binary segmentation
//! masks on anisotropic voxel grids:
//!
//! * [`volgrid`]: voxel grids, NIfTI / raw ingestion, binarization,
//!   intensity normalization and resampling.
//! * [`metrics`]: volumetric, overlap and surface-distance agreement metrics
//!   with an explicit empty-mask policy, plus a forward Dice + focal loss.
//! * [`stats`]: bootstrapped medians, one-sided Wilcoxon signed-rank
//!   non-inferiority tests, Holm step-down adjustment and Spearman's rho.
//! * [`mirror`]: sagittal flip, rigid registration and the mirrored
//!   contralateral input channel.
//! * [`cohort`]: manifests, deterministic splits, multi-rater agreement
//!   studies and non-inferiority reports.
//! * [`synth`]: seeded synthetic lesions, rater perturbations and cohorts.

pub mod cohort;
pub mod config;
pub mod distance;
pub mod error;
pub mod metrics;
pub mod mirror;
pub mod quantile;
pub mod stats;
pub mod synth;
pub mod volgrid;

pub use error::{Error, Result};
pub use volgrid::{BinaryMask, Geometry, VoxelGrid};
