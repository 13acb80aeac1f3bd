//! Surface voxels and the distance metrics defined on them.

use crate::distance::squared_edt;
use crate::error::{Error, Result};
use crate::quantile::percentile_sorted;
use crate::volgrid::BinaryMask;

use super::HAUSDORFF_PERCENTILE;

/// Foreground voxels with at least one background face-neighbour. Voxels on
/// the lattice boundary count as surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSet {
    /// Voxel indices in storage order.
    pub voxels: Vec<[usize; 3]>,
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
}

impl SurfaceSet {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

pub fn surface_extract(mask: &BinaryMask) -> SurfaceSet {
    let g = mask.geometry();
    let [nd, nh, nw] = g.dims;
    let bytes = mask.as_bytes();
    let mut voxels = Vec::new();
    for d in 0..nd {
        for h in 0..nh {
            for w in 0..nw {
                let i = g.index(d, h, w);
                if bytes[i] == 0 {
                    continue;
                }
                let on_boundary = d == 0 || h == 0 || w == 0 || d + 1 == nd || h + 1 == nh || w + 1 == nw;
                if on_boundary
                    || bytes[i - nh * nw] == 0
                    || bytes[i + nh * nw] == 0
                    || bytes[i - nw] == 0
                    || bytes[i + nw] == 0
                    || bytes[i - 1] == 0
                    || bytes[i + 1] == 0
                {
                    voxels.push([d, h, w]);
                }
            }
        }
    }
    SurfaceSet {
        voxels,
        dims: g.dims,
        spacing_mm: g.spacing_mm,
    }
}

/// For each voxel of `from`, the physical distance (mm) to the nearest voxel
/// of `to`. `None` when either set is empty.
pub fn directed_distances(from: &SurfaceSet, to: &SurfaceSet) -> Option<Vec<f64>> {
    if from.is_empty() || to.is_empty() {
        return None;
    }
    // Both sets lie inside their joint bounding box, so the transform over
    // the box is exact for every query.
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for v in from.voxels.iter().chain(&to.voxels) {
        for a in 0..3 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    let dims: [usize; 3] = std::array::from_fn(|a| hi[a] - lo[a] + 1);
    let local = |v: &[usize; 3]| ((v[0] - lo[0]) * dims[1] + (v[1] - lo[1])) * dims[2] + (v[2] - lo[2]);
    let mut features = vec![false; dims.iter().product()];
    for v in &to.voxels {
        features[local(v)] = true;
    }
    let field = squared_edt(&features, dims, from.spacing_mm);
    Some(from.voxels.iter().map(|v| field[local(v)].sqrt()).collect())
}

/// Directed surface distances in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDistances {
    pub pred_to_ref: Vec<f64>,
    pub ref_to_pred: Vec<f64>,
}

impl SurfaceDistances {
    pub fn between(pred: &SurfaceSet, reference: &SurfaceSet) -> Option<Self> {
        Some(SurfaceDistances {
            pred_to_ref: directed_distances(pred, reference)?,
            ref_to_pred: directed_distances(reference, pred)?,
        })
    }

    /// Max of the two directed 95th percentiles.
    pub fn hd95(&self) -> f64 {
        let p = |d: &[f64]| {
            let mut s = d.to_vec();
            s.sort_by(f64::total_cmp);
            percentile_sorted(&s, HAUSDORFF_PERCENTILE).unwrap_or(0.0)
        };
        p(&self.pred_to_ref).max(p(&self.ref_to_pred))
    }

    /// Fraction of all surface voxels lying within `tol_mm` of the other surface.
    pub fn surface_dice(&self, tol_mm: f64) -> f64 {
        let within = |d: &[f64]| d.iter().filter(|&&x| x <= tol_mm).count();
        let total = self.pred_to_ref.len() + self.ref_to_pred.len();
        (within(&self.pred_to_ref) + within(&self.ref_to_pred)) as f64 / total as f64
    }
}

pub(crate) fn check_tolerance(tol_mm: f64) -> Result<()> {
    if tol_mm.is_nan() || tol_mm < 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be >= 0 mm, got {tol_mm}")));
    }
    Ok(())
}

/// Symmetric 95th-percentile Hausdorff distance; `None` if either mask is empty.
pub fn hd95(pred: &BinaryMask, reference: &BinaryMask) -> Result<Option<f64>> {
    pred.geometry().ensure_compatible(reference.geometry())?;
    Ok(SurfaceDistances::between(&surface_extract(pred), &surface_extract(reference)).map(|d| d.hd95()))
}

/// Surface Dice at tolerance; `None` if either mask is empty (the record-level
/// policy assigns the forced value).
pub fn surface_dice_at_tolerance(pred: &BinaryMask, reference: &BinaryMask, tol_mm: f64) -> Result<Option<f64>> {
    check_tolerance(tol_mm)?;
    pred.geometry().ensure_compatible(reference.geometry())?;
    Ok(SurfaceDistances::between(&surface_extract(pred), &surface_extract(reference)).map(|d| d.surface_dice(tol_mm)))
}
