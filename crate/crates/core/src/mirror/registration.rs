use log::warn;
use serde::{Deserialize, Serialize};

use super::transform::{inside, IndexMap, RigidTransform};
use crate::error::{Error, Result};
use crate::volgrid::{trilinear, Geometry, VoxelGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationOptions {
    /// Downsampling factors, coarse to fine, ending in 1.
    pub pyramid: Vec<usize>,
    /// Coordinate-descent cycles per level.
    pub max_iterations: usize,
    pub translation_tol_mm: f64,
    pub rotation_tol_rad: f64,
    /// Half-width of the first line-search window on the coarsest level.
    pub translation_search_mm: f64,
    pub rotation_search_rad: f64,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        RegistrationOptions {
            pyramid: vec![4, 2, 1],
            max_iterations: 30,
            translation_tol_mm: 0.05,
            rotation_tol_rad: 1e-3,
            translation_search_mm: 16.0,
            rotation_search_rad: 16f64.to_radians(),
        }
    }
}

impl RegistrationOptions {
    pub fn validate(&self) -> Result<()> {
        let p = &self.pyramid;
        if p.is_empty() || p.contains(&0) || p.last() != Some(&1) || p.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(format!(
                "pyramid factors must be positive and descend to 1, got {p:?}"
            )));
        }
        for (name, v) in [
            ("translation tolerance", self.translation_tol_mm),
            ("rotation tolerance", self.rotation_tol_rad),
            ("translation search", self.translation_search_mm),
            ("rotation search", self.rotation_search_rad),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub factor: usize,
    pub mse_before: f64,
    pub mse_after: f64,
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub transform: RigidTransform,
    pub levels: Vec<LevelTrace>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

/// Rigidly align `moving` to `fixed` by minimizing the mean squared
/// difference of z-scored intensities.
///
/// The returned transform maps moving-space points into fixed space and is
/// meant for [`super::resample_transform`] with `fixed`'s geometry as target.
/// Each level runs golden-section line searches over the six parameters in
/// turn and only accepts improvements, so the objective never increases.
pub fn rigid_register(moving: &VoxelGrid, fixed: &VoxelGrid, opts: &RegistrationOptions) -> Result<Registration> {
    opts.validate()?;
    let (Some(mov), Some(fix)) = (standardize(moving), standardize(fixed)) else {
        let msg = "zero-variance image; registration skipped, identity returned".to_string();
        warn!("{msg}");
        return Ok(Registration {
            transform: RigidTransform::identity(),
            levels: Vec::new(),
            warning: Some(msg),
        });
    };
    if !extents_overlap(mov.geometry(), fix.geometry()) {
        return Err(Error::InvalidArgument("moving and fixed images do not overlap physically".into()));
    }
    let center = fixed.geometry().center_mm();
    let min_spacing = fixed.spacing_mm().iter().copied().fold(f64::INFINITY, f64::min);
    let fill = mov.min_value();

    let mut params = [0.0f64; 6];
    let mut levels = Vec::with_capacity(opts.pyramid.len());
    for (li, &factor) in opts.pyramid.iter().enumerate() {
        let fix_l = block_average(&fix, factor, min_spacing);
        let mov_l = block_average(&mov, factor, min_spacing);
        let objective = Objective {
            fixed: &fix_l,
            moving: &mov_l,
            center,
            fill,
        };
        let scale = 0.5f64.powi(li as i32);
        let mut step = [
            opts.rotation_search_rad * scale,
            opts.rotation_search_rad * scale,
            opts.rotation_search_rad * scale,
            opts.translation_search_mm * scale,
            opts.translation_search_mm * scale,
            opts.translation_search_mm * scale,
        ];
        let tol = [
            opts.rotation_tol_rad,
            opts.rotation_tol_rad,
            opts.rotation_tol_rad,
            opts.translation_tol_mm,
            opts.translation_tol_mm,
            opts.translation_tol_mm,
        ];
        let mse_before = objective.eval(&params);
        let mut current = mse_before;
        let mut cycles = 0;
        while cycles < opts.max_iterations {
            cycles += 1;
            let mut converged = true;
            for k in 0..6 {
                let x0 = params[k];
                let mut trial = params;
                let (x, fx) = golden_section(
                    |v| {
                        trial[k] = v;
                        objective.eval(&trial)
                    },
                    x0 - step[k],
                    x0 + step[k],
                    tol[k],
                );
                if fx < current {
                    if (x - x0).abs() >= tol[k] {
                        converged = false;
                    }
                    params[k] = x;
                    current = fx;
                }
            }
            if converged {
                break;
            }
            for k in 0..6 {
                step[k] = (step[k] * 0.5).max(8.0 * tol[k]);
            }
        }
        levels.push(LevelTrace {
            factor,
            mse_before,
            mse_after: current,
            cycles,
        });
    }
    Ok(Registration {
        transform: RigidTransform::from_params(&params),
        levels,
        warning: None,
    })
}

fn standardize(grid: &VoxelGrid) -> Option<VoxelGrid> {
    let (mean, std) = grid.mean_std();
    if !(std > 0.0 && std.is_finite()) {
        return None;
    }
    Some(grid.map(|v| (v - mean) / std))
}

fn extents_overlap(a: &Geometry, b: &Geometry) -> bool {
    (0..3).all(|k| {
        let (a0, a1) = (a.origin_mm[k], a.origin_mm[k] + (a.dims[k] - 1) as f64 * a.spacing_mm[k]);
        let (b0, b1) = (b.origin_mm[k], b.origin_mm[k] + (b.dims[k] - 1) as f64 * b.spacing_mm[k]);
        a0 <= b1 + 1e-9 && b0 <= a1 + 1e-9
    })
}

/// Block-average by a per-axis factor chosen so that the coarse voxels
/// are roughly `factor * min_spacing` wide. Trailing partial blocks are
/// dropped.
fn block_average(grid: &VoxelGrid, factor: usize, min_spacing: f64) -> VoxelGrid {
    let g = grid.geometry();
    let f: [usize; 3] = std::array::from_fn(|a| {
        let want = (factor as f64 * min_spacing / g.spacing_mm[a]).round() as usize;
        want.clamp(1, g.dims[a])
    });
    if f == [1, 1, 1] {
        return grid.clone();
    }
    let dims: [usize; 3] = std::array::from_fn(|a| g.dims[a] / f[a]);
    let spacing: [f64; 3] = std::array::from_fn(|a| g.spacing_mm[a] * f[a] as f64);
    let origin: [f64; 3] = std::array::from_fn(|a| g.origin_mm[a] + 0.5 * (f[a] - 1) as f64 * g.spacing_mm[a]);
    let geom = Geometry::with_origin(dims, spacing, origin).expect("coarse geometry derived from a valid one");
    let norm = 1.0 / (f[0] * f[1] * f[2]) as f64;
    VoxelGrid::from_fn(geom, |[d, h, w]| {
        let mut s = 0.0;
        for dd in d * f[0]..(d + 1) * f[0] {
            for hh in h * f[1]..(h + 1) * f[1] {
                for ww in w * f[2]..(w + 1) * f[2] {
                    s += grid.get(dd, hh, ww);
                }
            }
        }
        s * norm
    })
}

struct Objective<'a> {
    fixed: &'a VoxelGrid,
    moving: &'a VoxelGrid,
    center: [f64; 3],
    fill: f64,
}

impl Objective<'_> {
    fn eval(&self, params: &[f64; 6]) -> f64 {
        let inv = RigidTransform::from_params(params).to_affine(self.center).inverse();
        let fg = self.fixed.geometry();
        let map = IndexMap::new(&inv, fg, self.moving.geometry());
        let md = self.moving.dims();
        let fd = fg.dims;
        let fixed = self.fixed.data();
        let mut sum = 0.0;
        let mut i = 0;
        for d in 0..fd[0] {
            for h in 0..fd[1] {
                let row = map.map([d, h, 0]);
                let step = map.map([d, h, 1]);
                let dw: [f64; 3] = std::array::from_fn(|a| step[a] - row[a]);
                for w in 0..fd[2] {
                    let wf = w as f64;
                    let idx = [row[0] + dw[0] * wf, row[1] + dw[1] * wf, row[2] + dw[2] * wf];
                    let mv = match inside(idx, md) {
                        Some(c) => trilinear(self.moving, c),
                        None => self.fill,
                    };
                    let e = mv - fixed[i];
                    sum += e * e;
                    i += 1;
                }
            }
        }
        sum / fixed.len() as f64
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`, stopping once the
/// bracket is narrower than `tol`. Returns the best point evaluated.
fn golden_section(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
