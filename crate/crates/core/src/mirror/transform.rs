use serde::{Deserialize, Serialize};

use crate::volgrid::{sample_clamped, trilinear, Geometry, Interpolation, VoxelGrid};

/// 6-DOF rigid transform in physical millimetres.
///
/// Angles and translations are given per axis in `(depth, height, width)`
/// order. The rotation is about the physical center of the reference
/// lattice and is composed depth-axis first, then height, then width:
/// `p' = R_w R_h R_d (p - c) + c + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation_rad: [f64; 3],
    pub translation_mm: [f64; 3],
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn translation(t: [f64; 3]) -> Self {
        RigidTransform {
            rotation_rad: [0.0; 3],
            translation_mm: t,
        }
    }

    pub fn from_params(p: &[f64; 6]) -> Self {
        RigidTransform {
            rotation_rad: [p[0], p[1], p[2]],
            translation_mm: [p[3], p[4], p[5]],
        }
    }

    pub fn params(&self) -> [f64; 6] {
        let (r, t) = (self.rotation_rad, self.translation_mm);
        [r[0], r[1], r[2], t[0], t[1], t[2]]
    }

    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let [rd, rh, rw] = self.rotation_rad;
        matmul(&axis_rotation(2, rw), &matmul(&axis_rotation(1, rh), &axis_rotation(0, rd)))
    }

    /// Point map as an affine, with rotation about `center_mm`.
    pub fn to_affine(&self, center_mm: [f64; 3]) -> Affine {
        let m = self.rotation_matrix();
        let rc = apply_linear(&m, center_mm);
        Affine {
            linear: m,
            offset: std::array::from_fn(|a| center_mm[a] + self.translation_mm[a] - rc[a]),
        }
    }
}

/// Rotation about axis `axis` (0 = depth, 1 = height, 2 = width), right
/// handed in `(width, height, depth)` = `(x, y, z)` terms.
fn axis_rotation(axis: usize, angle: f64) -> [[f64; 3]; 3] {
    // (b, c) span the rotation plane with b -> c for positive angles
    let (b, c) = match axis {
        0 => (2, 1),
        1 => (0, 2),
        _ => (1, 0),
    };
    let (s, co) = angle.sin_cos();
    let mut m = [[0.0; 3]; 3];
    m[axis][axis] = 1.0;
    m[b][b] = co;
    m[b][c] = -s;
    m[c][b] = s;
    m[c][c] = co;
    m
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

fn apply_linear(m: &[[f64; 3]; 3], p: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2])
}

/// `p -> linear * p + offset`, with an orthonormal linear part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub linear: [[f64; 3]; 3],
    pub offset: [f64; 3],
}

impl Affine {
    pub fn identity() -> Self {
        Affine {
            linear: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            offset: [0.0; 3],
        }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let l = apply_linear(&self.linear, p);
        std::array::from_fn(|a| l[a] + self.offset[a])
    }

    /// Inverse of a rigid map (transpose of the rotation).
    pub fn inverse(&self) -> Affine {
        let lt: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| self.linear[j][i]));
        let o = apply_linear(&lt, self.offset);
        Affine {
            linear: lt,
            offset: [-o[0], -o[1], -o[2]],
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Affine) -> Affine {
        let o = apply_linear(&self.linear, other.offset);
        Affine {
            linear: matmul(&self.linear, &other.linear),
            offset: std::array::from_fn(|a| o[a] + self.offset[a]),
        }
    }

    /// Rotation angle of the linear part, radians.
    pub fn rotation_angle(&self) -> f64 {
        let tr = self.linear[0][0] + self.linear[1][1] + self.linear[2][2];
        ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

/// Fill policy for samples that map outside the source lattice.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum OutOfBounds {
    /// Minimum intensity of the source grid.
    #[default]
    MinIntensity,
    Constant(f64),
}

/// Resample `grid` onto `target` through `t`.
///
/// Each target voxel center `q` takes the value of `grid` at `t⁻¹(q)`; the
/// rotation center is the physical center of `target`.
pub fn resample_transform(
    grid: &VoxelGrid,
    t: &RigidTransform,
    target: &Geometry,
    interp: Interpolation,
    fill: OutOfBounds,
) -> VoxelGrid {
    let fill = match fill {
        OutOfBounds::MinIntensity => grid.min_value(),
        OutOfBounds::Constant(v) => v,
    };
    let inv = t.to_affine(target.center_mm()).inverse();
    let mapper = IndexMap::new(&inv, target, grid.geometry());
    let src_dims = grid.dims();
    let data = (0..target.len())
        .map(|i| {
            let idx = mapper.map(target.coords(i));
            match inside(idx, src_dims) {
                Some(c) => match interp {
                    Interpolation::Trilinear => trilinear(grid, c),
                    Interpolation::Nearest => sample_clamped(grid, c, Interpolation::Nearest),
                },
                None => fill,
            }
        })
        .collect();
    VoxelGrid::new(*target, data).expect("target geometry defines the length")
}

const EDGE_EPS: f64 = 1e-9;

/// Clamp an index that lies within `EDGE_EPS` of the lattice, or `None`
/// when it is outside.
#[inline]
pub(crate) fn inside(idx: [f64; 3], dims: [usize; 3]) -> Option<[f64; 3]> {
    let mut out = idx;
    for a in 0..3 {
        let hi = (dims[a] - 1) as f64;
        if idx[a] < -EDGE_EPS || idx[a] > hi + EDGE_EPS {
            return None;
        }
        out[a] = idx[a].clamp(0.0, hi);
    }
    Some(out)
}

/// Affine map from target voxel index to source voxel index.
pub(crate) struct IndexMap {
    k: [[f64; 3]; 3],
    k0: [f64; 3],
}

impl IndexMap {
    /// `point_map` takes target physical points to source physical points.
    pub(crate) fn new(point_map: &Affine, target: &Geometry, source: &Geometry) -> Self {
        let o = point_map.apply(target.origin_mm);
        IndexMap {
            k: std::array::from_fn(|a| {
                std::array::from_fn(|b| point_map.linear[a][b] * target.spacing_mm[b] / source.spacing_mm[a])
            }),
            k0: std::array::from_fn(|a| (o[a] - source.origin_mm[a]) / source.spacing_mm[a]),
        }
    }

    #[inline]
    pub(crate) fn map(&self, i: [usize; 3]) -> [f64; 3] {
        let f = [i[0] as f64, i[1] as f64, i[2] as f64];
        std::array::from_fn(|a| self.k0[a] + self.k[a][0] * f[0] + self.k[a][1] * f[1] + self.k[a][2] * f[2])
    }
}
