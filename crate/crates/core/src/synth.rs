//! Seeded synthetic lesions, rater perturbations, cohorts and a smooth
//! intensity phantom for registration checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{CaseEntry, Manifest, Roles};
use crate::distance::{dilate_ball, erode_ball};
use crate::error::{Error, Result};
use crate::mirror::RigidTransform;
use crate::stats::derive_seed;
use crate::volgrid::{save_mask, BinaryMask, Geometry, VoxelGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionSpec {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub n_ellipsoids: usize,
    /// Semi-axis lengths are drawn uniformly from this range.
    pub radius_mm: (f64, f64),
    /// Each ellipsoid center is offset from the lattice center by up to this
    /// much per axis.
    pub center_jitter_mm: f64,
    pub seed: u64,
}

impl Default for LesionSpec {
    fn default() -> Self {
        LesionSpec {
            dims: [16, 48, 48],
            spacing_mm: [3.0, 0.9, 0.9],
            n_ellipsoids: 3,
            radius_mm: (5.0, 10.0),
            center_jitter_mm: 5.0,
            seed: 0,
        }
    }
}

impl LesionSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.radius_mm;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius range must satisfy 0 < lo <= hi, got ({lo}, {hi})")));
        }
        if !(self.center_jitter_mm >= 0.0 && self.center_jitter_mm.is_finite()) {
            return Err(Error::InvalidArgument("center jitter must be >= 0".into()));
        }
        Geometry::new(self.dims, self.spacing_mm).map(|_| ())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.dims, self.spacing_mm)
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Union of axis-aligned ellipsoids rasterized at voxel centers.
pub fn generate_lesion(spec: &LesionSpec) -> Result<BinaryMask> {
    spec.validate()?;
    let geom = spec.geometry()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = geom.center_mm();
    let j = spec.center_jitter_mm;
    let ellipsoids: Vec<([f64; 3], [f64; 3])> = (0..spec.n_ellipsoids)
        .map(|_| {
            let center: [f64; 3] = std::array::from_fn(|a| c[a] + uniform(&mut rng, (-j, j)));
            let radii: [f64; 3] = std::array::from_fn(|_| uniform(&mut rng, spec.radius_mm));
            (center, radii)
        })
        .collect();
    Ok(BinaryMask::from_fn(geom, |i| {
        let p = geom.to_physical([i[0] as f64, i[1] as f64, i[2] as f64]);
        ellipsoids.iter().any(|(c, r)| {
            (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0
        })
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterSpec {
    /// Ball radius range in mm; positive dilates, negative erodes.
    pub radius_mm: (f64, f64),
    /// Probability of flipping each boundary voxel.
    pub flip_prob: f64,
    /// Probability of returning an empty mask.
    pub empty_prob: f64,
    /// Largest random whole-mask shift per axis in mm, rounded to voxels.
    #[serde(default)]
    pub shift_mm: f64,
    /// Fixed whole-mask offset in mm, added to the random shift.
    #[serde(default)]
    pub offset_mm: [f64; 3],
}

impl Default for RaterSpec {
    fn default() -> Self {
        RaterSpec::identity()
    }
}

impl RaterSpec {
    pub fn identity() -> Self {
        RaterSpec {
            radius_mm: (0.0, 0.0),
            flip_prob: 0.0,
            empty_prob: 0.0,
            shift_mm: 0.0,
            offset_mm: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("flip", self.flip_prob), ("empty", self.empty_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} probability must lie in [0, 1], got {p}")));
            }
        }
        let (lo, hi) = self.radius_mm;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!("radius range ({lo}, {hi}) is invalid")));
        }
        if !(self.shift_mm >= 0.0 && self.shift_mm.is_finite()) {
            return Err(Error::InvalidArgument("shift must be >= 0".into()));
        }
        if self.offset_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidArgument("offset must be finite".into()));
        }
        Ok(())
    }
}

/// Simulate one rater's segmentation of `mask`.
///
/// Draw order is fixed: empty decision, radius, shift, then one draw per
/// boundary voxel, so results depend only on the inputs and `seed`.
pub fn perturb_rater(mask: &BinaryMask, spec: &RaterSpec, seed: u64) -> Result<BinaryMask> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = *mask.geometry();
    let empty = rng.gen::<f64>() < spec.empty_prob;
    let r = uniform(&mut rng, spec.radius_mm);
    let shift: [i64; 3] = std::array::from_fn(|a| {
        let s = uniform(&mut rng, (-spec.shift_mm, spec.shift_mm)) + spec.offset_mm[a];
        (s / geom.spacing_mm[a]).round() as i64
    });
    if empty {
        return Ok(BinaryMask::empty(geom));
    }
    let mut out = if r > 0.0 {
        dilate_ball(mask, r)
    } else if r < 0.0 {
        erode_ball(mask, -r)
    } else {
        mask.clone()
    };
    if shift != [0, 0, 0] {
        out = shift_mask(&out, shift);
    }
    if spec.flip_prob > 0.0 {
        let boundary = boundary_voxels(&out);
        for v in boundary {
            if rng.gen::<f64>() < spec.flip_prob {
                let on = out.is_set(v);
                out.set(v, !on);
            }
        }
    }
    Ok(out)
}

fn shift_mask(mask: &BinaryMask, s: [i64; 3]) -> BinaryMask {
    let dims = mask.dims();
    BinaryMask::from_fn(*mask.geometry(), |v| {
        let src: [i64; 3] = std::array::from_fn(|a| v[a] as i64 - s[a]);
        (0..3).all(|a| src[a] >= 0 && src[a] < dims[a] as i64)
            && mask.is_set([src[0] as usize, src[1] as usize, src[2] as usize])
    })
}

/// Voxels with a 6-neighbour of the opposite value, in raster order.
fn boundary_voxels(mask: &BinaryMask) -> Vec<[usize; 3]> {
    let dims = mask.dims();
    let mut out = Vec::new();
    for d in 0..dims[0] {
        for h in 0..dims[1] {
            for w in 0..dims[2] {
                let v = [d, h, w];
                let on = mask.is_set(v);
                let differs = (0..3).any(|a| {
                    let mut lo = v;
                    let mut hi = v;
                    (v[a] > 0 && {
                        lo[a] -= 1;
                        mask.is_set(lo) != on
                    }) || (v[a] + 1 < dims[a] && {
                        hi[a] += 1;
                        mask.is_set(hi) != on
                    })
                });
                if differs {
                    out.push(v);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_cases: usize,
    pub lesion: LesionSpec,
    /// Rater id and perturbation, in output order.
    pub raters: Vec<(String, RaterSpec)>,
    pub roles: Roles,
    pub seed: u64,
}

impl CohortSpec {
    /// Three experts and a model. The model stays closer to the underlying
    /// lesion than any expert does.
    pub fn standard(n_cases: usize, seed: u64) -> Self {
        let expert = RaterSpec {
            radius_mm: (-2.0, 2.0),
            flip_prob: 0.1,
            empty_prob: 0.0,
            shift_mm: 1.0,
            offset_mm: [0.0; 3],
        };
        let model = RaterSpec {
            radius_mm: (-0.5, 0.5),
            flip_prob: 0.05,
            ..RaterSpec::identity()
        };
        CohortSpec {
            n_cases,
            lesion: LesionSpec::default(),
            raters: vec![
                ("A".into(), expert.clone()),
                ("B".into(), expert.clone()),
                ("C".into(), expert),
                ("Model".into(), model),
            ],
            roles: Roles::default(),
            seed,
        }
    }
}

/// In-memory cohort: per case, the underlying lesion and each rater's mask.
#[derive(Debug, Clone)]
pub struct SyntheticCase {
    pub case_id: String,
    pub truth: BinaryMask,
    pub masks: BTreeMap<String, BinaryMask>,
}

pub fn case_id(index: usize) -> String {
    format!("case_{index:03}")
}

/// Generate all cases in memory. Case `i` uses seed
/// `derive_seed(spec.seed, i)`; rater `j` of that case uses
/// `derive_seed(case_seed, j + 1)`.
pub fn simulate_cohort(spec: &CohortSpec) -> Result<Vec<SyntheticCase>> {
    if spec.n_cases == 0 {
        return Err(Error::InvalidArgument("n_cases must be >= 1".into()));
    }
    spec.lesion.validate()?;
    for (_, r) in &spec.raters {
        r.validate()?;
    }
    (0..spec.n_cases)
        .into_par_iter()
        .map(|i| {
            let case_seed = derive_seed(spec.seed, i as u64);
            let truth = generate_lesion(&LesionSpec {
                seed: case_seed,
                ..spec.lesion.clone()
            })?;
            let masks = spec
                .raters
                .iter()
                .enumerate()
                .map(|(j, (id, r))| Ok((id.clone(), perturb_rater(&truth, r, derive_seed(case_seed, j as u64 + 1))?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(SyntheticCase {
                case_id: case_id(i),
                truth,
                masks,
            })
        })
        .collect()
}

/// Write a cohort tree under `out_dir`: `<case_id>/<rater>.nii.gz` plus
/// `manifest.json` with paths relative to `out_dir`.
pub fn generate_cohort(spec: &CohortSpec, out_dir: &Path) -> Result<Manifest> {
    let cases = simulate_cohort(spec)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let entries = cases
        .par_iter()
        .map(|c| {
            let dir = out_dir.join(&c.case_id);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut mask_paths = BTreeMap::new();
            for (rater, mask) in &c.masks {
                let rel = PathBuf::from(&c.case_id).join(format!("{rater}.nii.gz"));
                save_mask(&out_dir.join(&rel), mask)?;
                mask_paths.insert(rater.clone(), rel);
            }
            Ok(CaseEntry {
                case_id: c.case_id.clone(),
                image_path: None,
                mask_paths,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        raters: spec.raters.iter().map(|(id, _)| id.clone()).collect(),
        roles: spec.roles.clone(),
        cases: entries,
        base_dir: out_dir.to_path_buf(),
    };
    manifest.validate()?;
    manifest.save_json(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Lattice used by the registration phantom: 80 x 96 x 96 mm.
pub fn phantom_geometry() -> Geometry {
    Geometry::new([32, 64, 64], [2.5, 1.5, 1.5]).expect("constant geometry")
}

/// Smooth, asymmetric head-like intensity pattern. `p` is relative to the
/// phantom center, in mm.
pub fn phantom_value(p: [f64; 3]) -> f64 {
    let smooth_step = |x: f64, width: f64| 1.0 / (1.0 + (-x / width).exp());
    let gauss = |c: [f64; 3], s: [f64; 3]| {
        (-(0..3).map(|a| ((p[a] - c[a]) / s[a]).powi(2)).sum::<f64>() / 2.0).exp()
    };
    let shell = {
        let r = ((p[0] / 22.0).powi(2) + (p[1] / 36.0).powi(2) + (p[2] / 30.0).powi(2)).sqrt();
        smooth_step(1.0 - r, 0.08)
    };
    shell
        + 0.9 * gauss([6.0, -12.0, 10.0], [5.0, 7.0, 6.0])
        - 0.7 * gauss([-8.0, 10.0, -6.0], [6.0, 5.0, 8.0])
        + 0.6 * gauss([0.0, 18.0, 14.0], [4.0, 4.0, 4.0])
        - 0.5 * gauss([10.0, 4.0, -16.0], [4.0, 9.0, 4.0])
        + 0.8 * gauss([-4.0, -20.0, -8.0], [5.0, 4.0, 6.0])
}

/// Sample the phantom on `geom` after moving it by `t` (rotation about the
/// lattice center): voxel `q` takes `phantom_value(t⁻¹(q) - center)`.
pub fn structured_phantom(geom: &Geometry, t: &RigidTransform) -> VoxelGrid {
    let c = geom.center_mm();
    let inv = t.to_affine(c).inverse();
    VoxelGrid::from_fn(*geom, |i| {
        let q = geom.to_physical([i[0] as f64, i[1] as f64, i[2] as f64]);
        let p = inv.apply(q);
        phantom_value([p[0] - c[0], p[1] - c[1], p[2] - c[2]])
    })
}
