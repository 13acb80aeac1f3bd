//! Exact Euclidean distance transform on anisotropic lattices, and the
//! ball morphology built on it.
//!
//! The transform is the separable lower-envelope algorithm of Felzenszwalb
//! and Huttenlocher applied along width, height and depth in turn. Each pass
//! is exact, so the result is the exact squared physical distance from every
//! voxel center to the nearest feature voxel center.

use crate::volgrid::BinaryMask;

/// Squared distance (mm²) from every voxel to the nearest feature voxel.
///
/// `features` is indexed like grid data (width fastest). Voxels with no
/// feature anywhere in the lattice get `f64::INFINITY`.
pub fn squared_edt(features: &[bool], dims: [usize; 3], spacing_mm: [f64; 3]) -> Vec<f64> {
    let n: usize = dims.iter().product();
    assert_eq!(features.len(), n, "feature map does not match dims");
    let mut field: Vec<f64> = features
        .iter()
        .map(|&f| if f { 0.0 } else { f64::INFINITY })
        .collect();
    if n == 0 {
        return field;
    }
    let [nd, nh, nw] = dims;
    let longest = *dims.iter().max().unwrap_or(&1);
    let mut scratch = Scratch::new(longest);

    // width: contiguous rows
    let s2 = spacing_mm[2] * spacing_mm[2];
    for row in field.chunks_exact_mut(nw) {
        scratch.line.clear();
        scratch.line.extend_from_slice(row);
        scratch.transform(s2, row.len());
        row.copy_from_slice(&scratch.out[..row.len()]);
    }
    // height: stride nw
    let s2 = spacing_mm[1] * spacing_mm[1];
    for d in 0..nd {
        for w in 0..nw {
            let base = d * nh * nw + w;
            scratch.line.clear();
            scratch.line.extend((0..nh).map(|h| field[base + h * nw]));
            scratch.transform(s2, nh);
            for h in 0..nh {
                field[base + h * nw] = scratch.out[h];
            }
        }
    }
    // depth: stride nh * nw
    let s2 = spacing_mm[0] * spacing_mm[0];
    let plane = nh * nw;
    for base in 0..plane {
        scratch.line.clear();
        scratch.line.extend((0..nd).map(|d| field[base + d * plane]));
        scratch.transform(s2, nd);
        for d in 0..nd {
            field[base + d * plane] = scratch.out[d];
        }
    }
    field
}

struct Scratch {
    line: Vec<f64>,
    out: Vec<f64>,
    hull: Vec<usize>,
    bounds: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            line: Vec::with_capacity(n),
            out: vec![0.0; n],
            hull: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    /// out[p] = min_q line[q] + s2 * (p - q)^2
    fn transform(&mut self, s2: f64, n: usize) {
        let f = &self.line;
        let (v, z) = (&mut self.hull, &mut self.bounds);
        let mut k: usize = 0;
        let mut started = false;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            if !started {
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                started = true;
                continue;
            }
            let fq = f[q] + s2 * (q * q) as f64;
            loop {
                let r = v[k];
                let fr = f[r] + s2 * (r * r) as f64;
                let s = (fq - fr) / (2.0 * s2 * (q - r) as f64);
                // z[0] is -inf, so k never underflows
                if s <= z[k] {
                    k -= 1;
                    continue;
                }
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
        if !started {
            self.out[..n].fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for p in 0..n {
            while z[k + 1] < p as f64 {
                k += 1;
            }
            let dq = p as f64 - v[k] as f64;
            self.out[p] = s2 * dq * dq + f[v[k]];
        }
    }
}

/// Voxels within `radius_mm` of the mask (closed physical ball dilation).
pub fn dilate_ball(mask: &BinaryMask, radius_mm: f64) -> BinaryMask {
    if radius_mm <= 0.0 || mask.is_empty() {
        return mask.clone();
    }
    let g = *mask.geometry();
    let features: Vec<bool> = mask.as_bytes().iter().map(|&b| b != 0).collect();
    let field = squared_edt(&features, g.dims, g.spacing_mm);
    let r2 = radius_mm * radius_mm;
    BinaryMask::from_bytes(g, field.iter().map(|&d| u8::from(d <= r2)).collect())
        .expect("field has grid length")
}

/// Mask voxels farther than `radius_mm` from any background voxel inside the
/// lattice (erosion by a closed physical ball).
pub fn erode_ball(mask: &BinaryMask, radius_mm: f64) -> BinaryMask {
    if radius_mm <= 0.0 || mask.is_empty() {
        return mask.clone();
    }
    let g = *mask.geometry();
    let background: Vec<bool> = mask.as_bytes().iter().map(|&b| b == 0).collect();
    let field = squared_edt(&background, g.dims, g.spacing_mm);
    let r2 = radius_mm * radius_mm;
    BinaryMask::from_bytes(g, field.iter().map(|&d| u8::from(d > r2)).collect())
        .expect("field has grid length")
}
