//! Brute-force reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::HashSet;

use coreval::volgrid::{BinaryMask, Geometry};
use rand::Rng;

pub type Voxel = [usize; 3];

pub fn foreground(m: &BinaryMask) -> HashSet<Voxel> {
    let [nd, nh, nw] = m.dims();
    let mut s = HashSet::new();
    for d in 0..nd {
        for h in 0..nh {
            for w in 0..nw {
                if m.is_set([d, h, w]) {
                    s.insert([d, h, w]);
                }
            }
        }
    }
    s
}

/// Random mask: noise, boxes, or a mix; occasionally empty.
pub fn random_mask(rng: &mut impl Rng, g: Geometry) -> BinaryMask {
    let dims = g.dims;
    match rng.gen_range(0..10) {
        0 => BinaryMask::empty(g),
        1..=4 => {
            let p = rng.gen_range(0.02..0.6);
            BinaryMask::from_fn(g, |_| rng.gen_bool(p))
        }
        _ => {
            let n_boxes = rng.gen_range(1..4);
            let boxes: Vec<([usize; 3], [usize; 3])> = (0..n_boxes)
                .map(|_| {
                    let lo: [usize; 3] = std::array::from_fn(|a| rng.gen_range(0..dims[a]));
                    let hi: [usize; 3] = std::array::from_fn(|a| rng.gen_range(lo[a]..dims[a]) + 1);
                    (lo, hi)
                })
                .collect();
            let noise = rng.gen_range(0.0..0.1);
            BinaryMask::from_fn(g, |v| {
                let inside = boxes.iter().any(|(lo, hi)| (0..3).all(|a| v[a] >= lo[a] && v[a] < hi[a]));
                inside != rng.gen_bool(noise)
            })
        }
    }
}

pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

pub fn counts(pred: &BinaryMask, reference: &BinaryMask) -> Counts {
    let p = foreground(pred);
    let r = foreground(reference);
    let tp = p.intersection(&r).count() as u64;
    let fp = p.difference(&r).count() as u64;
    let fn_ = r.difference(&p).count() as u64;
    let total = pred.geometry().len() as u64;
    Counts {
        tp,
        fp,
        fn_,
        tn: total - tp - fp - fn_,
    }
}

/// Voxels of `m` with a 6-neighbour outside the mask or outside the lattice.
pub fn surface(m: &BinaryMask) -> Vec<Voxel> {
    let fg = foreground(m);
    let dims = m.dims();
    let mut out: Vec<Voxel> = fg
        .iter()
        .copied()
        .filter(|v| {
            (0..3).any(|a| {
                [-1i64, 1].iter().any(|&s| {
                    let n = v[a] as i64 + s;
                    if n < 0 || n >= dims[a] as i64 {
                        return true;
                    }
                    let mut u = *v;
                    u[a] = n as usize;
                    !fg.contains(&u)
                })
            })
        })
        .collect();
    out.sort();
    out
}

pub fn dist(a: Voxel, b: Voxel, s: [f64; 3]) -> f64 {
    (0..3)
        .map(|k| ((a[k] as f64 - b[k] as f64) * s[k]).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn directed(from: &[Voxel], to: &[Voxel], s: [f64; 3]) -> Vec<f64> {
    from.iter()
        .map(|&a| to.iter().map(|&b| dist(a, b, s)).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Linear-interpolation percentile (type 7).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = (v.len() - 1) as f64 * q / 100.0;
    let i = pos.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] * (1.0 - (pos - i as f64)) + v[j] * (pos - i as f64)
}

/// (hd95, surface dice) or `None` when either mask is empty.
pub fn surface_metrics(pred: &BinaryMask, reference: &BinaryMask, tol: f64) -> Option<(f64, f64)> {
    let s = pred.spacing_mm();
    let sp = surface(pred);
    let sr = surface(reference);
    if sp.is_empty() || sr.is_empty() {
        return None;
    }
    let a = directed(&sp, &sr, s);
    let b = directed(&sr, &sp, s);
    let hd = percentile(&a, 95.0).max(percentile(&b, 95.0));
    let within = a.iter().chain(&b).filter(|&&d| d <= tol).count();
    Some((hd, within as f64 / (a.len() + b.len()) as f64))
}

/// Holm step-down, written directly from the definition.
pub fn holm(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    for (k, &i) in order.iter().enumerate() {
        let best = order[..=k]
            .iter()
            .enumerate()
            .map(|(j, &o)| ((m - j) as f64 * p[o]).min(1.0))
            .fold(0.0, f64::max);
        out[i] = best;
    }
    out
}

/// Midranks of |d| over nonzero d, then P(W+ >= observed) by enumerating
/// all 2^n sign patterns.
pub fn signed_rank_p_by_enumeration(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|&x| x != 0.0).collect();
    let n = d.len();
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let less = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let equal = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}
