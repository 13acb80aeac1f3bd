//! Property tests for grids and metrics.

mod support;

use coreval::metrics::{evaluate_pair, surface_dice_at_tolerance, MetricRecord};
use coreval::volgrid::{
    load_volume, normalize_ct, resample, save_volume, volume_ml, BinaryMask, Geometry, Interpolation, VolumeKind,
    VoxelGrid,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn geometry(rng: &mut impl Rng, max: usize) -> Geometry {
    let dims: [usize; 3] = std::array::from_fn(|_| rng.gen_range(1..=max));
    let spacing: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.3..3.5));
    Geometry::new(dims, spacing).unwrap()
}

fn mask_pair(seed: u64, max: usize) -> (BinaryMask, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = geometry(&mut rng, max);
    (support::random_mask(&mut rng, g), support::random_mask(&mut rng, g))
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0),
        (None, None) => true,
        _ => false,
    }
}

fn all_close(a: &MetricRecord, b: &MetricRecord, tol: f64) -> bool {
    close(a.vs, b.vs, tol)
        && close(a.avd_ml, b.avd_ml, tol)
        && close(a.dice, b.dice, tol)
        && close(a.precision, b.precision, tol)
        && close(a.recall, b.recall, tol)
        && close(a.hd95_mm, b.hd95_mm, tol)
        && close(a.sdt, b.sdt, tol)
}

/// Copy `m` into a larger lattice at `offset`.
fn embed(m: &BinaryMask, dims: [usize; 3], offset: [usize; 3]) -> BinaryMask {
    let g = Geometry::new(dims, m.spacing_mm()).unwrap();
    let inner = m.dims();
    BinaryMask::from_fn(g, |v| {
        (0..3).all(|a| v[a] >= offset[a] && v[a] - offset[a] < inner[a])
            && m.is_set([v[0] - offset[0], v[1] - offset[1], v[2] - offset[2]])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn metrics_are_symmetric(seed in any::<u64>(), tol in 0.0f64..8.0) {
        let (p, r) = mask_pair(seed, 10);
        let a = evaluate_pair(&p, &r, tol).unwrap();
        let b = evaluate_pair(&r, &p, tol).unwrap();
        prop_assert_eq!(a.dice, b.dice);
        prop_assert!(close(a.vs, b.vs, 1e-12));
        prop_assert_eq!(a.avd_ml, b.avd_ml);
        prop_assert_eq!(a.hd95_mm, b.hd95_mm);
        prop_assert_eq!(a.sdt, b.sdt);
        prop_assert_eq!(a.precision, b.recall);
        prop_assert_eq!(a.recall, b.precision);
    }

    #[test]
    fn metrics_are_bounded(seed in any::<u64>(), tol in 0.0f64..8.0) {
        let (p, r) = mask_pair(seed, 10);
        let m = evaluate_pair(&p, &r, tol).unwrap();
        for v in [m.vs, m.dice, m.precision, m.recall, m.sdt].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v), "{}", v);
        }
        for v in [m.avd_ml, m.hd95_mm].into_iter().flatten() {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn surface_dice_grows_with_tolerance(seed in any::<u64>(), t1 in 0.0f64..6.0, dt in 0.0f64..6.0) {
        let (p, r) = mask_pair(seed, 10);
        let lo = surface_dice_at_tolerance(&p, &r, t1).unwrap();
        let hi = surface_dice_at_tolerance(&p, &r, t1 + dt).unwrap();
        match (lo, hi) {
            (Some(a), Some(b)) => prop_assert!(a <= b),
            (None, None) => {}
            other => prop_assert!(false, "definedness changed: {:?}", other),
        }
        if !p.is_empty() && !r.is_empty() {
            prop_assert_eq!(surface_dice_at_tolerance(&p, &r, 1e9).unwrap(), Some(1.0));
        }
    }

    #[test]
    fn translation_leaves_metrics_unchanged(
        seed in any::<u64>(),
        shift in (0usize..4, 0usize..4, 0usize..4),
        tol in 0.0f64..6.0,
    ) {
        let (p, r) = mask_pair(seed, 7);
        let inner = p.dims();
        // one empty layer all round keeps the lattice edge away from both placements
        let dims: [usize; 3] = std::array::from_fn(|a| inner[a] + 5);
        let shift = [shift.0, shift.1, shift.2];
        let at = |m: &BinaryMask, o: [usize; 3]| embed(m, dims, o);
        let base = evaluate_pair(&at(&p, [1, 1, 1]), &at(&r, [1, 1, 1]), tol).unwrap();
        let o = [1 + shift[0], 1 + shift[1], 1 + shift[2]];
        let moved = evaluate_pair(&at(&p, o), &at(&r, o), tol).unwrap();
        prop_assert!(all_close(&base, &moved, 1e-12), "{:?}\n{:?}", base, moved);
    }

    #[test]
    fn spacing_scales_distances(seed in any::<u64>(), k in 0.25f64..4.0) {
        let (p, r) = mask_pair(seed, 10);
        let g = *p.geometry();
        let scaled = Geometry::new(g.dims, g.spacing_mm.map(|s| s * k)).unwrap();
        let rescale = |m: &BinaryMask| BinaryMask::from_bytes(scaled, m.as_bytes().to_vec()).unwrap();
        let a = evaluate_pair(&p, &r, 5.0).unwrap();
        let b = evaluate_pair(&rescale(&p), &rescale(&r), 5.0).unwrap();
        prop_assert_eq!(a.dice, b.dice);
        prop_assert_eq!(a.precision, b.precision);
        prop_assert_eq!(a.recall, b.recall);
        prop_assert!(close(a.hd95_mm.map(|h| h * k), b.hd95_mm, 1e-9), "{:?} {:?}", a.hd95_mm, b.hd95_mm);
    }

    #[test]
    fn nifti_and_raw_round_trip(seed in any::<u64>(), gz in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = geometry(&mut rng, 9);
        let grid = VoxelGrid::from_fn(g, |_| rng.gen_range(-1000.0f32..1000.0) as f64);
        let dir = tempfile::tempdir().unwrap();
        let name = if gz { "v.nii.gz" } else { "v.nii" };
        for path in [dir.path().join(name), dir.path().join("v.json")] {
            save_volume(&path, &grid).unwrap();
            let back = load_volume(&path, VolumeKind::Image).unwrap();
            prop_assert_eq!(back.dims(), grid.dims());
            prop_assert_eq!(back.data(), grid.data());
            for (a, b) in back.spacing_mm().iter().zip(g.spacing_mm) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn volume_is_additive_over_disjoint_masks(seed in any::<u64>()) {
        let (a, b) = mask_pair(seed, 12);
        let b_only = b.intersection(&a.complement()).unwrap();
        let union = a.union(&b_only).unwrap();
        let sum = volume_ml(&a) + volume_ml(&b_only);
        prop_assert!((volume_ml(&union) - sum).abs() <= 1e-12 * sum.max(1.0));
    }

    #[test]
    fn resampling_to_the_same_spacing_is_the_identity(seed in any::<u64>(), nearest in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = geometry(&mut rng, 9);
        let grid = VoxelGrid::from_fn(g, |_| rng.gen_range(-5.0..5.0));
        let interp = if nearest { Interpolation::Nearest } else { Interpolation::Trilinear };
        let out = resample(&grid, g.spacing_mm, interp).unwrap();
        prop_assert_eq!(out.dims(), grid.dims());
        prop_assert_eq!(out.data(), grid.data());
    }

    #[test]
    fn ct_normalization_ignores_affine_rescaling(seed in any::<u64>(), scale in 0.1f64..20.0, shift in 1.0f64..500.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Geometry::new([6, 10, 10], [3.0, 1.0, 1.0]).unwrap();
        let grid = VoxelGrid::from_fn(g, |_| rng.gen_range(1.0..100.0));
        let a = normalize_ct(&grid, 0.5, 99.5).unwrap();
        let b = normalize_ct(&grid.map(|v| scale * v + shift), 0.5, 99.5).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
    }
}
