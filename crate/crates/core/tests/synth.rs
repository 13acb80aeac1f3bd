use coreval::distance::dilate_ball;
use coreval::metrics::confusion_counts;
use coreval::synth::{generate_cohort, generate_lesion, simulate_cohort, CohortSpec, LesionSpec};
use coreval::volgrid::BinaryMask;
use proptest::prelude::*;

fn dice(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let c = confusion_counts(a, b).unwrap();
    2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn cohort_is_a_pure_function_of_spec() {
    let spec = CohortSpec::standard(4, 99);
    let a = simulate_cohort(&spec).unwrap();
    let b = simulate_cohort(&spec).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.case_id, y.case_id);
        assert_eq!(x.truth, y.truth);
        assert_eq!(x.masks, y.masks);
    }
    let other = simulate_cohort(&CohortSpec::standard(4, 100)).unwrap();
    assert_ne!(a[0].truth, other[0].truth);

    let dir = tempfile::tempdir().unwrap();
    for sub in ["x", "y"] {
        generate_cohort(&spec, &dir.path().join(sub)).unwrap();
    }
    for rel in ["manifest.json", "case_002/Model.nii.gz", "case_000/A.nii.gz"] {
        let read = |sub: &str| std::fs::read(dir.path().join(sub).join(rel)).unwrap();
        assert_eq!(read("x"), read("y"), "{rel}");
    }
}

#[test]
fn tighter_model_beats_experts_in_most_cohorts() {
    let reps = 20;
    let mut wins = 0;
    for rep in 0..reps {
        let cases = simulate_cohort(&CohortSpec::standard(32, 1000 + rep)).unwrap();
        let pair = |a: &str, b: &str| median(cases.iter().map(|c| dice(&c.masks[a], &c.masks[b])).collect());
        let model = pair("Model", "B");
        let inter = pair("A", "B");
        if model >= inter {
            wins += 1;
        }
    }
    assert!(wins * 100 >= 95 * reps, "model ahead in {wins}/{reps} cohorts");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dilation_is_nested(seed in any::<u64>(), r1 in 0.0f64..4.0, dr in 0.0f64..4.0) {
        let spec = LesionSpec {
            dims: [8, 20, 20],
            spacing_mm: [3.0, 0.9, 0.9],
            n_ellipsoids: 2,
            radius_mm: (2.0, 5.0),
            center_jitter_mm: 2.0,
            seed,
        };
        let m = generate_lesion(&spec).unwrap();
        let small = dilate_ball(&m, r1);
        let large = dilate_ball(&m, r1 + dr);
        prop_assert!(small.voxels().all(|v| large.is_set(v)));
        prop_assert!(m.voxels().all(|v| small.is_set(v)));
    }
}
