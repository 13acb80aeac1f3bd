mod support;

use coreval::metrics::Metric;
use coreval::stats::{
    bootstrap_median_ci, holm_adjust, noninferiority_test, spearman_rho, wilcoxon_one_sided, MetricMeta,
    NonInferiorityMargin,
};
use proptest::collection::vec;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wilcoxon_ignores_positive_rescaling(
        d in vec(-5i32..6, 1..60).prop_map(|v| v.into_iter().map(|x| x as f64 * 0.25).collect::<Vec<_>>()),
        k in 0.01f64..100.0,
    ) {
        prop_assume!(d.iter().any(|&x| x != 0.0));
        let a = wilcoxon_one_sided(&d).unwrap();
        let scaled: Vec<f64> = d.iter().map(|x| x * k).collect();
        let b = wilcoxon_one_sided(&scaled).unwrap();
        prop_assert_eq!(a.p, b.p);
        prop_assert_eq!(a.n_used, b.n_used);
    }

    #[test]
    fn wilcoxon_matches_enumeration_on_small_samples(
        d in vec(-4i32..5, 1..13).prop_map(|v| v.into_iter().map(f64::from).collect::<Vec<_>>()),
    ) {
        prop_assume!(d.iter().any(|&x| x != 0.0));
        prop_assert_eq!(wilcoxon_one_sided(&d).unwrap().p, support::signed_rank_p_by_enumeration(&d));
    }

    #[test]
    fn holm_is_monotone_and_dominates_raw(p in vec(0.0f64..=1.0, 1..40)) {
        let adj = holm_adjust(&p).unwrap();
        prop_assert_eq!(&adj, &support::holm(&p));
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap());
        for w in order.windows(2) {
            prop_assert!(adj[w[0]] <= adj[w[1]]);
        }
        for (a, r) in adj.iter().zip(&p) {
            prop_assert!(a >= r && *a <= 1.0);
        }
    }

    #[test]
    fn holm_single_value_is_identity(p in 0.0f64..=1.0) {
        prop_assert_eq!(holm_adjust(&[p]).unwrap(), vec![p]);
    }

    #[test]
    fn noninferiority_decision_ignores_common_offset(
        pairs in vec((0i32..=32, 0i32..=32), 4..40),
        offset in -10i32..=10,
        metric in prop_oneof![Just(Metric::Dice), Just(Metric::Avd), Just(Metric::Hd95)],
    ) {
        // dyadic values keep shifted differences exact in binary
        let model: Vec<Option<f64>> = pairs.iter().map(|p| Some(f64::from(p.0) / 32.0)).collect();
        let inter: Vec<Option<f64>> = pairs.iter().map(|p| Some(f64::from(p.1) / 32.0)).collect();
        let c = f64::from(offset) / 8.0;
        let shift = |v: &[Option<f64>]| v.iter().map(|x| x.map(|x| x + c)).collect::<Vec<_>>();
        let margins = NonInferiorityMargin::default();
        let meta = MetricMeta::of(metric);
        let a = noninferiority_test(&model, &inter, meta, &margins, 0.05);
        let b = noninferiority_test(&shift(&model), &shift(&inter), meta, &margins, 0.05);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.significant, b.significant);
                prop_assert_eq!(a.p_raw, b.p_raw);
                prop_assert_eq!(a.n_pairs, b.n_pairs);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn bootstrap_is_deterministic(v in vec(-50.0f64..50.0, 1..40), seed in any::<u64>()) {
        let a = bootstrap_median_ci(&v, 300, seed).unwrap();
        let b = bootstrap_median_ci(&v, 300, seed).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.ci_lo <= a.median && a.median <= a.ci_hi);
    }

    #[test]
    fn spearman_ignores_monotone_transforms(xy in vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let Ok(rho) = spearman_rho(&x, &y) else { return Ok(()); };
        let fx: Vec<f64> = x.iter().map(|v| (v / 30.0).exp()).collect();
        let gy: Vec<f64> = y.iter().map(|v| v * v * v + 2.0 * v).collect();
        let rho2 = spearman_rho(&fx, &gy).unwrap();
        prop_assert!((rho - rho2).abs() < 1e-12, "{} vs {}", rho, rho2);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!((spearman_rho(&x, &neg).unwrap() + rho).abs() < 1e-12);
    }
}

#[test]
fn perfectly_monotone_volumes_give_unit_rho() {
    let x: Vec<f64> = (1..=10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    assert_eq!(spearman_rho(&x, &y).unwrap(), 1.0);
    let z: Vec<f64> = x.iter().map(|v| -v).collect();
    assert_eq!(spearman_rho(&x, &z).unwrap(), -1.0);
    assert!(spearman_rho(&x, &[2.0; 10]).is_err());
}
