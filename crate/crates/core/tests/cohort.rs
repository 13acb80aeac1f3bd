use std::path::Path;

use coreval::cohort::{
    default_pairs, export_volume_scatter, noninferiority_report, numbered_ids, run_agreement_study, split_cohort,
    write_scatter, AgreementRow, AgreementTable, Manifest, RaterPair, ReportOptions,
};
use coreval::metrics::Metric;
use coreval::synth::{generate_cohort, CohortSpec, RaterSpec};
use proptest::prelude::*;

const BOUNDED: [Metric; 5] = [Metric::Vs, Metric::Dice, Metric::Precision, Metric::Recall, Metric::Sdt];

fn spec_with(n: usize, seed: u64, edit: impl Fn(&mut Vec<(String, RaterSpec)>)) -> CohortSpec {
    let mut spec = CohortSpec::standard(n, seed);
    edit(&mut spec.raters);
    spec
}

fn set_rater(raters: &mut [(String, RaterSpec)], id: &str, r: RaterSpec) {
    raters.iter_mut().find(|(name, _)| name == id).unwrap().1 = r;
}

fn quick_report(table: &AgreementTable, seed: u64) -> String {
    let mut opts = ReportOptions::new(seed);
    opts.n_resamples = 400;
    noninferiority_report(table, &opts).unwrap().to_markdown()
}

#[test]
fn identical_raters_agree_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_with(6, 4, |r| {
        set_rater(r, "B", RaterSpec::identity());
        set_rater(r, "Model", RaterSpec::identity());
    });
    let manifest = generate_cohort(&spec, dir.path()).unwrap();
    let table = run_agreement_study(&manifest, 5.0, None).unwrap();
    assert_eq!(table.rows.len(), 6 * default_pairs(&manifest.roles).len());
    let pair = RaterPair::new("B", "Model");
    for m in BOUNDED {
        assert!(table.column(&pair, m).unwrap().iter().all(|v| *v == Some(1.0)), "{m:?}");
    }
    assert!(table.column(&pair, Metric::Hd95).unwrap().iter().all(|v| *v == Some(0.0)));
    assert!(table.column(&pair, Metric::Avd).unwrap().iter().all(|v| *v == Some(0.0)));
}

#[test]
fn study_is_independent_of_case_order() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_cohort(&CohortSpec::standard(7, 21), dir.path()).unwrap();
    let table = run_agreement_study(&manifest, 5.0, None).unwrap();

    let mut shuffled = manifest.clone();
    shuffled.cases.reverse();
    shuffled.cases.swap(0, 3);
    let other = run_agreement_study(&shuffled, 5.0, None).unwrap();

    let key = |r: &AgreementRow| (r.case_id.clone(), r.pred.clone(), r.reference.clone());
    let sorted = |t: &AgreementTable| {
        let mut rows = t.rows.clone();
        rows.sort_by_key(key);
        rows
    };
    assert_ne!(table.rows, other.rows);
    assert_eq!(sorted(&table), sorted(&other));
}

#[test]
fn table_csv_round_trips_and_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_cohort(&CohortSpec::standard(10, 8), &dir.path().join("c")).unwrap();
    let table = run_agreement_study(&manifest, 5.0, None).unwrap();
    let csv = dir.path().join("t.csv");
    table.write_csv(&csv).unwrap();
    let back = AgreementTable::read_csv(&csv).unwrap();
    assert_eq!(back, table);

    let first = quick_report(&table, 5);
    assert_eq!(first, quick_report(&back, 5));

    let mut opts = ReportOptions::new(5);
    opts.n_resamples = 400;
    let report = noninferiority_report(&table, &opts).unwrap();
    for sub in ["a", "b"] {
        report.write_all(&dir.path().join(sub)).unwrap();
    }
    for f in ["report.md", "report.csv", "report.json"] {
        let read = |sub: &str| std::fs::read(dir.path().join(sub).join(f)).unwrap();
        assert_eq!(read("a"), read("b"), "{f}");
    }
}

#[test]
fn every_case_is_accounted_for() {
    let dir = tempfile::tempdir().unwrap();
    let n = 12;
    let spec = spec_with(n, 17, |r| {
        for id in ["A", "B", "C"] {
            let mut s = r.iter().find(|(name, _)| name == id).unwrap().1.clone();
            s.empty_prob = 0.2;
            set_rater(r, id, s);
        }
    });
    let manifest = generate_cohort(&spec, dir.path()).unwrap();
    // a missing file excludes one case without aborting the study
    std::fs::remove_file(dir.path().join("case_004").join("C.nii.gz")).unwrap();
    let table = run_agreement_study(&manifest, 5.0, None).unwrap();
    let excluded = table.exclusions();
    assert_eq!(excluded.len(), 1);
    assert_eq!(excluded[0].case_id, "case_004");
    assert!(table.rows.iter().any(|r| r.note.contains("one_empty")), "expected some empty masks");

    let mut opts = ReportOptions::new(2);
    opts.n_resamples = 200;
    let report = noninferiority_report(&table, &opts).unwrap();
    assert_eq!(report.n_cases, n);
    assert_eq!(report.exclusions, excluded);
    for block in &report.experts {
        for row in &block.rows {
            assert_eq!(row.test.n_pairs + row.test.n_dropped, n, "{} {:?}", block.test_expert, row.metric);
        }
    }
    assert!(report.to_markdown().contains("case_004"));
}

#[test]
fn csv_manifest_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let json = generate_cohort(&CohortSpec::standard(3, 1), dir.path()).unwrap();
    let mut text = String::from("case_id,rater_id,mask_path\n");
    for c in &json.cases {
        for (rater, path) in &c.mask_paths {
            text += &format!("{},{},{}\n", c.case_id, rater, path.display());
        }
    }
    let path = dir.path().join("manifest.csv");
    std::fs::write(&path, text).unwrap();
    let csv = Manifest::load(&path).unwrap();
    assert_eq!(csv.cases.len(), 3);
    let a = run_agreement_study(&json, 5.0, None).unwrap();
    let b = run_agreement_study(&csv, 5.0, None).unwrap();
    assert_eq!(a, b);
}

fn row(case: usize, pred_ml: f64, ref_ml: f64) -> AgreementRow {
    AgreementRow {
        case_id: format!("c{case}"),
        pred: "B".into(),
        reference: "A".into(),
        tol_mm: 5.0,
        vs: None,
        avd_ml: Some((pred_ml - ref_ml).abs()),
        dice: None,
        precision: None,
        recall: None,
        hd95_mm: None,
        sdt: None,
        pred_ml: Some(pred_ml),
        ref_ml: Some(ref_ml),
        note: String::new(),
    }
}

#[test]
fn scatter_reports_rank_correlation() {
    let pair = [RaterPair::new("B", "A")];
    let up = AgreementTable {
        rows: (0..8).map(|i| row(i, i as f64, (i as f64).powi(3))).collect(),
    };
    let s = export_volume_scatter(&up, &pair).unwrap();
    assert_eq!(s[0].rho, Some(1.0));
    assert_eq!(s[0].points.len(), 8);

    let down = AgreementTable {
        rows: (0..8).map(|i| row(i, i as f64, -(i as f64))).collect(),
    };
    assert_eq!(export_volume_scatter(&down, &pair).unwrap()[0].rho, Some(-1.0));

    let flat = AgreementTable {
        rows: (0..8).map(|i| row(i, 4.0, i as f64)).collect(),
    };
    let s = export_volume_scatter(&flat, &pair).unwrap();
    assert_eq!(s[0].rho, None);
    assert!(s[0].note.as_deref().unwrap().contains("constant"));

    let dir = tempfile::tempdir().unwrap();
    let files = write_scatter(&s, dir.path()).unwrap();
    assert!(files.iter().all(|f| Path::new(f).exists()));

    let short = AgreementTable {
        rows: (0..2).map(|i| row(i, i as f64, i as f64)).collect(),
    };
    assert!(export_volume_scatter(&short, &pair).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_ids(n in 2usize..300, test_frac in 0.0f64..0.9, k in 1usize..10, seed in any::<u64>()) {
        let n_test = ((n as f64) * test_frac) as usize;
        let n_train = n - n_test;
        prop_assume!(n_test < n && k <= n_train);
        let ids: Vec<String> = numbered_ids(n).into_iter().map(|i| format!("p{i}")).collect();
        let plan = split_cohort(&ids, n_test, k, seed).unwrap();
        prop_assert_eq!(plan.test.len(), n_test);
        prop_assert_eq!(plan.folds.len(), k);
        let mut all: Vec<String> = plan.test.iter().chain(&plan.train).cloned().collect();
        all.sort();
        let mut want = ids.clone();
        want.sort();
        prop_assert_eq!(all, want);
        let mut folded: Vec<String> = plan.folds.concat();
        folded.sort();
        let mut train = plan.train.clone();
        train.sort();
        prop_assert_eq!(folded, train);
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(split_cohort(&ids, n_test, k, seed).unwrap(), plan);
    }
}
