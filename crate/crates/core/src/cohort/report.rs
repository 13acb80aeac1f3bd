use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::study::{AgreementTable, Exclusion, RaterPair};
use crate::error::{Error, Result};
use crate::metrics::{Category, Metric};
use crate::stats::{
    adjust_family, bootstrap_median_ci, derive_seed, noninferiority_test, BootstrapSummary, MetricMeta,
    NonInferiorityMargin, NonInferiorityOutcome, DEFAULT_ALPHA, DEFAULT_RESAMPLES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub margins: NonInferiorityMargin,
    pub alpha: f64,
    pub n_resamples: usize,
    pub seed: u64,
    /// Rater whose masks were the training ground truth.
    pub training_rater: String,
    pub test_raters: Vec<String>,
    pub model: String,
}

impl ReportOptions {
    pub fn new(seed: u64) -> Self {
        let roles = super::Roles::default();
        ReportOptions {
            margins: NonInferiorityMargin::default(),
            alpha: DEFAULT_ALPHA,
            n_resamples: DEFAULT_RESAMPLES,
            seed,
            training_rater: roles.training_rater,
            test_raters: roles.test_raters,
            model: roles.model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: Metric,
    /// `None` when no case has a defined value.
    pub inter: Option<BootstrapSummary>,
    pub model: Option<BootstrapSummary>,
    pub test: NonInferiorityOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertBlock {
    pub test_expert: String,
    pub inter_pair: RaterPair,
    pub model_pair: RaterPair,
    pub rows: Vec<MetricRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub options: ReportOptions,
    pub tolerance_mm: f64,
    pub n_cases: usize,
    pub experts: Vec<ExpertBlock>,
    /// Training rater against the model, summaries only.
    pub training_pair: Option<RaterPair>,
    pub training_summaries: Vec<(Metric, Option<BootstrapSummary>)>,
    /// Number of tests that entered the Holm adjustment.
    pub family_size: usize,
    pub exclusions: Vec<Exclusion>,
}

fn summarize(values: &[Option<f64>], n_resamples: usize, seed: u64) -> Result<Option<BootstrapSummary>> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Ok(None);
    }
    bootstrap_median_ci(&defined, n_resamples, seed).map(Some)
}

/// Bootstrap summaries and Holm-adjusted non-inferiority tests for every
/// test expert and metric of `table`.
///
/// Bootstrap seeds are derived from `opts.seed` and the position of the
/// summary in the report, so regeneration is exact.
pub fn noninferiority_report(table: &AgreementTable, opts: &ReportOptions) -> Result<Report> {
    opts.margins.validate()?;
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    if opts.test_raters.is_empty() {
        return Err(Error::InvalidArgument("at least one test expert is required".into()));
    }
    let n_cases = table.case_ids().len();
    let mut stream = 0u64;
    let mut next_seed = || {
        stream += 1;
        derive_seed(opts.seed, stream)
    };

    let mut experts = Vec::new();
    for x in &opts.test_raters {
        let inter_pair = RaterPair::new(x, &opts.training_rater);
        let model_pair = RaterPair::new(x, &opts.model);
        let mut rows = Vec::new();
        for metric in Metric::ALL {
            let inter = table.column(&inter_pair, metric)?;
            let model = table.column(&model_pair, metric)?;
            let inter_s = summarize(&inter, opts.n_resamples, next_seed())?;
            let model_s = summarize(&model, opts.n_resamples, next_seed())?;
            let meta = MetricMeta::of(metric);
            let test = match noninferiority_test(&model, &inter, meta, &opts.margins, opts.alpha) {
                Ok(t) => t,
                Err(Error::InsufficientData(msg)) => {
                    let usable = model.iter().zip(&inter).filter(|(m, i)| m.is_some() && i.is_some()).count();
                    NonInferiorityOutcome {
                        metric,
                        n_pairs: 0,
                        n_dropped: model.len(),
                        p_raw: None,
                        p_adjusted: None,
                        significant: false,
                        margin_used: opts.margins.for_range(meta.range),
                        warning: Some(format!("{msg} ({usable} defined)")),
                    }
                }
                Err(e) => return Err(e),
            };
            rows.push(MetricRow {
                metric,
                inter: inter_s,
                model: model_s,
                test,
            });
        }
        experts.push(ExpertBlock {
            test_expert: x.clone(),
            inter_pair,
            model_pair,
            rows,
        });
    }

    let mut family: Vec<NonInferiorityOutcome> =
        experts.iter().flat_map(|b| b.rows.iter().map(|r| r.test.clone())).collect();
    let family_size = adjust_family(&mut family, opts.alpha)?;
    let mut it = family.into_iter();
    for b in &mut experts {
        for r in &mut b.rows {
            r.test = it.next().expect("one outcome per row");
        }
    }

    let tp = RaterPair::new(&opts.training_rater, &opts.model);
    let (training_pair, training_summaries) = if table.has_pair(&tp) {
        let mut s = Vec::new();
        for metric in Metric::ALL {
            s.push((metric, summarize(&table.column(&tp, metric)?, opts.n_resamples, next_seed())?));
        }
        (Some(tp), s)
    } else {
        (None, Vec::new())
    };

    Ok(Report {
        options: opts.clone(),
        tolerance_mm: table.tolerance_mm().unwrap_or(crate::metrics::DEFAULT_TOLERANCE_MM),
        n_cases,
        experts,
        training_pair,
        training_summaries,
        family_size,
        exclusions: table.exclusions(),
    })
}

/// Significance marker in the style `p<0.001`, or `non-sig`.
pub fn format_p(p: Option<f64>, alpha: f64) -> String {
    let Some(p) = p else {
        return "n/a".into();
    };
    if p >= alpha {
        return "non-sig".into();
    }
    for t in [0.0001, 0.001, 0.01, 0.05] {
        if t <= alpha && p < t {
            return format!("p<{t}");
        }
    }
    format!("p<{alpha}")
}

fn tol_label(tol: f64) -> String {
    format!("{}mm", tol)
}

pub fn metric_label(metric: Metric, tol_mm: f64) -> String {
    match metric {
        Metric::Vs => "VS".into(),
        Metric::Avd => "AVD [ml]".into(),
        Metric::Dice => "Dice".into(),
        Metric::Precision => "Precision".into(),
        Metric::Recall => "Recall".into(),
        Metric::Hd95 => "HD 95 [mm]".into(),
        Metric::Sdt => format!("SDT {}", tol_label(tol_mm)),
    }
}

fn category_label(c: Category) -> &'static str {
    match c {
        Category::Volume => "Volume",
        Category::Overlap => "Overlap",
        Category::Distance => "Distance",
    }
}

fn cell(s: &Option<BootstrapSummary>) -> String {
    s.as_ref().map_or_else(|| "n/a".into(), |s| s.render(2))
}

impl Report {
    /// Markdown table: one row per metric grouped by category, three
    /// columns per test expert and a final training-rater column.
    pub fn to_markdown(&self) -> String {
        let o = &self.options;
        let mut md = String::new();
        let _ = writeln!(md, "# Comparison of model to test experts\n");
        let _ = writeln!(
            md,
            "Cases: {}. Training expert: {}. Model: {}.\n",
            self.n_cases, o.training_rater, o.model
        );

        let mut header = vec!["Category".to_string(), "Metric".to_string()];
        for b in &self.experts {
            let x = &b.test_expert;
            header.push(format!("Test Expert {x}: Inter-Expert ({})", b.inter_pair.label()));
            header.push(format!("Test Expert {x}: Model-Expert ({})", b.model_pair.label()));
            header.push(format!("Test Expert {x}: p-value"));
        }
        if let Some(tp) = &self.training_pair {
            header.push(format!("Expert {}: Model-Expert ({})", tp.pred, tp.label()));
        }
        let _ = writeln!(md, "| {} |", header.join(" | "));
        let _ = writeln!(md, "|{}", "---|".repeat(header.len()));

        let mut last_cat = None;
        for (mi, metric) in Metric::ALL.iter().enumerate() {
            let cat = metric.category();
            let cat_cell = if last_cat != Some(cat) { category_label(cat) } else { "" };
            last_cat = Some(cat);
            let mut cells = vec![cat_cell.to_string(), metric_label(*metric, self.tolerance_mm)];
            for b in &self.experts {
                let r = &b.rows[mi];
                cells.push(cell(&r.inter));
                cells.push(cell(&r.model));
                cells.push(format_p(r.test.decision_p(), o.alpha));
            }
            if self.training_pair.is_some() {
                cells.push(cell(&self.training_summaries[mi].1));
            }
            let _ = writeln!(md, "| {} |", cells.join(" | "));
        }

        let _ = writeln!(md);
        let _ = writeln!(
            md,
            "VS: volumetric similarity; AVD: absolute volume difference; HD 95: 95th percentile Hausdorff distance; \
             SDT {}: surface Dice at {} mm tolerance.",
            tol_label(self.tolerance_mm),
            self.tolerance_mm
        );
        let _ = writeln!(
            md,
            "Values: median ± 95% CI (bootstrapped, {} resamples, seed {}); ± is the larger distance from the median to a CI bound.",
            o.n_resamples, o.seed
        );
        let _ = writeln!(
            md,
            "p-values of one-sided Wilcoxon signed rank test for non-inferiority of model-expert versus inter-expert \
             agreement (margins: {} for unit-range metrics, {} ml AVD, {} mm HD 95), Holm-Bonferroni adjusted over {} tests, \
             alpha = {}.",
            o.margins.bounded_unit, o.margins.avd_ml, o.margins.hd95_mm, self.family_size, o.alpha
        );

        let _ = writeln!(md, "\n## Test accounting\n");
        let _ = writeln!(md, "| Test expert | Metric | Pairs used | Pairs dropped | Raw p | Adjusted p | Note |");
        let _ = writeln!(md, "|---|---|---|---|---|---|---|");
        for b in &self.experts {
            for r in &b.rows {
                let t = &r.test;
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    b.test_expert,
                    metric_label(r.metric, self.tolerance_mm),
                    t.n_pairs,
                    t.n_dropped,
                    t.p_raw.map_or("n/a".into(), |p| format!("{p:.3e}")),
                    t.p_adjusted.map_or("n/a".into(), |p| format!("{p:.3e}")),
                    t.warning.as_deref().unwrap_or("")
                );
            }
        }

        let _ = writeln!(md, "\n## Exclusions\n");
        if self.exclusions.is_empty() {
            let _ = writeln!(md, "None.");
        } else {
            for e in &self.exclusions {
                let _ = writeln!(md, "- {}: {}", e.case_id, e.reason);
            }
        }
        md
    }

    pub fn csv_rows(&self) -> Vec<ReportCsvRow> {
        let mut out = Vec::new();
        for b in &self.experts {
            for r in &b.rows {
                let t = &r.test;
                out.push(ReportCsvRow {
                    test_expert: b.test_expert.clone(),
                    metric: r.metric.key().into(),
                    inter_median: r.inter.map(|s| s.median),
                    inter_ci_lo: r.inter.map(|s| s.ci_lo),
                    inter_ci_hi: r.inter.map(|s| s.ci_hi),
                    model_median: r.model.map(|s| s.median),
                    model_ci_lo: r.model.map(|s| s.ci_lo),
                    model_ci_hi: r.model.map(|s| s.ci_hi),
                    margin: t.margin_used,
                    n_pairs: t.n_pairs,
                    n_dropped: t.n_dropped,
                    p_raw: t.p_raw,
                    p_adjusted: t.p_adjusted,
                    significant: t.significant,
                    note: t.warning.clone().unwrap_or_default(),
                });
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for r in self.csv_rows() {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Writes `report.md`, `report.csv` and `report.json` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let md = dir.join("report.md");
        std::fs::write(&md, self.to_markdown()).map_err(|e| Error::io(&md, e))?;
        self.write_csv(&dir.join("report.csv"))?;
        let js = dir.join("report.json");
        std::fs::write(&js, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&js, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCsvRow {
    pub test_expert: String,
    pub metric: String,
    pub inter_median: Option<f64>,
    pub inter_ci_lo: Option<f64>,
    pub inter_ci_hi: Option<f64>,
    pub model_median: Option<f64>,
    pub model_ci_lo: Option<f64>,
    pub model_ci_hi: Option<f64>,
    pub margin: f64,
    pub n_pairs: usize,
    pub n_dropped: usize,
    pub p_raw: Option<f64>,
    pub p_adjusted: Option<f64>,
    pub significant: bool,
    pub note: String,
}
