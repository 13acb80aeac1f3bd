//! `coreval` command-line tool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coreval::cohort::{
    default_pairs, export_volume_scatter, noninferiority_report, numbered_ids, run_agreement_study, split_cohort,
    write_scatter, AgreementTable, Manifest, Roles, DEFAULT_COHORT_SIZE, DEFAULT_FOLDS, DEFAULT_TEST_SIZE,
};
use coreval::config::{RunConfig, DEFAULT_OUT_DIR, OUT_DIR_ENV};
use coreval::metrics::{evaluate_pair, DEFAULT_TOLERANCE_MM};
use coreval::mirror::{build_mirror_channel, MirrorMode, RegistrationOptions, WidthHalf};
use coreval::stats::{NonInferiorityMargin, DEFAULT_ALPHA, DEFAULT_RESAMPLES};
use coreval::synth::{generate_cohort, CohortSpec};
use coreval::volgrid::{load_mask, load_volume, save_volume, VolumeKind};
use coreval::Error;
use log::warn;

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DATA: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "coreval", version, about = "Agreement evaluation for 3D lesion segmentations")]
struct Cli {
    /// Worker threads for per-case work; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare two masks and print the metric record as JSON.
    Evaluate {
        pred: PathBuf,
        reference: PathBuf,
        /// Surface distance tolerance in mm.
        #[arg(long, default_value_t = DEFAULT_TOLERANCE_MM)]
        tol: f64,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every case of a manifest and write the agreement table.
    Cohort {
        /// Manifest file (.json, or long-format .csv).
        manifest: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE_MM)]
        tol: f64,
        #[command(flatten)]
        roles: RoleArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Non-inferiority report from an agreement table.
    Report {
        /// Agreement table CSV written by `cohort`.
        table: PathBuf,
        /// Margin for the bounded metrics, as a fraction of their unit range.
        #[arg(long, default_value_t = 0.2)]
        margin_unit: f64,
        /// Margin for the absolute volume difference, in ml.
        #[arg(long, default_value_t = 3.0)]
        margin_avd: f64,
        /// Margin for HD95, in mm.
        #[arg(long, default_value_t = 3.0)]
        margin_hd: f64,
        /// Family-wise significance level.
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Bootstrap resamples per summary.
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        /// Bootstrap seed (required; there is no default).
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        roles: RoleArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Build the mirrored channel of an image.
    ///
    /// Writes `<name>_mirror.nii.gz` and `<name>_transform.json` next to the
    /// input unless `--out` is given.
    Mirror {
        image: PathBuf,
        /// Replace one width half of the image with the mirror instead of
        /// returning the whole mirrored volume.
        #[arg(long, value_enum)]
        replace: Option<Half>,
        /// Output directory [default: the input's directory].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split case ids into a test set and cross-validation folds.
    Split {
        /// Number of cases, named 0..n-1 [default: 232].
        #[arg(long, conflicts_with = "ids")]
        n: Option<usize>,
        /// File with one case id per line.
        #[arg(long)]
        ids: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TEST_SIZE)]
        test: usize,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
        /// Shuffle seed (required; there is no default).
        #[arg(long)]
        seed: u64,
        /// Write the plan here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic multi-rater cohort with a manifest.
    Synth {
        #[arg(long, default_value_t = DEFAULT_TEST_SIZE)]
        cases: usize,
        /// Generator seed (required; there is no default).
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args, Debug)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RoleArgs {
    /// Rater whose masks trained the model [default: A].
    #[arg(long)]
    training: Option<String>,
    /// Comma-separated held-out test raters [default: B,C].
    #[arg(long, value_delimiter = ',')]
    test: Option<Vec<String>>,
    /// Rater id of the model [default: Model].
    #[arg(long)]
    model: Option<String>,
}

impl RoleArgs {
    fn apply(&self, mut roles: Roles) -> Roles {
        if let Some(t) = &self.training {
            roles.training_rater = t.clone();
        }
        if let Some(t) = &self.test {
            roles.test_raters = t.clone();
        }
        if let Some(m) = &self.model {
            roles.model = m.clone();
        }
        roles
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Half {
    Lower,
    Upper,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. }
            | Error::UnsupportedFormat(_)
            | Error::UnsupportedDatatype(_)
            | Error::InvalidHeader { .. }
            | Error::DimensionMismatch { .. } => EXIT_IO,
            Error::InvalidArgument(_) => EXIT_USAGE,
            Error::GridMismatch(_)
            | Error::InvalidGeometry(_)
            | Error::AllZeroDifferences
            | Error::InsufficientData(_)
            | Error::Degenerate(_)
            | Error::Manifest(_)
            | Error::Json(_)
            | Error::Csv(_) => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Failure {
            code: EXIT_OTHER,
            message: format!("cannot start worker pool: {e}"),
        })?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Evaluate {
            pred,
            reference,
            tol,
            out,
        } => {
            let p = load_mask(&pred)?;
            let r = load_mask(&reference)?;
            let record = evaluate_pair(&p, &r, tol)?;
            emit_json(serde_json::to_string_pretty(&record), out.as_deref())
        }
        Command::Cohort {
            manifest,
            tol,
            roles,
            out,
        } => cohort(&manifest, tol, &roles, &out.out),
        Command::Report {
            table,
            margin_unit,
            margin_avd,
            margin_hd,
            alpha,
            resamples,
            seed,
            roles,
            out,
        } => {
            let mut config = RunConfig::new(seed, out.out);
            config.margins = NonInferiorityMargin {
                bounded_unit: margin_unit,
                avd_ml: margin_avd,
                hd95_mm: margin_hd,
            };
            config.alpha = alpha;
            config.n_resamples = resamples;
            config.validate()?;
            let table = AgreementTable::read_csv(&table)?;
            if let Some(t) = table.tolerance_mm() {
                config.tolerance_mm = t;
            }
            let opts = config.report_options(&roles.apply(Roles::default()));
            let report = noninferiority_report(&table, &opts)?;
            report.write_all(&config.out_dir)?;
            print!("{}", report.to_markdown());
            Ok(())
        }
        Command::Mirror { image, replace, out } => mirror(&image, replace, out),
        Command::Split {
            n,
            ids,
            test,
            folds,
            seed,
            out,
        } => {
            let ids = match (n, ids) {
                (Some(n), _) => numbered_ids(n),
                (None, Some(path)) => read_ids(&path)?,
                (None, None) => numbered_ids(DEFAULT_COHORT_SIZE),
            };
            let plan = split_cohort(&ids, test, folds, seed)?;
            emit_json(serde_json::to_string_pretty(&plan), out.as_deref())
        }
        Command::Synth { cases, seed, out } => {
            let spec = CohortSpec::standard(cases, seed);
            let manifest = generate_cohort(&spec, &out.out)?;
            println!(
                "{} cases for raters {} written to {}",
                manifest.cases.len(),
                manifest.raters.join(", "),
                out.out.display()
            );
            Ok(())
        }
    }
}

fn cohort(manifest_path: &Path, tol: f64, roles: &RoleArgs, out: &Path) -> CliResult {
    let manifest = match manifest_path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Manifest::load_csv(manifest_path, roles.apply(Roles::default()))?,
        _ => {
            let mut m = Manifest::load(manifest_path)?;
            m.roles = roles.apply(m.roles);
            m
        }
    };
    manifest.validate()?;
    let pairs = default_pairs(&manifest.roles);
    let table = run_agreement_study(&manifest, tol, Some(&pairs))?;
    std::fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let table_path = out.join("agreement.csv");
    table.write_csv(&table_path)?;
    match export_volume_scatter(&table, &pairs) {
        Ok(series) => {
            write_scatter(&series, &out.join("scatter"))?;
        }
        Err(e @ Error::InsufficientData(_)) => warn!("volume scatter skipped: {e}"),
        Err(e) => return Err(e.into()),
    }
    let excluded = table.exclusions();
    for e in &excluded {
        warn!("case {} excluded: {}", e.case_id, e.reason);
    }
    println!(
        "{} cases ({} excluded), {} pairs -> {}",
        table.case_ids().len(),
        excluded.len(),
        pairs.len(),
        table_path.display()
    );
    Ok(())
}

fn mirror(image: &Path, replace: Option<Half>, out: Option<PathBuf>) -> CliResult {
    let grid = load_volume(image, VolumeKind::Image)?;
    let mode = match replace {
        None => MirrorMode::Full,
        Some(Half::Lower) => MirrorMode::ReplaceHalf(WidthHalf::Lower),
        Some(Half::Upper) => MirrorMode::ReplaceHalf(WidthHalf::Upper),
    };
    let result = build_mirror_channel(&grid, &RegistrationOptions::default(), mode)?;
    if let Some(w) = &result.registration.warning {
        warn!("{w}");
    }
    let dir = match out {
        Some(d) => d,
        None => image.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    }
    let stem = volume_stem(image);
    let volume_path = dir.join(format!("{stem}_mirror.nii.gz"));
    let transform_path = dir.join(format!("{stem}_transform.json"));
    save_volume(&volume_path, &result.channel)?;
    let json = serde_json::to_string_pretty(&result.registration.transform).map_err(Error::from)?;
    std::fs::write(&transform_path, json + "\n").map_err(|e| io_failure(&transform_path, e))?;
    println!("{}\n{}", volume_path.display(), transform_path.display());
    Ok(())
}

fn volume_stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    for ext in [".nii.gz", ".nii", ".json", ".raw"] {
        if let Some(s) = name.strip_suffix(ext) {
            return s.to_string();
        }
    }
    name
}

fn read_ids(path: &Path) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::from(Error::Io {
        path: path.to_path_buf(),
        source: e,
    }))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn emit_json(json: serde_json::Result<String>, out: Option<&Path>) -> CliResult {
    let json = json.map_err(Error::from)? + "\n";
    match out {
        Some(path) => std::fs::write(path, json).map_err(|e| io_failure(path, e)),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}
