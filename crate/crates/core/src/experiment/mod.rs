//! Orchestration of experiment runs: jobs over h-sweeps and seeds, fits,
//! checks and the artifacts they leave on disk.

mod plot;
mod runners;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{KornError, Result};
use crate::fit::{fit_exponent, Band, FitReport, Verdict};

pub use plot::loglog_svg;

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub surface: String,
    pub thickness_kind: String,
    pub h: f64,
    pub n_t: usize,
    pub n_theta: usize,
    pub n_z: usize,
    pub quantity_name: String,
    pub value: f64,
    pub residual: Option<f64>,
    pub witness_file: String,
}

/// A `results.csv` row of the ansatz experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnsatzResultRow {
    pub surface: String,
    pub thickness_kind: String,
    pub h: f64,
    pub n_t: usize,
    pub n_theta: usize,
    pub n_z: usize,
    pub quantity_name: String,
    pub value: f64,
    pub residual: Option<f64>,
    pub witness_file: String,
    pub norm_name: String,
    pub fitted_exponent: f64,
    pub r2: f64,
}

/// One row of `harmonic.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicRow {
    pub seed: usize,
    pub h: f64,
    pub b: f64,
    pub quotient_name: String,
    pub value: f64,
}

/// A pass/fail comparison of a measured value with a bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub verdict: Verdict,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            relation: "<=",
            verdict: if value <= bound { Verdict::Pass } else { Verdict::Fail },
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            relation: ">=",
            verdict: if value >= bound { Verdict::Pass } else { Verdict::Fail },
        }
    }

    /// Downgrades a failure to `inconclusive`.
    pub fn advisory(mut self) -> Self {
        if self.verdict == Verdict::Fail {
            self.verdict = Verdict::Inconclusive;
        }
        self
    }
}

/// A fit together with the points it was made from. Fits without a band
/// are informational and do not enter the run verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSeries {
    pub report: FitReport,
    pub points: Vec<(f64, f64)>,
}

impl FitSeries {
    pub fn new(quantity: String, points: Vec<(f64, f64)>, band: Option<Band>) -> Self {
        FitSeries {
            report: fit_exponent(&quantity, &points, band),
            points,
        }
    }

    pub fn gating(&self) -> bool {
        self.report.band.is_some()
    }
}

/// A job that did not produce a result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedJob {
    pub job: String,
    pub error: String,
}

/// Everything a run measured, before it is written out.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub ansatz_rows: Vec<AnsatzResultRow>,
    pub harmonic_rows: Vec<HarmonicRow>,
    pub fits: Vec<FitSeries>,
    pub checks: Vec<Check>,
    pub failed: Vec<FailedJob>,
    pub completed: Vec<String>,
    /// Extra files as `(relative path, contents)`.
    pub files: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub fits: Vec<FitReport>,
    pub checks: Vec<Check>,
    pub failed_jobs: Vec<FailedJob>,
    pub artifacts: Vec<String>,
}

impl RunSummary {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn fit(&self, quantity: &str) -> Option<&FitReport> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }
}

/// Exit status of a run: 0 all pass, 1 any fail, 2 inconclusive only.
pub fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Inconclusive => 2,
    }
}

/// Exit status for command-line usage errors.
pub const EXIT_USAGE: i32 = 64;

/// Runs the experiment named in `config` on a pool of `workers` threads
/// (all cores when `None`) and writes its artifacts to `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path, workers: Option<usize>) -> Result<RunSummary> {
    config.validate()?;
    let kind = config.kind()?;
    // parallelism lives at the job level; keeping the dense kernels serial
    // makes the numbers independent of the pool size
    faer::set_global_parallelism(faer::Par::Seq);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| KornError::InvalidInput(format!("cannot build worker pool: {e}")))?;
    let output = pool.install(|| runners::dispatch(kind, config))?;
    write_artifacts(kind, config, output, out_dir)
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| KornError::io(parent, e))?;
    }
    let tmp = dir.join(format!("{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| KornError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| KornError::io(&path, e))
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| KornError::InvalidInput(format!("csv buffer: {e}")))
}

const RESULT_HEADER: [&str; 10] = [
    "surface",
    "thickness_kind",
    "h",
    "n_t",
    "n_theta",
    "n_z",
    "quantity_name",
    "value",
    "residual",
    "witness_file",
];

fn file_stem(quantity: &str) -> String {
    quantity
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

fn write_artifacts(kind: ExperimentKind, config: &ExperimentConfig, out: RunOutput, dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(dir).map_err(|e| KornError::io(dir, e))?;
    let mut artifacts = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        write_atomic(dir, &name, &bytes)?;
        artifacts.push(name);
        Ok(())
    };
    for (name, bytes) in &out.files {
        put(name.clone(), bytes.clone())?;
    }
    if kind == ExperimentKind::Ansatz {
        let mut header = RESULT_HEADER.to_vec();
        header.extend(["norm_name", "fitted_exponent", "r2"]);
        put("results.csv".into(), csv_bytes(&out.ansatz_rows, &header)?)?;
    } else if kind != ExperimentKind::Harmonic {
        put("results.csv".into(), csv_bytes(&out.rows, &RESULT_HEADER)?)?;
    }
    if kind == ExperimentKind::Harmonic {
        put(
            "harmonic.csv".into(),
            csv_bytes(&out.harmonic_rows, &["seed", "h", "b", "quotient_name", "value"])?,
        )?;
    }
    for f in &out.fits {
        put(
            format!("plot_{}.svg", file_stem(&f.report.quantity)),
            loglog_svg(&f.report, &f.points).into_bytes(),
        )?;
    }

    let mut parts: Vec<Verdict> = out.checks.iter().map(|c| c.verdict).collect();
    parts.extend(out.fits.iter().filter(|f| f.gating()).map(|f| f.report.verdict));
    if !out.failed.is_empty() {
        parts.push(Verdict::Fail);
    }
    let verdict = Verdict::combine(parts);
    if !out.failed.is_empty() {
        #[derive(Serialize)]
        struct Manifest<'a> {
            experiment: ExperimentKind,
            completed: &'a [String],
            failed: &'a [FailedJob],
        }
        let m = Manifest {
            experiment: kind,
            completed: &out.completed,
            failed: &out.failed,
        };
        put("partial.json".into(), serde_json::to_vec_pretty(&m)?)?;
    }
    let mut summary = RunSummary {
        experiment: kind,
        master_seed: config.master_seed,
        verdict,
        exit_code: exit_code(verdict),
        fits: out.fits.iter().map(|f| f.report.clone()).collect(),
        checks: out.checks,
        failed_jobs: out.failed,
        artifacts: Vec::new(),
    };
    artifacts.push("summary.txt".into());
    artifacts.push("summary.json".into());
    summary.artifacts = artifacts;
    write_atomic(dir, "summary.txt", summary_text(&summary).as_bytes())?;
    write_atomic(dir, "summary.json", &serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}

/// Plain-text table of every fit and check.
pub fn summary_text(s: &RunSummary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "experiment  {}", s.experiment);
    let _ = writeln!(t, "master_seed {}", s.master_seed);
    let _ = writeln!(t, "verdict     {} (exit {})", s.verdict, s.exit_code);
    if !s.fits.is_empty() {
        let _ = writeln!(t, "\nfits");
        let _ = writeln!(
            t,
            "{:<32} {:>10} {:>10} {:>8} {:>3} {:>20} {:>12}",
            "quantity", "slope", "intercept", "r2", "n", "band", "verdict"
        );
        for f in &s.fits {
            let band = f.band.map_or_else(|| "-".to_string(), |b| b.to_string());
            let verdict = if f.band.is_some() { f.verdict.name() } else { "info" };
            let _ = writeln!(
                t,
                "{:<32} {:>10.4} {:>10.4} {:>8.4} {:>3} {:>20} {:>12}",
                f.quantity, f.slope, f.intercept, f.r2, f.n_points, band, verdict
            );
        }
    }
    if !s.checks.is_empty() {
        let _ = writeln!(t, "\nchecks");
        for c in &s.checks {
            let _ = writeln!(
                t,
                "{:<52} {:>14.6e} {} {:<12.6e} {}",
                c.name, c.value, c.relation, c.bound, c.verdict
            );
        }
    }
    if !s.failed_jobs.is_empty() {
        let _ = writeln!(t, "\nfailed jobs (see partial.json)");
        for f in &s.failed_jobs {
            let _ = writeln!(t, "{}: {}", f.job, f.error);
        }
    }
    t
}

/// Output directory: the explicit one, else the config's, else `out/<kind>`.
pub fn resolve_out_dir(explicit: Option<&Path>, config: &ExperimentConfig) -> Result<PathBuf> {
    Ok(explicit
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(config.kind().map(|k| k.name()).unwrap_or("run"))))
}
