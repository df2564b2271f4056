use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{conditional_degradation, failure_rate, run_pair, ExperimentOutcome, Method};
use crate::error::{Error, Result};
use crate::io::{read_features, ExperimentManifest, ExperimentRecord};
use crate::types::LabeledDomain;

pub const RESULT_COLUMNS: [&str; 10] = [
    "pair_id",
    "source",
    "target",
    "method",
    "seed",
    "acc_source_test",
    "acc_target_baseline",
    "acc_target_adapted",
    "delta",
    "failed",
];

/// One CSV output line.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub pair_id: String,
    pub source: String,
    pub target: String,
    pub method: Method,
    pub seed: u64,
    pub acc_source_test: f64,
    pub acc_target_baseline: f64,
    pub acc_target_adapted: f64,
    pub delta: f64,
    pub failed: bool,
}

impl ResultRow {
    pub fn from_outcome(
        pair_id: &str,
        source: &str,
        target: &str,
        seed: u64,
        outcome: &ExperimentOutcome,
    ) -> Self {
        Self {
            pair_id: pair_id.to_string(),
            source: source.to_string(),
            target: target.to_string(),
            method: outcome.method,
            seed,
            acc_source_test: outcome.source_acc,
            acc_target_baseline: outcome.baseline_target_acc,
            acc_target_adapted: outcome.adapted_target_acc,
            delta: outcome.delta,
            failed: outcome.failed,
        }
    }

    pub fn csv_header() -> String {
        RESULT_COLUMNS.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record([
            self.pair_id.clone(),
            self.source.clone(),
            self.target.clone(),
            self.method.to_string(),
            self.seed.to_string(),
            format_sig6(self.acc_source_test),
            format_sig6(self.acc_target_baseline),
            format_sig6(self.acc_target_adapted),
            format_sig6(self.delta),
            self.failed.to_string(),
        ])
        .expect("in-memory write");
        let bytes = w.into_inner().expect("in-memory flush");
        let mut line = String::from_utf8(bytes).expect("utf-8 fields");
        line.pop();
        line
    }
}

/// Six significant digits, `%g` style, ties rounded to even on the exact
/// binary value. Independent of locale.
pub fn format_sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sign = if neg { "-" } else { "" };
    if !(-4..6).contains(&exp) {
        let frac = digits[1..].trim_end_matches('0');
        let dot = if frac.is_empty() { "" } else { "." };
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{}{dot}{frac}e{esign}{:02}", &digits[..1], exp.abs());
    }
    let (int_part, frac_part) = if exp >= 0 {
        let split = exp as usize + 1;
        (digits[..split].to_string(), digits[split..].to_string())
    } else {
        ("0".to_string(), "0".repeat((-exp - 1) as usize) + &digits)
    };
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// Rows in manifest order and the matching outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub rows: Vec<ResultRow>,
    pub outcomes: Vec<ExperimentOutcome>,
}

fn resolve(base_dir: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

/// Reads a source/target pair. Class counts are inferred per file, so a
/// target that never uses the source's highest classes adopts the source's
/// count.
pub fn load_pair(source: &Path, target: &Path) -> Result<(LabeledDomain, LabeledDomain)> {
    let source = read_features(source)?;
    let target = read_features(target)?;
    let c = source.num_classes();
    let target = if target.num_classes() <= c {
        target.with_num_classes(c)?
    } else {
        target
    };
    Ok((source, target))
}

fn run_record(record: &ExperimentRecord, base_dir: &Path) -> Result<(ResultRow, ExperimentOutcome)> {
    let (source, target) = load_pair(
        &resolve(base_dir, &record.source_path),
        &resolve(base_dir, &record.target_path),
    )?;
    let mut outcome = run_pair(&source, &target, record.method, &record.method_params, record.seed)?;
    outcome.pair_id = record.id.clone();
    let row = ResultRow::from_outcome(
        &record.id,
        &record.source_path,
        &record.target_path,
        record.seed,
        &outcome,
    );
    Ok((row, outcome))
}

/// Runs every experiment on a pool of `jobs` threads. Relative feature paths
/// are resolved against `base_dir`. Results keep manifest order; the first
/// failing experiment (in manifest order) aborts the batch.
pub fn run_manifest(manifest: &ExperimentManifest, base_dir: &Path, jobs: usize) -> Result<BatchReport> {
    manifest.validate()?;
    if jobs == 0 {
        return Err(Error::InvalidConfig("jobs must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<(ResultRow, ExperimentOutcome)>> = pool.install(|| {
        manifest
            .experiments
            .par_iter()
            .map(|r| run_record(r, base_dir))
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    let mut outcomes = Vec::with_capacity(results.len());
    for r in results {
        let (row, outcome) = r?;
        rows.push(row);
        outcomes.push(outcome);
    }
    Ok(BatchReport { rows, outcomes })
}

fn opt_cell(v: Option<(f64, f64)>, n: usize) -> [String; 3] {
    match v {
        Some((m, s)) => [n.to_string(), format_sig6(m), format_sig6(s)],
        None => ["0".into(), String::new(), String::new()],
    }
}

/// Result CSV followed by a `# summary` block with one line per method.
pub fn render_results(report: &BatchReport) -> String {
    let mut out = ResultRow::csv_header();
    out.push('\n');
    for row in &report.rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    let mut by_method: BTreeMap<Method, Vec<ExperimentOutcome>> = BTreeMap::new();
    for o in &report.outcomes {
        by_method.entry(o.method).or_default().push(o.clone());
    }
    out.push_str("\n# summary\n");
    out.push_str(
        "method,count,failure_rate_pct,delta_mean,delta_std,\
         success_count,success_delta_mean,success_delta_std,\
         failure_count,failure_delta_mean,failure_delta_std\n",
    );
    for (method, set) in &by_method {
        let f = failure_rate(set).expect("non-empty group");
        let d = conditional_degradation(set);
        let cells = [
            vec![
                method.to_string(),
                f.count.to_string(),
                format_sig6(f.rate_percent),
                format_sig6(f.delta_mean),
                format_sig6(f.delta_std),
            ],
            opt_cell(d.success, f.count - f.failed).to_vec(),
            opt_cell(d.failure, f.failed).to_vec(),
        ]
        .concat();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Writes `contents` through a temporary file in the destination directory and
/// renames it into place, so readers never see a partial file.
pub fn write_results_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
