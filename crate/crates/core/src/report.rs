//! Check rows, data tables and the single writer for run artifacts.

use crate::config::ExperimentConfig;
pub use crate::energy::Provenance;
use crate::error::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// A prerequisite computation failed; never counted as a pass.
    Skipped,
    /// Diagnostic row that does not gate the run.
    Info,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
            Status::Info => "info",
        }
    }
}

/// How `measured` is compared against `expected` and `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// |measured/expected − 1| ≤ tolerance.
    Rel,
    /// |measured − expected| ≤ tolerance.
    Abs,
    /// measured ≤ expected (tolerance unused).
    AtMost,
    /// measured ≥ expected (tolerance unused).
    AtLeast,
}

impl Relation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::Rel => "rel",
            Relation::Abs => "abs",
            Relation::AtMost => "at_most",
            Relation::AtLeast => "at_least",
        }
    }

    pub fn holds(&self, measured: f64, expected: f64, tol: f64) -> bool {
        match self {
            Relation::Rel => (measured / expected - 1.0).abs() <= tol,
            Relation::Abs => (measured - expected).abs() <= tol,
            Relation::AtMost => measured <= expected,
            Relation::AtLeast => measured >= expected,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub status: Status,
    pub provenance: Provenance,
    /// Short description of the statement being checked.
    pub anchor: String,
    pub note: String,
}

impl Check {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        suite: &str,
        name: impl Into<String>,
        measured: f64,
        expected: f64,
        tolerance: f64,
        relation: Relation,
        provenance: Provenance,
        anchor: &str,
    ) -> Self {
        let ok = relation.holds(measured, expected, tolerance);
        Check {
            suite: suite.to_string(),
            name: name.into(),
            measured,
            expected,
            tolerance,
            relation,
            status: if ok { Status::Pass } else { Status::Fail },
            provenance,
            anchor: anchor.to_string(),
            note: String::new(),
        }
    }

    /// Boolean check recorded as measured = 1/0 against expected 1.
    pub fn flag(
        suite: &str,
        name: impl Into<String>,
        ok: bool,
        provenance: Provenance,
        anchor: &str,
    ) -> Self {
        Check::new(
            suite,
            name,
            if ok { 1.0 } else { 0.0 },
            1.0,
            0.0,
            Relation::AtLeast,
            provenance,
            anchor,
        )
    }

    pub fn skipped(
        suite: &str,
        name: impl Into<String>,
        provenance: Provenance,
        anchor: &str,
        why: &str,
    ) -> Self {
        Check {
            suite: suite.to_string(),
            name: name.into(),
            measured: f64::NAN,
            expected: f64::NAN,
            tolerance: f64::NAN,
            relation: Relation::Abs,
            status: Status::Skipped,
            provenance,
            anchor: anchor.to_string(),
            note: why.to_string(),
        }
    }

    pub fn info(mut self, note: impl Into<String>) -> Self {
        self.status = Status::Info;
        self.note = note.into();
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Column-oriented numeric table.
#[derive(Debug, Clone, Serialize)]
pub struct DataTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DataTable {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        DataTable {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(|v| fmt_num(*v)))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Shortest round-trip representation; deterministic across runs.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteOutput {
    pub checks: Vec<Check>,
    pub tables: Vec<DataTable>,
}

impl SuiteOutput {
    pub fn extend(&mut self, other: SuiteOutput) {
        self.checks.extend(other.checks);
        self.tables.extend(other.tables);
    }
}

pub fn summary_csv(checks: &[Check]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "suite",
        "check",
        "measured",
        "expected",
        "tolerance",
        "relation",
        "status",
        "provenance",
        "anchor",
        "note",
    ])
    .expect("in-memory write");
    for c in checks {
        w.write_record([
            c.suite.as_str(),
            c.name.as_str(),
            &fmt_num(c.measured),
            &fmt_num(c.expected),
            &fmt_num(c.tolerance),
            c.relation.as_str(),
            c.status.as_str(),
            c.provenance.as_str(),
            c.anchor.as_str(),
            c.note.as_str(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteTiming {
    pub suite: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub threads: usize,
    pub suites: Vec<String>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub files: Vec<FileEntry>,
    pub timings: Vec<SuiteTiming>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

impl Tally {
    pub fn of(checks: &[Check]) -> Self {
        let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
        Tally {
            passed: count(Status::Pass),
            failed: count(Status::Fail),
            skipped: count(Status::Skipped),
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0 && self.skipped == 0
    }
}

/// Owns the output directory; every artifact goes through it.
pub struct Reporter {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Reporter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        // probe writability up front rather than after hours of computation
        let probe = dir.join(".fraclab-write-test");
        fs::write(&probe, b"")?;
        fs::remove_file(&probe)?;
        Ok(Reporter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(path)
    }

    pub fn write_outputs(&mut self, out: &SuiteOutput) -> Result<()> {
        self.write("summary.csv", &summary_csv(&out.checks))?;
        for t in &out.tables {
            self.write(&format!("{}.csv", t.name), &t.to_csv())?;
        }
        Ok(())
    }

    pub fn finish(
        mut self,
        cfg: &ExperimentConfig,
        threads: usize,
        out: &SuiteOutput,
        timings: Vec<SuiteTiming>,
    ) -> Result<Manifest> {
        let tally = Tally::of(&out.checks);
        let text = cfg.to_toml();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(text.as_bytes()),
            config: cfg.clone(),
            seed: cfg.seed,
            threads,
            suites: cfg
                .suite
                .expand()
                .iter()
                .map(|s| s.name().to_string())
                .collect(),
            passed: tally.passed,
            failed: tally.failed,
            skipped: tally.skipped,
            files: std::mem::take(&mut self.files),
            timings,
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.dir.join("manifest.json"), json)?;
        fs::write(self.dir.join("config.toml"), text)?;
        Ok(manifest)
    }
}
