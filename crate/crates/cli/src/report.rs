//! Check records, the versioned JSON report and its CSV and text renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Format;

pub const SCHEMA_VERSION: u32 = 1;

/// How a record's value is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Equal => "==",
        }
    }

    /// A missing value (solver failure) never holds.
    pub fn holds(self, value: Option<f64>, tol: f64) -> bool {
        match value {
            None => false,
            Some(v) => match self {
                Relation::AtMost => v <= tol,
                Relation::AtLeast => v >= tol,
                Relation::Equal => v == tol,
            },
        }
    }
}

/// One check: a measured value against an explicit tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub suite: String,
    pub check: String,
    /// The formula or relation the check audits.
    pub anchor: String,
    /// `None` when the computation itself failed.
    pub value: Option<f64>,
    pub relation: Relation,
    pub tol: f64,
    pub pass: bool,
    #[serde(default)]
    pub note: String,
}

impl Record {
    pub fn new(suite: &str, check: impl Into<String>, anchor: &str, value: f64, relation: Relation, tol: f64) -> Self {
        // Non-finite values cannot be written to JSON; they are failures.
        let (value, note) = if value.is_finite() {
            (Some(value), String::new())
        } else {
            (None, format!("non-finite value {value}"))
        };
        Self {
            suite: suite.to_owned(),
            check: check.into(),
            anchor: anchor.to_owned(),
            pass: relation.holds(value, tol),
            value,
            relation,
            tol,
            note,
        }
    }

    /// A check whose computation failed: recorded, never passing.
    pub fn failed(suite: &str, check: impl Into<String>, anchor: &str, relation: Relation, tol: f64, error: impl ToString) -> Self {
        Self {
            suite: suite.to_owned(),
            check: check.into(),
            anchor: anchor.to_owned(),
            value: None,
            relation,
            tol,
            pass: false,
            note: error.to_string(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        if self.note.is_empty() {
            self.note = note;
        } else {
            self.note = format!("{}; {note}", self.note);
        }
        self
    }

    /// Recomputes the pass flag from value, relation and tolerance.
    pub fn derived_pass(&self) -> bool {
        self.relation.holds(self.value, self.tol)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub tool_version: String,
    pub float: String,
    pub mantissa_bits: u32,
    pub epsilon: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            float: "f64".to_owned(),
            mantissa_bits: f64::MANTISSA_DIGITS,
            epsilon: format!("{:e}", f64::EPSILON),
            os: std::env::consts::OS.to_owned(),
            arch: std::env::consts::ARCH.to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
}

impl Totals {
    fn of(records: &[Record]) -> Self {
        let passed = records.iter().filter(|r| r.pass).count();
        Self {
            checks: records.len(),
            passed,
            failed: records.len() - passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub tool: String,
    pub suites: Vec<String>,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub environment: Environment,
    pub records: Vec<Record>,
    pub totals: Totals,
    /// Unix seconds at assembly; the only field allowed to differ between
    /// reruns.
    pub timestamp: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot read report {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("malformed report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report schema {found} is not supported (expected {SCHEMA_VERSION})")]
    Schema { found: u32 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One CSV row: a record flattened, with the value as text so that failures
/// stay distinguishable from numbers.
#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    suite: &'a str,
    check: &'a str,
    anchor: &'a str,
    value: String,
    relation: &'static str,
    tol: f64,
    pass: bool,
    note: &'a str,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "failed".into())
}

impl Report {
    pub fn new(suites: Vec<String>, seed: u64, config: BTreeMap<String, String>, records: Vec<Record>) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            tool: format!("spin-so4 {}", env!("CARGO_PKG_VERSION")),
            suites,
            seed,
            config,
            environment: Environment::current(),
            totals: Totals::of(&records),
            records,
            timestamp: unix_now(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.totals.failed == 0 && !self.records.is_empty()
    }

    /// True when every pass flag and the totals follow from the records.
    pub fn is_consistent(&self) -> bool {
        self.records.iter().all(|r| r.pass == r.derived_pass()) && self.totals == Totals::of(&self.records)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, EmitError> {
        #[derive(Deserialize)]
        struct Probe {
            schema: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.schema != SCHEMA_VERSION {
            return Err(EmitError::Schema { found: probe.schema });
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, EmitError> {
        let text = fs::read_to_string(path).map_err(|source| EmitError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_csv(&self) -> Result<String, EmitError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(CsvRow {
                suite: &r.suite,
                check: &r.check,
                anchor: &r.anchor,
                value: r.value.map(|v| v.to_string()).unwrap_or_default(),
                relation: r.relation.symbol(),
                tol: r.tol,
                pass: r.pass,
                note: &r.note,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }

    /// Aligned table, one block per suite, followed by the totals.
    pub fn to_text(&self) -> String {
        let header = ["check", "anchor", "value", "rel", "tol", "pass"];
        let rows: Vec<(&str, [String; 6])> = self
            .records
            .iter()
            .map(|r| {
                (
                    r.suite.as_str(),
                    [
                        r.check.clone(),
                        r.anchor.clone(),
                        fmt_value(r.value),
                        r.relation.symbol().to_owned(),
                        format!("{:.1e}", r.tol),
                        if r.pass { "PASS" } else { "FAIL" }.to_owned(),
                    ],
                )
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for (_, cells) in &rows {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                s.push_str(c);
                if i + 1 < cells.len() {
                    s.extend(std::iter::repeat(' ').take(w - c.chars().count()));
                }
            }
            s.push('\n');
            s
        };
        let mut out = String::new();
        let _ = writeln!(out, "spin-so4 report (schema {}, seed {})", self.schema, self.seed);
        let mut current = None;
        for ((suite, cells), record) in rows.iter().zip(&self.records) {
            if current != Some(*suite) {
                current = Some(*suite);
                let _ = writeln!(out, "\n[{suite}]");
                out.push_str(&line(&header.map(String::from)));
            }
            out.push_str(&line(cells));
            if !record.note.is_empty() {
                let _ = writeln!(out, "    note: {}", record.note);
            }
        }
        let _ = writeln!(
            out,
            "\n{} checks, {} passed, {} failed",
            self.totals.checks, self.totals.passed, self.totals.failed
        );
        out
    }

    pub fn render(&self, format: Format) -> Result<String, EmitError> {
        match format {
            Format::Json => Ok(self.to_json()),
            Format::Csv => self.to_csv(),
            Format::Text => Ok(self.to_text()),
        }
    }

    /// Writes `<dir>/<stem>.<ext>` and returns the path.
    pub fn emit(&self, format: Format, dir: &Path, stem: &str) -> Result<PathBuf, EmitError> {
        let body = self.render(format)?;
        write_file(dir, &format!("{stem}.{}", format.extension()), &body)
    }
}

/// Creates `dir` if needed and writes `name` inside it.
pub fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf, EmitError> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, body))
        .map_err(|source| EmitError::Io {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}
