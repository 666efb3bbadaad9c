//! Report files and CSV comparison.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-3..1e6).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// A value that can appear in a summary.
pub trait Entry {
    fn render(&self) -> String;
}

impl Entry for f64 {
    fn render(&self) -> String {
        format_number(*self)
    }
}

impl Entry for &f64 {
    fn render(&self) -> String {
        format_number(**self)
    }
}

macro_rules! display_entry {
    ($($t:ty),*) => {
        $(impl Entry for $t {
            fn render(&self) -> String {
                self.to_string()
            }
        })*
    };
}

display_entry!(usize, bool, &str, String);

/// One acceptance-style check of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub target: String,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        passed: bool,
        value: f64,
        target: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            target: target.into(),
        }
    }

    /// `value` within `[lo, hi]`.
    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(
            name,
            value >= lo && value <= hi,
            value,
            format!("[{lo}, {hi}]"),
        )
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(
            name,
            value <= limit,
            value,
            format!("<= {}", format_number(limit)),
        )
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(
            name,
            value >= limit,
            value,
            format!(">= {}", format_number(limit)),
        )
    }
}

/// Flat `key = value` diagnostics plus the checks of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn put(&mut self, key: impl Into<String>, value: impl Entry) {
        self.entries.push((key.into(), value.render()));
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {v}")?;
        }
        Ok(())
    }

    /// `check,status,value,target`.
    pub fn write_checks<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "check,status,value,target")?;
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            writeln!(
                out,
                "{},{},{},\"{}\"",
                c.name,
                status,
                format_number(c.value),
                c.target
            )?;
        }
        Ok(())
    }

    /// Writes `summary.txt` and `checks.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> io::Result<()> {
        self.write_summary(io::BufWriter::new(fs::File::create(
            dir.join("summary.txt"),
        )?))?;
        self.write_checks(io::BufWriter::new(fs::File::create(
            dir.join("checks.csv"),
        )?))
    }
}

/// Creates `dir/name` and hands a buffered writer to `body`.
pub fn write_file<F>(dir: &Path, name: &str, body: F) -> io::Result<()>
where
    F: FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>,
{
    let mut w = io::BufWriter::new(fs::File::create(dir.join(name))?);
    body(&mut w)?;
    w.flush()
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("grid mismatch: {0}")]
    Grid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Difference {
    /// Largest absolute difference over all value entries.
    pub max: f64,
    /// sqrt(Σ h·Σ_col d²) with h the grid step of the first column.
    pub l2: f64,
    /// Largest absolute value entry of the first file.
    pub scale: f64,
    pub rows: usize,
}

impl Difference {
    pub fn relative_max(&self) -> f64 {
        if self.scale > 0.0 {
            self.max / self.scale
        } else {
            self.max
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table, CompareError> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| CompareError::Io {
        path: p.clone(),
        source,
    })?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| CompareError::Parse {
        path: p.clone(),
        line: 1,
        message: "empty file".into(),
    })?;
    let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CompareError::Parse {
                path: p.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if row.len() != header.len() {
            return Err(CompareError::Parse {
                path: p.clone(),
                line: i + 1,
                message: format!("{} fields, header has {}", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Compares two CSV series on the same grid. The first column is the grid;
/// the remaining columns are values.
pub fn compare_files(a: &Path, b: &Path) -> Result<Difference, CompareError> {
    let (ta, tb) = (read_table(a)?, read_table(b)?);
    if ta.header.len() != tb.header.len() {
        return Err(CompareError::Grid(format!(
            "{} columns against {}",
            ta.header.len(),
            tb.header.len()
        )));
    }
    if ta.rows.len() != tb.rows.len() {
        return Err(CompareError::Grid(format!(
            "{} rows against {}",
            ta.rows.len(),
            tb.rows.len()
        )));
    }
    let h = if ta.rows.len() > 1 {
        ta.rows[1][0] - ta.rows[0][0]
    } else {
        1.0
    };
    let mut diff = Difference {
        max: 0.0,
        l2: 0.0,
        scale: 0.0,
        rows: ta.rows.len(),
    };
    for (k, (ra, rb)) in ta.rows.iter().zip(&tb.rows).enumerate() {
        let tol = 1e-9 * (h.abs() + ra[0].abs());
        if (ra[0] - rb[0]).abs() > tol {
            return Err(CompareError::Grid(format!(
                "row {}: {} against {}",
                k + 1,
                ra[0],
                rb[0]
            )));
        }
        for (x, y) in ra[1..].iter().zip(&rb[1..]) {
            let d = (x - y).abs();
            diff.max = diff.max.max(d);
            diff.l2 += d * d;
            diff.scale = diff.scale.max(x.abs());
        }
    }
    diff.l2 = (diff.l2 * h.abs()).sqrt();
    Ok(diff)
}
