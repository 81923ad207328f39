//! Run summaries and atomic file output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity; `None` for purely qualitative checks.
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn within(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            value: Some(value),
            tolerance: Some(tolerance),
            detail: detail.into(),
        }
    }

    pub fn expect(name: &str, expected: bool, found: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: expected == found, value: None, tolerance: None, detail: detail.into() }
    }

    pub fn failed(name: &str, err: &Error) -> Self {
        Self { name: name.into(), passed: false, value: None, tolerance: None, detail: err.to_string() }
    }
}

/// Fields that legitimately differ between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    /// Seconds since the Unix epoch.
    pub generated_at: u64,
    pub version: String,
}

impl Meta {
    pub fn now() -> Self {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self { generated_at: secs, version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub operation: String,
    pub target: String,
    pub seed: u64,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    /// Operation-specific results.
    pub data: BTreeMap<String, Value>,
    /// CSV files written next to the summary.
    pub files: Vec<String>,
    pub passed: bool,
    pub meta: Meta,
}

impl Summary {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            operation: config.run.operation.as_str().into(),
            target: config.run.target.clone(),
            seed: config.run.seed,
            config: config.clone(),
            checks: Vec::new(),
            data: BTreeMap::new(),
            files: Vec::new(),
            passed: true,
            meta: Meta::now(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    /// Records a result or turns the error into a failed check.
    pub fn push_result(&mut self, name: &str, r: Result<Check>) {
        match r {
            Ok(c) => self.push(c),
            Err(e) => self.push(Check::failed(name, &e)),
        }
    }

    pub fn insert<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or_else(|e| Value::String(format!("unserializable: {e}")));
        self.data.insert(key.into(), v);
    }

    pub fn to_json(&self) -> Result<String> {
        // Non-finite floats serialize as null.
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    /// Human-readable digest, one line per check.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{} {} (seed {}): {}\n",
            self.operation,
            self.target,
            self.seed,
            if self.passed { "PASS" } else { "FAIL" }
        );
        for c in &self.checks {
            let measured = match (c.value, c.tolerance) {
                (Some(v), Some(t)) => format!(" {v:.3e} <= {t:.1e}"),
                (Some(v), None) => format!(" {v:.6e}"),
                _ => String::new(),
            };
            out.push_str(&format!(
                "  [{}] {}{}  {}\n",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                measured,
                c.detail
            ));
        }
        out
    }
}

/// Output directory with atomic file writes.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::Io(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn write_with<F>(&self, name: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        {
            let file = std::fs::File::create(&tmp)?;
            let mut w = std::io::BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
            w.get_ref().sync_all()?;
        }
        std::fs::rename(&tmp, &target)?;
        Ok(target)
    }

    pub fn write_summary(&self, summary: &Summary) -> Result<PathBuf> {
        let json = summary.to_json()?;
        self.write_with(SUMMARY_FILE, |w| Ok(w.write_all(json.as_bytes())?))
    }
}

/// Writes rows of floats under a header.
pub fn write_table(w: &mut dyn Write, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        wr.write_record(r.iter().map(|v| format!("{v:.17e}"))).map_err(|e| Error::Io(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_aggregate() {
        let mut s = Summary::new(&RunConfig::default());
        s.push(Check::within("a", 1e-9, 1e-8, ""));
        assert!(s.passed);
        s.push(Check::expect("b", true, false, ""));
        assert!(!s.passed);
        s.push_result("c", Err(Error::Io("x".into())));
        assert_eq!(s.checks[2].detail, "io error: x");
    }

    #[test]
    fn nan_values_survive_json() {
        let mut s = Summary::new(&RunConfig::default());
        s.push(Check::within("nan", f64::NAN, 1.0, ""));
        let json = s.to_json().unwrap();
        let back: Summary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.checks[0].value, None);
        assert!(!back.passed);
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path()).unwrap();
        let mut s = Summary::new(&RunConfig::default());
        s.insert("k", &vec![1.0, 2.0]);
        out.write_summary(&s).unwrap();
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from(SUMMARY_FILE)]);
        let back = Summary::read(dir.path()).unwrap();
        assert_eq!(back.data["k"], serde_json::json!([1.0, 2.0]));
    }
}
