use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// A plot-ready curve, written as a two-column TSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub columns: [String; 2],
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, x: &str, y: &str) -> Self {
        Self {
            name: name.into(),
            columns: [x.to_string(), y.to_string()],
            points: Vec::new(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("{}\t{}\n", self.columns[0], self.columns[1]);
        for (x, y) in &self.points {
            let _ = writeln!(s, "{x}\t{y}");
        }
        s
    }
}

/// Everything an experiment produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub records: Vec<Value>,
    pub series: Vec<Series>,
    /// Set when an acceptance bound was violated.
    pub violation: Option<String>,
    /// Human-readable result for the terminal.
    pub summary: String,
}

impl Outcome {
    pub fn record<T: Serialize>(&mut self, kind: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value).map_err(|e| Error::State(e.to_string()))?;
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("record".into(), Value::String(kind.into()));
            }
            None => v = json!({ "record": kind, "value": v }),
        }
        self.records.push(v);
        Ok(())
    }

    /// The JSONL body: a header with the resolved config and `timestamp`,
    /// then one line per record.
    pub fn to_jsonl(&self, config: &ExperimentConfig, timestamp: u64) -> Result<String> {
        let header = json!({ "record": "header", "timestamp": timestamp, "config": config });
        let mut out = String::new();
        for v in std::iter::once(&header).chain(&self.records) {
            out.push_str(&serde_json::to_string(v).map_err(|e| Error::State(e.to_string()))?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Writes `path` and one `<stem>.<series>.tsv` per series next to it.
    pub fn write(
        &self,
        config: &ExperimentConfig,
        path: &Path,
        timestamp: u64,
    ) -> Result<Vec<PathBuf>> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_jsonl(config, timestamp)?)?;
        let mut written = vec![path.to_path_buf()];
        for s in &self.series {
            let p = series_path(path, &s.name);
            std::fs::write(&p, s.to_tsv())?;
            written.push(p);
        }
        Ok(written)
    }
}

pub(crate) fn series_path(path: &Path, name: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{name}.tsv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_has_header_first() {
        let mut o = Outcome::default();
        o.record("point", &json!({"a": 1})).unwrap();
        o.record("scalar", &3).unwrap();
        let text = o.to_jsonl(&ExperimentConfig::default(), 42).unwrap();
        let lines: Vec<Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines[0]["record"], "header");
        assert_eq!(lines[0]["timestamp"], 42);
        assert_eq!(lines[1], json!({"a": 1, "record": "point"}));
        assert_eq!(lines[2], json!({"record": "scalar", "value": 3}));
    }

    #[test]
    fn series_file_names() {
        assert_eq!(
            series_path(Path::new("out/run.jsonl"), "q95"),
            PathBuf::from("out/run.q95.tsv")
        );
        let mut s = Series::new("m", "t", "err");
        s.points.push((1.0, 2.5));
        assert_eq!(s.to_tsv(), "t\terr\n1\t2.5\n");
    }
}
