use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::{ExperimentConfig, ExperimentError, Result};
use crate::markov::io::fmt17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CheckVerdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for CheckVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CheckVerdict::Pass => "PASS",
            CheckVerdict::Fail => "FAIL",
            CheckVerdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: CheckVerdict,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub se: Option<f64>,
}

/// A numeric table, emitted as `<name>.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Table {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.iter().map(|&v| fmt17(v)).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub statistics: Vec<Statistic>,
    pub tables: Vec<Table>,
    /// Experiment-specific result structures.
    pub details: Value,
    pub wall_clock_s: f64,
    pub version: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitFormat {
    Json,
    CsvBundle,
}

impl RunReport {
    pub(crate) fn new(config: ExperimentConfig) -> RunReport {
        RunReport {
            config,
            checks: Vec::new(),
            statistics: Vec::new(),
            tables: Vec::new(),
            details: Value::Null,
            wall_clock_s: 0.0,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub(crate) fn check(&mut self, name: &str, verdict: CheckVerdict, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            verdict,
            detail: detail.into(),
        });
    }

    pub(crate) fn pass_if(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.check(
            name,
            if ok {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            },
            detail,
        );
    }

    pub(crate) fn stat(&mut self, name: &str, value: f64, se: Option<f64>) {
        self.statistics.push(Statistic {
            name: name.into(),
            value,
            se,
        });
    }

    pub(crate) fn detail(&mut self, key: &str, value: impl Serialize) {
        if !self.details.is_object() {
            self.details = Value::Object(Default::default());
        }
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.details
            .as_object_mut()
            .expect("object")
            .insert(key.into(), v);
    }

    /// FAIL if any check failed, else INCONCLUSIVE if any was, else PASS.
    pub fn verdict(&self) -> CheckVerdict {
        let any = |v| self.checks.iter().any(|c| c.verdict == v);
        if any(CheckVerdict::Fail) {
            CheckVerdict::Fail
        } else if any(CheckVerdict::Inconclusive) {
            CheckVerdict::Inconclusive
        } else {
            CheckVerdict::Pass
        }
    }

    /// 0 all PASS, 1 any FAIL, 2 INCONCLUSIVE only.
    pub fn exit_code(&self) -> i32 {
        match self.verdict() {
            CheckVerdict::Pass => 0,
            CheckVerdict::Fail => 1,
            CheckVerdict::Inconclusive => 2,
        }
    }

    fn to_value(&self, with_clock: bool) -> Value {
        let num = |x: f64| -> Value {
            match serde_json::Number::from_f64(x) {
                Some(n) => Value::Number(n),
                None => Value::String(format!("{x}")),
            }
        };
        let stats: Vec<Value> = self
            .statistics
            .iter()
            .map(|s| {
                serde_json::json!({
                    "name": s.name,
                    "value": num(s.value),
                    "se": s.se.map_or(Value::Null, num),
                })
            })
            .collect();
        let mut v = serde_json::json!({
            "experiment": self.config.experiment,
            "verdict": self.verdict(),
            "config": self.config,
            "checks": self.checks,
            "statistics": stats,
            "tables": self.tables,
            "details": self.details,
            "version": self.version,
        });
        if with_clock {
            v["wall_clock_s"] = num(self.wall_clock_s);
        }
        v
    }

    /// The JSON summary with every float at 17 significant digits.
    pub fn to_json(&self) -> String {
        write_json(&self.to_value(true))
    }

    /// The JSON summary without the wall clock, for reproducibility checks.
    pub fn reproducible_json(&self) -> String {
        write_json(&self.to_value(false))
    }
}

fn write_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.push_str(&"  ".repeat(n));
    match v {
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => {
                let _ = write!(out, "{i}");
            }
            (_, Some(u), _) => {
                let _ = write!(out, "{u}");
            }
            (_, _, Some(f)) => out.push_str(&fmt17(f)),
            _ => out.push_str("null"),
        },
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, indent + 1);
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Write `report.json`, plus one CSV per table for [`EmitFormat::CsvBundle`].
pub fn emit(report: &RunReport, dir: &Path, format: EmitFormat) -> Result<Vec<PathBuf>> {
    let io = |e: std::io::Error| ExperimentError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    let json = dir.join("report.json");
    fs::write(&json, report.to_json()).map_err(io)?;
    written.push(json);
    if format == EmitFormat::CsvBundle {
        for t in &report.tables {
            let p = dir.join(format!("{}.csv", t.name));
            fs::write(&p, t.to_csv()).map_err(io)?;
            written.push(p);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_uses_seventeen_digits() {
        let mut r = RunReport::new(ExperimentConfig::new("demo", 1, 10));
        r.stat("x", 0.1, Some(f64::INFINITY));
        let j = r.to_json();
        assert!(j.contains("1.0000000000000001e-1"), "{j}");
        assert!(j.contains("\"inf\""));
        let back: Value = serde_json::from_str(&j).unwrap();
        assert_eq!(back["statistics"][0]["value"].as_f64(), Some(0.1));
    }

    #[test]
    fn verdict_and_exit_codes() {
        let mut r = RunReport::new(ExperimentConfig::new("demo", 1, 10));
        assert_eq!(r.exit_code(), 0);
        r.check("a", CheckVerdict::Inconclusive, "");
        assert_eq!(r.exit_code(), 2);
        r.pass_if("b", false, "");
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn empty_report_writes_only_json() {
        let dir = tempfile::tempdir().unwrap();
        let r = RunReport::new(ExperimentConfig::new("demo", 1, 10));
        let files = emit(&r, dir.path(), EmitFormat::CsvBundle).unwrap();
        assert_eq!(files.len(), 1);
        let mut t = Table::new("decay", &["t", "mean_Z", "se"]);
        t.rows.push(vec![0.0, 1.0, 0.0]);
        assert_eq!(t.to_csv().lines().next(), Some("t,mean_Z,se"));
    }
}
