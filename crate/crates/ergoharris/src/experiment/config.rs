use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use super::{ExperimentError, Result};

/// An experiment description in flat `key = value` form.
///
/// Top-level keys are `experiment`, `seed`, `samples` and `out`; the
/// `[params]` and `[tolerances]` sections hold the rest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub samples: usize,
    pub out_dir: Option<PathBuf>,
    pub params: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>, seed: u64, samples: usize) -> ExperimentConfig {
        ExperimentConfig {
            experiment: experiment.into(),
            seed,
            samples,
            out_dir: None,
            params: BTreeMap::new(),
            tolerances: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> ExperimentConfig {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut section = String::new();
        let mut top = BTreeMap::new();
        let mut params = BTreeMap::new();
        let mut tolerances = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                if !matches!(section.as_str(), "params" | "tolerances") {
                    return Err(invalid(
                        &section,
                        format!("unknown section on line {}", i + 1),
                    ));
                }
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(line, format!("line {} is not key = value", i + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            let target = match section.as_str() {
                "" => &mut top,
                "params" => &mut params,
                _ => {
                    let x = v
                        .parse::<f64>()
                        .map_err(|_| invalid(&k, format!("tolerance {v:?} is not a number")))?;
                    tolerances.insert(k, x);
                    continue;
                }
            };
            if target.insert(k.clone(), v).is_some() {
                return Err(invalid(&k, "duplicate key".into()));
            }
        }
        let experiment = top
            .remove("experiment")
            .ok_or_else(|| invalid("experiment", "missing".into()))?;
        let seed = match top.remove("seed") {
            Some(s) => s
                .parse::<u64>()
                .map_err(|_| invalid("seed", format!("{s:?} is not a 64-bit unsigned value")))?,
            None => return Err(invalid("seed", "missing".into())),
        };
        let samples = match top.remove("samples") {
            Some(s) => s
                .parse::<usize>()
                .map_err(|_| invalid("samples", format!("{s:?} is not a count")))?,
            None => 1000,
        };
        let out_dir = top.remove("out").map(PathBuf::from);
        if let Some(k) = top.keys().next() {
            return Err(invalid(k, "unknown top-level key".into()));
        }
        Ok(ExperimentConfig {
            experiment,
            seed,
            samples,
            out_dir,
            params,
            tolerances,
        })
    }

    pub fn emit(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "samples = {}", self.samples);
        if let Some(out) = &self.out_dir {
            let _ = writeln!(s, "out = {}", out.display());
        }
        if !self.params.is_empty() {
            s.push_str("\n[params]\n");
            for (k, v) in &self.params {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        if !self.tolerances.is_empty() {
            s.push_str("\n[tolerances]\n");
            for (k, v) in &self.tolerances {
                let _ = writeln!(s, "{k} = {v:?}");
            }
        }
        s
    }

    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}

pub(crate) fn invalid(key: &str, msg: String) -> ExperimentError {
    ExperimentError::InvalidConfig {
        key: key.to_string(),
        msg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_round_trip() {
        let text = "# demo\nexperiment = binding\nseed = 18446744073709551615\nsamples = 20\nout = res\n\n[params]\nsystem = linear\nlambda = 9 # strong\n\n[tolerances]\nsigmas = 3.5\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.seed, u64::MAX);
        assert_eq!(c.params["lambda"], "9");
        assert_eq!(c.tolerance("sigmas", 3.0), 3.5);
        assert_eq!(ExperimentConfig::parse(&c.emit()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = |t: &str| ExperimentConfig::parse(t).unwrap_err();
        assert!(
            matches!(bad("seed = 1"), ExperimentError::InvalidConfig { key, .. } if key == "experiment")
        );
        assert!(
            matches!(bad("experiment = x\nseed = -1"), ExperimentError::InvalidConfig { key, .. } if key == "seed")
        );
        assert!(
            matches!(bad("experiment = x\nseed = 1\nfoo = 2"), ExperimentError::InvalidConfig { key, .. } if key == "foo")
        );
        assert!(matches!(
            bad("experiment = x\nseed = 1\n[other]"),
            ExperimentError::InvalidConfig { .. }
        ));
    }
}
