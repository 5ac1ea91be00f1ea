use std::fs;
use std::path::Path;

use serde::Serialize;

use super::ExperimentConfig;
use crate::error::{Error, Result};

/// Identifies what produced a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub software: String,
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
}

impl ReportHeader {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
        }
    }
}

/// Output of one harness command.
///
/// Serialized as JSON with keys in declaration order. Everything except
/// `wall_time_seconds` is a deterministic function of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport<B> {
    pub header: ReportHeader,
    pub body: B,
    pub wall_time_seconds: f64,
}

#[derive(Serialize)]
struct Canonical<'a, B> {
    header: &'a ReportHeader,
    body: &'a B,
}

impl<B: Serialize> RunReport<B> {
    /// The full report as pretty-printed JSON.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }

    /// The report without its timing, for byte-wise comparison of runs.
    pub fn canonical_json(&self) -> Result<String> {
        let view = Canonical {
            header: &self.header,
            body: &self.body,
        };
        serde_json::to_string_pretty(&view).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Mean, spread and range of a set of per-seed scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            n,
            mean,
            std,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_stats() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!((s.n, s.mean, s.std, s.min, s.max), (3, 2.0, 1.0, 1.0, 3.0));
        assert_eq!(Summary::of(&[4.0]).std, 0.0);
    }

    #[test]
    fn canonical_json_drops_timing() {
        let cfg = ExperimentConfig::default();
        let a = RunReport {
            header: ReportHeader::new("x", &cfg),
            body: vec![1.5],
            wall_time_seconds: 1.0,
        };
        let b = RunReport {
            wall_time_seconds: 2.0,
            ..a.clone()
        };
        assert_eq!(a.canonical_json().unwrap(), b.canonical_json().unwrap());
        assert_ne!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(!a.canonical_json().unwrap().contains("wall_time"));
    }
}
