//! Summary-statistic features over fixed sub-windows of an episode, and the
//! ten-class length-of-stay encoding.
//!
//! For every variable, six statistics are computed on seven windows of the
//! episode's clock time `[0, L]`:
//!
//! | window   | interval            |
//! |----------|---------------------|
//! | full     | `[0, L]`            |
//! | first10  | `[0, 0.10·L]`       |
//! | first25  | `[0, 0.25·L]`       |
//! | first50  | `[0, 0.50·L]`       |
//! | last50   | `[L - 0.50·L, L]`   |
//! | last25   | `[L - 0.25·L, L]`   |
//! | last10   | `[L - 0.10·L, L]`   |
//!
//! Intervals are closed. Output is variable-major, then window, then
//! statistic, so a 17-variable episode yields `17 × 7 × 6 = 714` values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps remaining hours to 0..=9: under a day, one class per day of the first
/// week (day 1 through day 7), days 8 to 14, and beyond two weeks.
/// Boundaries belong to the upper class.
pub fn los_bucketize(los_hours: f64) -> Result<usize> {
    if !(los_hours >= 0.0) || los_hours.is_infinite() {
        return Err(Error::invalid(format!(
            "length of stay must be finite and >= 0, got {los_hours}"
        )));
    }
    Ok(match los_hours {
        h if h < 24.0 => 0,
        h if h < 8.0 * 24.0 => (h / 24.0).floor() as usize,
        h if h < 14.0 * 24.0 => 8,
        _ => 9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeWindow {
    Full,
    First(u8),
    Last(u8),
}

pub const WINDOWS: [TimeWindow; 7] = [
    TimeWindow::Full,
    TimeWindow::First(10),
    TimeWindow::First(25),
    TimeWindow::First(50),
    TimeWindow::Last(50),
    TimeWindow::Last(25),
    TimeWindow::Last(10),
];

impl TimeWindow {
    /// Closed interval covered by the window in an episode of `length` hours.
    pub fn bounds(&self, length: f64) -> (f64, f64) {
        match *self {
            TimeWindow::Full => (0.0, length),
            TimeWindow::First(p) => (0.0, f64::from(p) / 100.0 * length),
            TimeWindow::Last(p) => (length - f64::from(p) / 100.0 * length, length),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TimeWindow::Full => "full".into(),
            TimeWindow::First(p) => format!("first{p}"),
            TimeWindow::Last(p) => format!("last{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Min,
    Max,
    Mean,
    Std,
    Skew,
    Count,
}

pub const STATISTICS: [Statistic; 6] = [
    Statistic::Min,
    Statistic::Max,
    Statistic::Mean,
    Statistic::Std,
    Statistic::Skew,
    Statistic::Count,
];

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Min => "min",
            Statistic::Max => "max",
            Statistic::Mean => "mean",
            Statistic::Std => "std",
            Statistic::Skew => "skew",
            Statistic::Count => "count",
        }
    }
}

/// Sidecar metadata of one episode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub length_hours: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los_hours: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<f64>>,
}

/// Irregularly sampled measurements of `V` variables over one stay.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// `series[v]` holds `(time_hours, value)` pairs with nondecreasing times.
    pub series: Vec<Vec<(f64, f64)>>,
    pub meta: EpisodeMeta,
}

impl Episode {
    pub fn new(series: Vec<Vec<(f64, f64)>>, meta: EpisodeMeta) -> Result<Self> {
        let ep = Self { series, meta };
        ep.validate()?;
        Ok(ep)
    }

    pub fn n_variables(&self) -> usize {
        self.series.len()
    }

    pub fn validate(&self) -> Result<()> {
        let length = self.meta.length_hours;
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::data(format!("episode length must be positive, got {length}")));
        }
        for (v, s) in self.series.iter().enumerate() {
            if s.iter().any(|&(t, x)| !(t >= 0.0) || !t.is_finite() || !x.is_finite()) {
                return Err(Error::data(format!(
                    "variable {v} has a negative or non-finite measurement"
                )));
            }
            if s.windows(2).any(|w| w[1].0 < w[0].0) {
                return Err(Error::data(format!("variable {v} has decreasing measurement times")));
            }
        }
        Ok(())
    }

    /// Reads `variable,time_hours,value` rows. Variables are matched by name
    /// against `variables`, which fixes their output order.
    pub fn read_csv(path: impl AsRef<Path>, variables: &[String], meta: EpisodeMeta) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::data(format!("{}: missing column {name}", path.display())))
        };
        let (vi, ti, xi) = (col("variable")?, col("time_hours")?, col("value")?);
        let mut series = vec![Vec::new(); variables.len()];
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let name = rec.get(vi).unwrap_or("").trim();
            let v = variables
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::data(format!("{}:{}: unknown variable {name:?}", path.display(), r + 2)))?;
            let parse = |i: usize| -> Result<f64> {
                let raw = rec.get(i).unwrap_or("").trim();
                raw.parse()
                    .map_err(|_| Error::data(format!("{}:{}: cannot parse {raw:?}", path.display(), r + 2)))
            };
            series[v].push((parse(ti)?, parse(xi)?));
        }
        for s in &mut series {
            s.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        Self::new(series, meta)
    }

    /// Variable names appearing in an episode file, in first-seen order.
    pub fn variable_names(path: impl AsRef<Path>) -> Result<Vec<String>> {
        let mut rdr = csv::Reader::from_path(path.as_ref())?;
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let vi = header
            .iter()
            .position(|h| h == "variable")
            .ok_or_else(|| Error::data("missing column variable"))?;
        let mut names: Vec<String> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let name = rec.get(vi).unwrap_or("").trim().to_string();
            if !names.contains(&name) {
                names.push(name);
            }
        }
        Ok(names)
    }
}

impl EpisodeMeta {
    pub fn read_toml(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }
}

/// Column names matching [`featurize_timeseries`] output.
pub fn feature_names(variables: &[String]) -> Vec<String> {
    let mut names = Vec::with_capacity(variables.len() * WINDOWS.len() * STATISTICS.len());
    for v in variables {
        for w in WINDOWS {
            for s in STATISTICS {
                names.push(format!("{v}_{}_{}", w.name(), s.name()));
            }
        }
    }
    names
}

fn window_stats(values: &[f64], fill: f64, out: &mut Vec<f64>) {
    let n = values.len();
    if n == 0 {
        out.extend([fill, fill, fill, fill, fill, 0.0]);
        return;
    }
    let nf = n as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    let skew = if n < 3 || m2 == 0.0 { 0.0 } else { m3 / m2.powf(1.5) };
    out.extend([min, max, mean, m2.sqrt(), skew, nf]);
}

/// `V × 7 × 6` summary features. Empty windows produce `fill` for the five
/// value statistics and 0 for the count.
pub fn featurize_timeseries(episode: &Episode, fill: f64) -> Result<Vec<f64>> {
    episode.validate()?;
    let length = episode.meta.length_hours;
    let mut out = Vec::with_capacity(episode.n_variables() * WINDOWS.len() * STATISTICS.len());
    let mut values = Vec::new();
    for series in &episode.series {
        for window in WINDOWS {
            let (lo, hi) = window.bounds(length);
            let start = series.partition_point(|&(t, _)| t < lo);
            let end = series.partition_point(|&(t, _)| t <= hi);
            values.clear();
            values.extend(series[start..end.max(start)].iter().map(|&(_, v)| v));
            window_stats(&values, fill, &mut out);
        }
    }
    Ok(out)
}
