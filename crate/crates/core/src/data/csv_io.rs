use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::model::TaskKind;

/// What to do with an empty or `NA` feature cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Replace with the mean of the observed values in that column.
    #[default]
    ImputeMean,
    Reject,
}

/// Column layout of a dataset CSV.
///
/// Label columns are `y0..y{k-1}` with `k` fixed by the task. The group
/// column, when present, holds string categories. Every other column is a
/// numeric feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub task: TaskKind,
    /// Name of the categorical column. When `None`, a column called `group`
    /// is picked up if it exists.
    #[serde(default)]
    pub group_column: Option<String>,
    #[serde(default)]
    pub missing: MissingPolicy,
}

impl CsvSchema {
    pub fn new(task: TaskKind) -> Self {
        Self {
            task,
            group_column: None,
            missing: MissingPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LoadSummary {
    pub rows: usize,
    pub imputed_cells: usize,
}

const DEFAULT_GROUP_COLUMN: &str = "group";

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN" | "nan" | "null")
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<(Dataset, LoadSummary)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub(crate) fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<(Dataset, LoadSummary)> {
    schema.task.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::data("file has no header row"));
    }

    let find = |name: &str| header.iter().position(|h| h == name);
    let label_idx: Vec<usize> = (0..schema.task.label_columns())
        .map(|j| find(&format!("y{j}")).ok_or_else(|| Error::data(format!("missing declared label column y{j}"))))
        .collect::<Result<_>>()?;
    let group_idx = match &schema.group_column {
        Some(name) => Some(find(name).ok_or_else(|| Error::data(format!("missing declared group column {name}")))?),
        None => find(DEFAULT_GROUP_COLUMN),
    };
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|i| !label_idx.contains(i) && group_idx != Some(*i))
        .collect();
    let feature_names: Vec<String> = feature_idx.iter().map(|&i| header[i].clone()).collect();

    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    let mut rows = 0usize;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let line = r + 2;
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        for &i in &feature_idx {
            let raw = cell(i);
            if is_missing(raw) {
                if schema.missing == MissingPolicy::Reject {
                    return Err(Error::data(format!(
                        "line {line}: missing value in column {}",
                        header[i]
                    )));
                }
                cells.push(None);
            } else {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| Error::data(format!("line {line}: cannot parse {raw:?} in column {}", header[i])))?;
                if !v.is_finite() {
                    return Err(Error::data(format!(
                        "line {line}: non-finite value in column {}",
                        header[i]
                    )));
                }
                cells.push(Some(v));
            }
        }
        for &i in &label_idx {
            let raw = cell(i);
            let v: f64 = raw.parse().map_err(|_| {
                Error::data(format!(
                    "line {line}: cannot parse label {raw:?} in column {}",
                    header[i]
                ))
            })?;
            labels.push(v);
        }
        if let Some(g) = group_idx {
            groups.push(cell(g).to_string());
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::data("file has no data rows"));
    }

    let d = feature_idx.len();
    let mut imputed_cells = 0;
    let mut features = Array2::zeros((rows, d));
    for j in 0..d {
        let observed: Vec<f64> = (0..rows).filter_map(|r| cells[r * d + j]).collect();
        let mean = if observed.is_empty() {
            None
        } else {
            Some(observed.iter().sum::<f64>() / observed.len() as f64)
        };
        for r in 0..rows {
            features[[r, j]] = match (cells[r * d + j], mean) {
                (Some(v), _) => v,
                (None, Some(m)) => {
                    imputed_cells += 1;
                    m
                }
                (None, None) => {
                    return Err(Error::data(format!(
                        "column {} has no observed values",
                        feature_names[j]
                    )));
                }
            };
        }
    }
    if imputed_cells > 0 {
        log::info!("imputed {imputed_cells} missing feature cells with column means");
    }

    let labels = Array2::from_shape_vec((rows, label_idx.len()), labels).expect("row-major label buffer");
    let dataset = Dataset::new(features, labels, schema.task, feature_names, group_idx.map(|_| groups))?;
    Ok((dataset, LoadSummary { rows, imputed_cells }))
}

/// Writes `data` in the layout [`load_csv`] reads. Floats use the shortest
/// representation that parses back to the same value.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(data, file)
}

pub(crate) fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = data.feature_names().to_vec();
    header.extend((0..data.labels().ncols()).map(|j| format!("y{j}")));
    if data.groups().is_some() {
        header.push(DEFAULT_GROUP_COLUMN.to_string());
    }
    w.write_record(&header)?;
    for i in 0..data.n_rows() {
        let mut record: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        record.extend(data.label_row(i).iter().map(|v| v.to_string()));
        if let Some(g) = data.groups() {
            record.push(g[i].clone());
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
