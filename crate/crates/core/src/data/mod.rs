//! Datasets and everything that produces them: CSV ingestion, splitting,
//! subgroup selection, standardization, time-series featurization and the
//! synthetic shifted-domain generator.

mod csv_io;
mod features;
mod split;
mod synth;

pub use csv_io::{load_csv, save_csv, CsvSchema, LoadSummary, MissingPolicy};
pub use features::{
    feature_names as timeseries_feature_names, featurize_timeseries, los_bucketize, Episode, EpisodeMeta, Statistic,
    TimeWindow, STATISTICS, WINDOWS,
};
pub use split::{
    split_indices, split_train_test, standardize, subgroup_partition, DomainSpec, Selector, Standardizer,
    DEFAULT_TRAIN_FRACTION,
};
pub use synth::{synth_shifted_domains, SynthConfig, SynthDomains};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};
use crate::model::TaskKind;

/// Feature matrix, label matrix and task of one domain.
///
/// Labels are stored as an `n × k` matrix where `k` is
/// [`TaskKind::label_columns`]: a single 0/1 column for binary tasks, a single
/// class-index column for multi-class tasks, and one 0/1 column per outcome for
/// multi-label tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Array2<f64>,
    task: TaskKind,
    feature_names: Vec<String>,
    groups: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Array2<f64>,
        task: TaskKind,
        feature_names: Vec<String>,
        groups: Option<Vec<String>>,
    ) -> Result<Self> {
        task.validate()?;
        let n = features.nrows();
        if n == 0 {
            return Err(Error::data("dataset has no rows"));
        }
        check_dim(n, labels.nrows())?;
        check_dim(task.label_columns(), labels.ncols())?;
        check_dim(features.ncols(), feature_names.len())?;
        if let Some(g) = &groups {
            check_dim(n, g.len())?;
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("feature matrix contains NaN or infinite values"));
        }
        if let Some(bad) = labels.iter().find(|&&v| !task.is_valid_label(v)) {
            return Err(Error::data(format!("label {bad} is not valid for a {task} task")));
        }
        // Row slices are handed out as `&[f64]`, which needs standard layout.
        let features = features.as_standard_layout().into_owned();
        let labels = labels.as_standard_layout().into_owned();
        Ok(Self {
            features,
            labels,
            task,
            feature_names,
            groups,
        })
    }

    /// Dataset with generated feature names `x0..x{d-1}` and no group column.
    pub fn from_arrays(features: Array2<f64>, labels: Array2<f64>, task: TaskKind) -> Result<Self> {
        let names = default_feature_names(features.ncols());
        Self::new(features, labels, task, names, None)
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> ArrayView2<'_, f64> {
        self.labels.view()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.features.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn label_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.labels.row(i)
    }

    /// 0/1 targets of head `head` for every row.
    pub fn head_targets(&self, head: usize) -> Vec<f64> {
        self.labels
            .rows()
            .into_iter()
            .map(|r| self.task.head_target(r.as_slice().expect("standard layout"), head))
            .collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: self.labels.select(Axis(0), indices),
            task: self.task,
            feature_names: self.feature_names.clone(),
            groups: self
                .groups
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i].clone()).collect()),
        }
    }

    /// Stacks datasets that share a task and feature space.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        for p in parts {
            if p.task != first.task {
                return Err(Error::invalid("cannot concatenate datasets of different tasks"));
            }
            check_dim(first.n_features(), p.n_features())?;
        }
        let features = ndarray::concatenate(Axis(0), &parts.iter().map(|p| p.features.view()).collect::<Vec<_>>())
            .map_err(|e| Error::invalid(e.to_string()))?;
        let labels = ndarray::concatenate(Axis(0), &parts.iter().map(|p| p.labels.view()).collect::<Vec<_>>())
            .map_err(|e| Error::invalid(e.to_string()))?;
        let groups = if parts.iter().all(|p| p.groups.is_some()) {
            Some(parts.iter().flat_map(|p| p.groups.clone().unwrap()).collect())
        } else {
            None
        };
        Ok(Dataset {
            features,
            labels,
            task: first.task,
            feature_names: first.feature_names.clone(),
            groups,
        })
    }

    pub(crate) fn with_features(&self, features: Array2<f64>) -> Dataset {
        Dataset {
            features,
            ..self.clone()
        }
    }
}

pub(crate) fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_bad_datasets() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(Dataset::from_arrays(x.clone(), array![[0.0], [2.0]], TaskKind::Binary).is_err());
        assert!(Dataset::from_arrays(x.clone(), array![[0.0], [2.0]], TaskKind::MultiClass(3)).is_ok());
        assert!(Dataset::from_arrays(x.clone(), array![[0.0]], TaskKind::Binary).is_err());
        assert!(Dataset::from_arrays(array![[f64::NAN, 1.0]], array![[0.0]], TaskKind::Binary).is_err());
        assert!(Dataset::from_arrays(Array2::zeros((0, 2)), Array2::zeros((0, 1)), TaskKind::Binary).is_err());
        assert!(Dataset::from_arrays(x, array![[0.0], [1.0]], TaskKind::MultiLabel(2)).is_err());
    }

    #[test]
    fn head_targets_follow_task() {
        let x = array![[1.0], [2.0], [3.0]];
        let ds = Dataset::from_arrays(x, array![[0.0], [2.0], [1.0]], TaskKind::MultiClass(3)).unwrap();
        assert_eq!(ds.head_targets(2), vec![0.0, 1.0, 0.0]);
        assert_eq!(ds.head_targets(0), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn select_and_concat() {
        let x = array![[1.0], [2.0], [3.0]];
        let ds = Dataset::from_arrays(x, array![[0.0], [1.0], [1.0]], TaskKind::Binary).unwrap();
        let sub = ds.select_rows(&[2, 0]);
        assert_eq!(sub.row(0), &[3.0]);
        assert_eq!(sub.row(1), &[1.0]);
        let both = Dataset::concat(&[&ds, &sub]).unwrap();
        assert_eq!(both.n_rows(), 5);
        assert_eq!(both.row(3), &[3.0]);
    }
}
