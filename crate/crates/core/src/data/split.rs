use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::rng;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.85;

/// Seeded shuffle of `0..n`, cut after `⌊fraction·n⌋` rows.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::data(format!("need at least 2 rows to split, got {n}")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    // The nudge keeps products like 0.85·20 from landing just under an integer.
    let n_train = ((train_fraction * n as f64) + 1e-9).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::data(format!(
            "a {train_fraction} split of {n} rows leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split"));
    let test = order.split_off(n_train);
    Ok((order, test))
}

/// Returns `(train, test)`; rows keep the shuffled order.
pub fn split_train_test(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.n_rows(), train_fraction, seed)?;
    Ok((data.select_rows(&train), data.select_rows(&test)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    All,
    Value(String),
}

/// A named domain: either every row or the rows carrying one group value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub selector: Selector,
}

impl DomainSpec {
    pub fn all() -> Self {
        Self {
            name: "all".into(),
            selector: Selector::All,
        }
    }

    pub fn group(value: impl Into<String>) -> Self {
        let value = value.into();
        Self {
            name: value.clone(),
            selector: Selector::Value(value),
        }
    }

    /// `"all"` selects everything; any other string is a group value.
    pub fn parse(s: &str) -> Self {
        if s == "all" {
            Self::all()
        } else {
            Self::group(s)
        }
    }
}

/// One dataset per spec. Group values must exist in the group column.
pub fn subgroup_partition(data: &Dataset, specs: &[DomainSpec]) -> Result<Vec<Dataset>> {
    let groups = data
        .groups()
        .ok_or_else(|| Error::data("dataset has no group column"))?;
    specs
        .iter()
        .map(|spec| match &spec.selector {
            Selector::All => Ok(data.clone()),
            Selector::Value(v) => {
                let rows: Vec<usize> = (0..groups.len()).filter(|&i| &groups[i] == v).collect();
                if rows.is_empty() {
                    Err(Error::data(format!("group value {v:?} does not occur in the data")))
                } else {
                    Ok(data.select_rows(&rows))
                }
            }
        })
        .collect()
}

/// Per-feature `(x - μ) / σ` with statistics from the training set only.
///
/// Columns with `σ = 0` on the training set pass through untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant_columns: Vec<usize>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Self {
        let x = train.features();
        let n = x.nrows() as f64;
        let mean: Array1<f64> = x.sum_axis(Axis(0)) / n;
        let mut std = vec![0.0; x.ncols()];
        for (j, col) in x.columns().into_iter().enumerate() {
            std[j] = (col.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
        }
        let constant_columns: Vec<usize> = (0..std.len()).filter(|&j| std[j] == 0.0).collect();
        for &j in &constant_columns {
            log::warn!(
                "feature {} is constant on the training set; left unscaled",
                train.feature_names()[j]
            );
        }
        Self {
            mean: mean.to_vec(),
            std,
            constant_columns,
        }
    }

    fn map(&self, data: &Dataset, f: impl Fn(f64, f64, f64) -> f64) -> Result<Dataset> {
        check_dim(self.mean.len(), data.n_features())?;
        let mut x: Array2<f64> = data.features().to_owned();
        for (j, mut col) in x.columns_mut().into_iter().enumerate() {
            if self.std[j] == 0.0 {
                continue;
            }
            col.mapv_inplace(|v| f(v, self.mean[j], self.std[j]));
        }
        Ok(data.with_features(x))
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.map(data, |v, m, s| (v - m) / s)
    }

    pub fn invert(&self, data: &Dataset) -> Result<Dataset> {
        self.map(data, |v, m, s| v * s + m)
    }
}

/// Fits on `train` and applies the transform to `train` and every dataset in `others`.
pub fn standardize(train: &Dataset, others: &[&Dataset]) -> Result<(Dataset, Vec<Dataset>, Standardizer)> {
    let s = Standardizer::fit(train);
    let train = s.apply(train)?;
    let others = others.iter().map(|d| s.apply(d)).collect::<Result<_>>()?;
    Ok((train, others, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskKind;
    use ndarray::array;
    use std::collections::BTreeSet;

    fn ramp(n: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let y = Array2::from_shape_fn((n, 1), |(i, _)| (i % 2) as f64);
        Dataset::from_arrays(x, y, TaskKind::Binary).unwrap()
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split_indices(9510, 0.85, 0).unwrap();
        assert_eq!((tr.len(), te.len()), (8083, 1427));
        let (tr, te) = split_indices(20, 0.85, 0).unwrap();
        assert_eq!((tr.len(), te.len()), (17, 3));
        assert!(split_indices(1, 0.85, 0).is_err());
        assert!(split_indices(10, 1.0, 0).is_err());
    }

    #[test]
    fn split_is_a_deterministic_partition() {
        let data = ramp(50);
        let (a_tr, a_te) = split_train_test(&data, 0.85, 3).unwrap();
        let (b_tr, b_te) = split_train_test(&data, 0.85, 3).unwrap();
        assert_eq!(a_tr, b_tr);
        assert_eq!(a_te, b_te);
        let train: BTreeSet<u64> = a_tr.features().iter().map(|v| *v as u64).collect();
        let test: BTreeSet<u64> = a_te.features().iter().map(|v| *v as u64).collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len() + test.len(), 50);
    }

    #[test]
    fn subgroups() {
        let x = array![[1.0], [2.0], [3.0], [4.0], [5.0]];
        let y = array![[0.0], [1.0], [0.0], [1.0], [1.0]];
        let groups = ["F", "M", "F", "M", "M"].map(String::from).to_vec();
        let data = Dataset::new(x, y, TaskKind::Binary, vec!["a".into()], Some(groups)).unwrap();
        let parts = subgroup_partition(&data, &[DomainSpec::group("F"), DomainSpec::group("M")]).unwrap();
        assert_eq!(parts[0].n_rows() + parts[1].n_rows(), 5);
        assert_eq!(parts[0].row(1), &[3.0]);
        let all = subgroup_partition(&data, &[DomainSpec::parse("all")]).unwrap();
        assert_eq!(all[0], data);
        assert!(subgroup_partition(&data, &[DomainSpec::group("X")]).is_err());
        assert!(subgroup_partition(&ramp(3), &[DomainSpec::all()]).is_err());
    }

    #[test]
    fn standardization() {
        let x = array![[1.0, 5.0, 0.5], [2.0, 5.0, -1.0], [4.0, 5.0, 2.0]];
        let y = array![[0.0], [1.0], [1.0]];
        let train = Dataset::from_arrays(x, y.clone(), TaskKind::Binary).unwrap();
        let test = Dataset::from_arrays(
            array![[7.0, 1.0, 3.0], [0.0, 2.0, 0.0], [1.0, 1.0, 1.0]],
            y,
            TaskKind::Binary,
        )
        .unwrap();
        let (std_train, others, s) = standardize(&train, &[&test]).unwrap();
        assert_eq!(s.constant_columns, vec![1]);
        for (j, col) in std_train.features().columns().into_iter().enumerate() {
            let m = col.mean().unwrap();
            let sd = col.std(0.0);
            if j == 1 {
                assert_eq!(col.to_vec(), vec![5.0; 3]);
            } else {
                assert!(m.abs() < 1e-10);
                assert!((sd - 1.0).abs() < 1e-12);
            }
        }
        let back = s.invert(&others[0]).unwrap();
        for (a, b) in back.features().iter().zip(test.features().iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
