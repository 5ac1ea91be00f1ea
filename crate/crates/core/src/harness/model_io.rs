//! Versioned TOML model files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardizer};
use crate::error::{check_dim, Error, Result};
use crate::model::{HeadBank, ModelParams, TaskKind};

pub const MODEL_FORMAT: &str = "advda-model";
pub const MODEL_VERSION: u32 = 1;

/// A trained bank plus what is needed to apply it to raw feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub bank: HeadBank,
    pub feature_names: Vec<String>,
    /// Feature scaling fitted at training time, if any.
    pub standardizer: Option<Standardizer>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    task: TaskKind,
    feature_names: Vec<String>,
    /// One weight vector per head, bias last.
    heads: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    standardizer: Option<Standardizer>,
}

impl SavedModel {
    pub fn new(bank: HeadBank, feature_names: Vec<String>, standardizer: Option<Standardizer>) -> Result<Self> {
        check_dim(bank.dim(), feature_names.len())?;
        if let Some(s) = &standardizer {
            check_dim(bank.dim(), s.mean.len())?;
            check_dim(bank.dim(), s.std.len())?;
        }
        Ok(Self {
            bank,
            feature_names,
            standardizer,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            task: self.bank.task(),
            feature_names: self.feature_names.clone(),
            heads: self.bank.heads().iter().map(|h| h.as_slice().to_vec()).collect(),
            standardizer: self.standardizer.clone(),
        };
        toml::to_string(&file).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::data(format!("malformed model file: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::data(format!("not a model file (format {:?})", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::data(format!("unsupported model version {}", file.version)));
        }
        let heads = file
            .heads
            .into_iter()
            .map(ModelParams::from_vec)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::data(format!("bad head: {e}")))?;
        let bank = HeadBank::new(file.task, heads).map_err(|e| Error::data(format!("bad model: {e}")))?;
        Self::new(bank, file.feature_names, file.standardizer).map_err(|e| Error::data(format!("bad model: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// `data` in the feature space the bank was trained in. Columns must match
    /// the saved feature names exactly.
    pub fn prepare(&self, data: &Dataset) -> Result<Dataset> {
        if data.feature_names() != self.feature_names.as_slice() {
            return Err(Error::data("dataset columns do not match the model's feature names"));
        }
        match &self.standardizer {
            Some(s) => s.apply(data),
            None => Ok(data.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank(task: TaskKind, heads: &[&[f64]]) -> HeadBank {
        HeadBank::new(
            task,
            heads
                .iter()
                .map(|h| ModelParams::from_vec(h.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        for b in [
            bank(TaskKind::Binary, &[&[0.1, -2.5e-17, 3.0]]),
            bank(TaskKind::MultiClass(3), &[&[1.0, 0.0], &[0.1, 0.2], &[-1.0 / 3.0, 7.0]]),
            bank(TaskKind::MultiLabel(2), &[&[1.0, 2.0], &[3.0, 4.0]]),
        ] {
            let names = (0..b.dim()).map(|j| format!("f{j}")).collect();
            let m = SavedModel::new(b, names, None).unwrap();
            let text = m.to_toml().unwrap();
            assert!(text.contains("format = \"advda-model\""));
            assert_eq!(SavedModel::from_toml(&text).unwrap(), m);
        }
    }

    #[test]
    fn keeps_the_standardizer() {
        let s = Standardizer {
            mean: vec![1.0],
            std: vec![2.0],
            constant_columns: vec![],
        };
        let m = SavedModel::new(bank(TaskKind::Binary, &[&[1.0, 0.5]]), vec!["a".into()], Some(s)).unwrap();
        assert_eq!(SavedModel::from_toml(&m.to_toml().unwrap()).unwrap(), m);
    }

    #[test]
    fn rejects_foreign_or_broken_files() {
        let good = SavedModel::new(bank(TaskKind::Binary, &[&[1.0, 0.5]]), vec!["a".into()], None)
            .unwrap()
            .to_toml()
            .unwrap();
        for text in [
            good.replace("advda-model", "other"),
            good.replace("version = 1", "version = 9"),
            good.replace("feature_names = [\"a\"]", "feature_names = [\"a\", \"b\"]"),
            "not toml at all [".to_string(),
        ] {
            assert!(matches!(SavedModel::from_toml(&text), Err(Error::Data(_))), "{text}");
        }
    }
}
