use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptation::{DEFAULT_ALPHAS, DEFAULT_LAMBDAS};
use crate::adversarial::AdvConfig;
use crate::data::{
    load_csv, subgroup_partition, synth_shifted_domains, CsvSchema, Dataset, DomainSpec, MissingPolicy, SynthConfig,
    DEFAULT_TRAIN_FRACTION,
};
use crate::error::{Error, Result};
use crate::model::TaskKind;
use crate::rng;

/// A CSV file registered as one domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainFile {
    pub name: String,
    pub path: PathBuf,
}

/// Where domains come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Two generated domains named `source` and `target`. The generator seed
    /// is derived from each run seed.
    Synth(SynthConfig),
    /// One CSV with a group column; every entry of `domains` names a group
    /// value, or `all`.
    Csv {
        path: PathBuf,
        #[serde(default)]
        group_column: Option<String>,
        #[serde(default)]
        missing: MissingPolicy,
        domains: Vec<String>,
    },
    /// One CSV per domain.
    Files {
        files: Vec<DomainFile>,
        #[serde(default)]
        missing: MissingPolicy,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth(SynthConfig::default())
    }
}

/// Everything an experiment run needs. Loaded from TOML; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub data: DataSource,
    /// Source domain name for the transfer experiments; defaults to the first domain.
    pub source: Option<String>,
    /// Target domain name; defaults to the second domain.
    pub target: Option<String>,
    pub train: TrainConfig,
    /// Attack radius and steps. `alpha` is used where no sweep applies (the
    /// sparsity comparison); the transfer experiments sweep `alphas`.
    pub adv: AdvConfig,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
    /// Share of the target training split held out for picking `α` and `λ`.
    pub validation_fraction: f64,
    /// Keep only this many target training rows (small-target studies). The
    /// test split is unaffected.
    pub target_train_limit: Option<usize>,
    /// Standardize features with statistics of the training rows.
    pub standardize: bool,
    /// Penalty weight of the L1 model in the sparsity comparison.
    pub l1_weight: f64,
    /// Where the report goes. Not echoed into reports, so moving the output
    /// does not change the report body.
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
    /// Directory to write the final per-regime models of the five-way run.
    #[serde(skip_serializing)]
    pub models_dir: Option<PathBuf>,
}

pub use crate::training::TrainConfig;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::Binary,
            data: DataSource::default(),
            source: None,
            target: None,
            train: TrainConfig::default(),
            adv: AdvConfig::default(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            seeds: vec![0],
            train_fraction: DEFAULT_TRAIN_FRACTION,
            validation_fraction: 0.15,
            target_train_limit: None,
            standardize: false,
            l1_weight: 1.0,
            output: None,
            models_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config; relative data paths resolve against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.data {
            DataSource::Synth(_) => {}
            DataSource::Csv { path, .. } => fix(path),
            DataSource::Files { files, .. } => files.iter_mut().for_each(|f| fix(&mut f.path)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate().map_err(|e| Error::config(e.to_string()))?;
        self.train.validate()?;
        // alpha itself is only checked where it is used
        AdvConfig { alpha: 1.0, ..self.adv }.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train_fraction must lie in (0, 1)"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config("validation_fraction must lie in (0, 1)"));
        }
        if let Some(bad) = self.alphas.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::config(format!("alpha {bad} is outside (0, 1]")));
        }
        if let Some(bad) = self.lambdas.iter().find(|&&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::config(format!("lambda {bad} must be finite and >= 0")));
        }
        if !(self.l1_weight >= 0.0 && self.l1_weight.is_finite()) {
            return Err(Error::config("l1_weight must be finite and >= 0"));
        }
        if self.target_train_limit == Some(0) {
            return Err(Error::config("target_train_limit must be positive"));
        }
        match &self.data {
            DataSource::Synth(_) if self.task != TaskKind::Binary => {
                Err(Error::config("the synthetic generator only produces binary tasks"))
            }
            DataSource::Csv { domains, .. } if domains.is_empty() => Err(Error::config("no domains listed")),
            DataSource::Files { files, .. } if files.is_empty() => Err(Error::config("no domain files listed")),
            DataSource::Csv { path, .. } if !path.exists() => {
                Err(Error::config(format!("{} does not exist", path.display())))
            }
            DataSource::Files { files, .. } => match files.iter().find(|f| !f.path.exists()) {
                Some(f) => Err(Error::config(format!("{} does not exist", f.path.display()))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Named domains for one run seed, in configuration order.
    pub fn load_domains(&self, seed: u64) -> Result<Vec<(String, Dataset)>> {
        match &self.data {
            DataSource::Synth(synth) => {
                let synth = SynthConfig {
                    seed: rng::derive_seed(seed, "synth"),
                    ..synth.clone()
                };
                let domains = synth_shifted_domains(&synth)?;
                Ok(vec![
                    ("source".to_string(), domains.source),
                    ("target".to_string(), domains.target),
                ])
            }
            DataSource::Csv {
                path,
                group_column,
                missing,
                domains,
            } => {
                let schema = CsvSchema {
                    task: self.task,
                    group_column: group_column.clone(),
                    missing: *missing,
                };
                let (data, _) = load_csv(path, &schema)?;
                let specs: Vec<DomainSpec> = domains.iter().map(|d| DomainSpec::parse(d)).collect();
                let parts = subgroup_partition(&data, &specs)?;
                Ok(specs.into_iter().map(|s| s.name).zip(parts).collect())
            }
            DataSource::Files { files, missing } => files
                .iter()
                .map(|f| {
                    let schema = CsvSchema {
                        task: self.task,
                        group_column: None,
                        missing: *missing,
                    };
                    Ok((f.name.clone(), load_csv(&f.path, &schema)?.0))
                })
                .collect(),
        }
    }

    /// `(source, target)` picked by name, defaulting to the first two domains.
    pub(crate) fn pick_pair(&self, domains: Vec<(String, Dataset)>) -> Result<((String, Dataset), (String, Dataset))> {
        let find = |name: &Option<String>, fallback: usize| -> Result<(String, Dataset)> {
            match name {
                Some(n) => domains
                    .iter()
                    .find(|(dn, _)| dn == n)
                    .cloned()
                    .ok_or_else(|| Error::config(format!("unknown domain {n:?}"))),
                None => domains
                    .get(fallback)
                    .cloned()
                    .ok_or_else(|| Error::config("need at least two domains")),
            }
        };
        Ok((find(&self.source, 0)?, find(&self.target, 1)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_small_config() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            seeds = [1, 2]
            alphas = [0.1, 0.5]
            lambdas = [0.0, 0.01]
            target_train_limit = 100

            [data]
            kind = "synth"
            d = 10
            n_source = 2000
            shift = 1.0

            [train]
            epochs = 10

            [adv]
            epsilon = 0.05
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.train.epochs, 10);
        assert_eq!(cfg.train.learning_rate, 0.01);
        assert_eq!(cfg.adv.steps, 20);
        assert_eq!(cfg.adv.epsilon, 0.05);
        match cfg.data {
            DataSource::Synth(s) => assert_eq!((s.n_source, s.shift, s.n_target), (2000, 1.0, 1000)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn multiclass_task_syntax() {
        let cfg: ExperimentConfig = toml::from_str("task = { multiclass = 10 }").unwrap();
        assert_eq!(cfg.task, TaskKind::MultiClass(10));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "seeds = []",
            "alphas = [0.0]",
            "lambdas = [-1.0]",
            "unknown_key = 3",
            "[train]\nepochs = 0",
            "[adv]\nsteps = 0",
            "task = { multilabel = 3 }",
            "[data]\nkind = \"csv\"\npath = \"/nonexistent.csv\"\ndomains = [\"F\"]",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn synth_domains_follow_the_run_seed() {
        let cfg = ExperimentConfig {
            data: DataSource::Synth(SynthConfig {
                d: 3,
                n_source: 20,
                n_target: 10,
                ..SynthConfig::default()
            }),
            ..ExperimentConfig::default()
        };
        let a = cfg.load_domains(1).unwrap();
        assert_eq!(a, cfg.load_domains(1).unwrap());
        assert_ne!(a, cfg.load_domains(2).unwrap());
        assert_eq!(a[0].0, "source");
    }
}
