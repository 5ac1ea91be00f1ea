use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{maybe_standardize, seeded_train, ExperimentConfig, ReportHeader, RunReport};
use crate::data::{split_train_test, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, headline_metric_name, MetricsReport};
use crate::model::HeadBank;
use crate::rng;
use crate::training::fit_normal;

/// Name of the extra training row fitted on every domain's training split.
pub const POOLED_DOMAIN: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftCell {
    pub train_domain: String,
    pub test_domain: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftSeed {
    pub seed: u64,
    /// `matrix[i][j]`: headline metric of the model trained on `train_domains[i]`
    /// evaluated on the test split of `domains[j]`.
    pub matrix: Vec<Vec<f64>>,
    /// Every domain's own model beats every other single-domain model on that
    /// domain's test split.
    pub in_domain_advantage: bool,
    pub cells: Vec<ShiftCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftMatrixBody {
    pub metric: String,
    pub domains: Vec<String>,
    pub train_domains: Vec<String>,
    pub seeds: Vec<ShiftSeed>,
    /// Cellwise mean over seeds.
    pub mean: Vec<Vec<f64>>,
    pub in_domain_advantage_seeds: usize,
}

/// Normal training on each domain (and on all of them pooled), scored on
/// every domain's test split.
pub fn run_shift_matrix(cfg: &ExperimentConfig) -> Result<RunReport<ShiftMatrixBody>> {
    cfg.validate()?;
    let start = Instant::now();
    let seeds: Vec<ShiftSeed> = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<_>>()?;

    let domains: Vec<String> = cfg.load_domains(cfg.seeds[0])?.into_iter().map(|(n, _)| n).collect();
    let mut train_domains = domains.clone();
    train_domains.push(POOLED_DOMAIN.to_string());
    let rows = train_domains.len();
    let cols = domains.len();
    let mean = (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| seeds.iter().map(|s| s.matrix[i][j]).sum::<f64>() / seeds.len() as f64)
                .collect()
        })
        .collect();
    let body = ShiftMatrixBody {
        metric: headline_metric_name(cfg.task).to_string(),
        in_domain_advantage_seeds: seeds.iter().filter(|s| s.in_domain_advantage).count(),
        domains,
        train_domains,
        seeds,
        mean,
    };
    Ok(RunReport {
        header: ReportHeader::new("shift-matrix", cfg),
        body,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<ShiftSeed> {
    let domains = cfg.load_domains(seed)?;
    if domains.len() < 2 {
        return Err(Error::config("shift-matrix needs at least two domains"));
    }
    if domains.iter().any(|(n, _)| n == POOLED_DOMAIN) {
        return Err(Error::config(format!(
            "domain name {POOLED_DOMAIN:?} is reserved for the pooled training row"
        )));
    }
    // Same split seed for every domain: identical data splits identically.
    let split_seed = rng::derive_seed(seed, "split");
    let mut trains = Vec::with_capacity(domains.len());
    let mut tests = Vec::with_capacity(domains.len());
    for (name, data) in &domains {
        let (train, test) = split_train_test(data, cfg.train_fraction, split_seed)
            .map_err(|e| Error::data(format!("domain {name}: {e}")))?;
        trains.push(train);
        tests.push(test);
    }
    trains.push(Dataset::concat(&trains.iter().collect::<Vec<_>>())?);

    let tcfg = seeded_train(cfg, seed);
    let models: Vec<(HeadBank, Vec<Dataset>)> = trains
        .par_iter()
        .map(|train| {
            let mut all = vec![train.clone()];
            all.extend(tests.iter().cloned());
            let (mut scaled, _) = maybe_standardize(cfg.standardize, train, all)?;
            let scaled_tests = scaled.split_off(1);
            Ok((fit_normal(&scaled[0], &tcfg)?.final_params, scaled_tests))
        })
        .collect::<Result<_>>()?;

    let names: Vec<&str> = domains.iter().map(|(n, _)| n.as_str()).chain([POOLED_DOMAIN]).collect();
    let mut matrix = Vec::with_capacity(models.len());
    let mut cells = Vec::new();
    for (i, (bank, scaled_tests)) in models.iter().enumerate() {
        let mut row = Vec::with_capacity(scaled_tests.len());
        for (j, test) in scaled_tests.iter().enumerate() {
            let metrics = evaluate(bank, test).map_err(|e| match e {
                Error::UndefinedMetric(m) => Error::UndefinedMetric(format!("test split of {}: {m}", names[j])),
                other => other,
            })?;
            row.push(metrics.headline);
            cells.push(ShiftCell {
                train_domain: names[i].to_string(),
                test_domain: names[j].to_string(),
                metrics,
            });
        }
        matrix.push(row);
    }
    let k = domains.len();
    let in_domain_advantage = (0..k).all(|j| (0..k).filter(|&i| i != j).all(|i| matrix[j][j] > matrix[i][j]));
    Ok(ShiftSeed {
        seed,
        matrix,
        in_domain_advantage,
        cells,
    })
}
