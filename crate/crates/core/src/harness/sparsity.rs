use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{maybe_standardize, seeded_train, ExperimentConfig, ReportHeader, RunReport, Summary};
use crate::adaptation::{cosine_similarity, fit_adv_source};
use crate::data::split_train_test;
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::model::{ModelParams, TaskKind};
use crate::rng;
use crate::training::{fit_l1, fit_normal, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    pub model: String,
    /// Feature weights followed by the bias.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsitySeed {
    pub seed: u64,
    pub cos_adv_l1: f64,
    pub cos_adv_nt: f64,
    pub cos_l1_nt: f64,
    /// θ_adv against θ_L1 with its feature coordinates randomly permuted
    /// (bias left in place): the chance level for `cos_adv_l1`.
    pub cos_adv_l1_shuffled: f64,
    /// Test AUROC of the adversarial, L1 and normal models.
    pub test_adv: f64,
    pub test_l1: f64,
    pub test_nt: f64,
    /// Exactly three vectors: `adv`, `l1`, `nt`.
    pub weights: Vec<WeightVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityBody {
    pub domain: String,
    /// Names of the coordinates of every weight vector, bias last.
    pub coordinates: Vec<String>,
    pub alpha: f64,
    pub l1_weight: f64,
    pub seeds: Vec<SparsitySeed>,
    pub cos_adv_l1: Summary,
    pub cos_adv_l1_shuffled: Summary,
    /// Seeds where `cos_adv_l1 > cos_adv_l1_shuffled`.
    pub seeds_above_shuffled: usize,
}

/// Compares adversarially trained, L1-regularized and plain weights on the
/// source domain.
pub fn run_sparsity_comparison(cfg: &ExperimentConfig) -> Result<RunReport<SparsityBody>> {
    cfg.validate()?;
    if cfg.task != TaskKind::Binary {
        return Err(Error::config("the sparsity comparison needs a binary task"));
    }
    cfg.adv.validate()?;
    let start = Instant::now();
    let seeds: Vec<SparsitySeed> = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<_>>()?;

    let (domain, data) = source_domain(cfg, cfg.seeds[0])?;
    let mut coordinates = data.feature_names().to_vec();
    coordinates.push("bias".to_string());
    let adv_l1: Vec<f64> = seeds.iter().map(|s| s.cos_adv_l1).collect();
    let shuffled: Vec<f64> = seeds.iter().map(|s| s.cos_adv_l1_shuffled).collect();
    let body = SparsityBody {
        domain,
        coordinates,
        alpha: cfg.adv.alpha,
        l1_weight: cfg.l1_weight,
        cos_adv_l1: Summary::of(&adv_l1),
        cos_adv_l1_shuffled: Summary::of(&shuffled),
        seeds_above_shuffled: seeds.iter().filter(|s| s.cos_adv_l1 > s.cos_adv_l1_shuffled).count(),
        seeds,
    };
    Ok(RunReport {
        header: ReportHeader::new("sparsity", cfg),
        body,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

fn source_domain(cfg: &ExperimentConfig, seed: u64) -> Result<(String, crate::data::Dataset)> {
    let domains = cfg.load_domains(seed)?;
    match &cfg.source {
        Some(name) => domains
            .into_iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::config(format!("unknown domain {name:?}"))),
        None => domains.into_iter().next().ok_or_else(|| Error::config("no domains")),
    }
}

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SparsitySeed> {
    let (_, data) = source_domain(cfg, seed)?;
    let (train, test) = split_train_test(&data, cfg.train_fraction, rng::derive_seed(seed, "split"))?;
    let (scaled, _) = maybe_standardize(cfg.standardize, &train, vec![train.clone(), test])?;
    let (train, test) = (&scaled[0], &scaled[1]);

    let tcfg = seeded_train(cfg, seed);
    let l1_cfg = TrainConfig {
        l1_weight: cfg.l1_weight,
        ..tcfg
    };
    let adv = fit_adv_source(train, &tcfg, &cfg.adv)?.final_params;
    let l1 = fit_l1(train, &l1_cfg)?.final_params;
    let nt = fit_normal(train, &tcfg)?.final_params;
    let (adv, l1, nt) = (&adv.heads()[0], &l1.heads()[0], &nt.heads()[0]);

    let mut perm: Vec<usize> = (0..l1.dim()).collect();
    perm.shuffle(&mut rng::stream(seed, "sparsity/shuffle"));
    let mut shuffled: Vec<f64> = perm.iter().map(|&j| l1.feature_weights()[j]).collect();
    shuffled.push(l1.bias());
    let shuffled = ModelParams::from_vec(shuffled)?;

    let auc = |p: &ModelParams| -> Result<f64> {
        let bank = crate::model::HeadBank::new(TaskKind::Binary, vec![p.clone()])?;
        Ok(evaluate(&bank, test)?.headline)
    };
    let weights = [("adv", adv), ("l1", l1), ("nt", nt)]
        .into_iter()
        .map(|(model, p)| WeightVector {
            model: model.to_string(),
            values: p.as_slice().to_vec(),
        })
        .collect();
    Ok(SparsitySeed {
        seed,
        cos_adv_l1: cosine_similarity(adv, l1)?,
        cos_adv_nt: cosine_similarity(adv, nt)?,
        cos_l1_nt: cosine_similarity(l1, nt)?,
        cos_adv_l1_shuffled: cosine_similarity(adv, &shuffled)?,
        test_adv: auc(adv)?,
        test_l1: auc(l1)?,
        test_nt: auc(nt)?,
        weights,
    })
}
