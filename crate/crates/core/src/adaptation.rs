//! Training regimes that move knowledge from a source domain to a target
//! domain through the source parameters alone.
//!
//! * [`fit_adv_source`] trains on the source with an extra `α`-weighted loss
//!   on adversarial copies of each batch.
//! * [`fit_da`] trains on the target with `λ‖θ_T - θ_S‖²` tying each head to
//!   its source counterpart.
//! * [`fit_adv_da`] combines both on the target.
//!
//! Source rows never enter target training: only the frozen [`HeadBank`]
//! crosses over.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversarial::AdvConfig;
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::model::{grad_theta, nll_loss, HeadBank, ModelParams};
use crate::training::{check_trainable, run, FitReport, Objective, TrainConfig};

/// The five settings compared in the domain-adaptation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Normal training on the source, evaluated on the target.
    #[serde(rename = "NT_source")]
    NtSource,
    /// Normal training on the target only.
    #[serde(rename = "NT_target")]
    NtTarget,
    /// Normally trained source, parameter transfer on the target.
    #[serde(rename = "DA_NT_NT")]
    DaNtNt,
    /// Adversarially trained source, parameter transfer on the target.
    #[serde(rename = "DA_AT_NT")]
    DaAtNt,
    /// Adversarially trained source, adversarial parameter transfer on the target.
    #[serde(rename = "DA_AT_AT")]
    DaAtAt,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::NtSource,
        Regime::NtTarget,
        Regime::DaNtNt,
        Regime::DaAtNt,
        Regime::DaAtAt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Regime::NtSource => "NT_source",
            Regime::NtTarget => "NT_target",
            Regime::DaNtNt => "DA_NT_NT",
            Regime::DaAtNt => "DA_AT_NT",
            Regime::DaAtAt => "DA_AT_AT",
        }
    }

    pub fn adversarial_source(&self) -> bool {
        matches!(self, Regime::DaAtNt | Regime::DaAtAt)
    }

    pub fn adversarial_target(&self) -> bool {
        matches!(self, Regime::DaAtAt)
    }

    pub fn is_transfer(&self) -> bool {
        matches!(self, Regime::DaNtNt | Regime::DaAtNt | Regime::DaAtAt)
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where target training starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    #[default]
    Source,
    Zeros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaConfig {
    pub lambda: f64,
    pub source_params: HeadBank,
    pub init: WarmStart,
}

impl DaConfig {
    pub fn new(lambda: f64, source_params: HeadBank) -> Self {
        Self {
            lambda,
            source_params,
            init: WarmStart::Source,
        }
    }

    pub fn with_init(self, init: WarmStart) -> Self {
        Self { init, ..self }
    }

    fn validate_for(&self, target: &Dataset) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.source_params.task() != target.task() {
            return Err(Error::invalid(format!(
                "source model is for a {} task, target data is {}",
                self.source_params.task(),
                target.task()
            )));
        }
        check_dim(target.n_features(), self.source_params.dim())
    }

    fn initial_bank(&self, target: &Dataset) -> Result<HeadBank> {
        match self.init {
            WarmStart::Source => Ok(self.source_params.clone()),
            WarmStart::Zeros => HeadBank::zeros(target.task(), target.n_features()),
        }
    }
}

/// Source training with the loss `l(θ, x, y) + α·l(θ, x_adv, y)`; adversarial
/// rows are regenerated against the current iterate for every batch.
pub fn fit_adv_source(source: &Dataset, tcfg: &TrainConfig, acfg: &AdvConfig) -> Result<FitReport> {
    check_trainable(source, tcfg)?;
    acfg.validate()?;
    let init = HeadBank::zeros(source.task(), source.n_features())?;
    run(
        source,
        tcfg,
        init,
        Objective {
            adversarial: Some(acfg),
            l2_weight: tcfg.l2_weight,
            ..Objective::default()
        },
    )
}

/// Target training with the parameter-discrepancy penalty `λ‖θ_T - θ_S‖²`
/// (bias included, headwise).
pub fn fit_da(target: &Dataset, tcfg: &TrainConfig, dacfg: &DaConfig) -> Result<FitReport> {
    check_trainable(target, tcfg)?;
    dacfg.validate_for(target)?;
    run(
        target,
        tcfg,
        dacfg.initial_bank(target)?,
        Objective {
            anchor: Some((&dacfg.source_params, dacfg.lambda)),
            l2_weight: tcfg.l2_weight,
            ..Objective::default()
        },
    )
}

/// Target training with both the adversarial term and the discrepancy penalty.
pub fn fit_adv_da(target: &Dataset, tcfg: &TrainConfig, acfg: &AdvConfig, dacfg: &DaConfig) -> Result<FitReport> {
    check_trainable(target, tcfg)?;
    acfg.validate()?;
    dacfg.validate_for(target)?;
    run(
        target,
        tcfg,
        dacfg.initial_bank(target)?,
        Objective {
            adversarial: Some(acfg),
            anchor: Some((&dacfg.source_params, dacfg.lambda)),
            l2_weight: tcfg.l2_weight,
            ..Objective::default()
        },
    )
}

/// `nll(θ_T) + λ‖θ_T - θ_S‖²` for one head.
pub fn transfer_objective(
    params: &ModelParams,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    source: &ModelParams,
    lambda: f64,
) -> Result<f64> {
    check_dim(params.dim(), source.dim())?;
    let penalty: f64 = params
        .as_slice()
        .iter()
        .zip(source.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(nll_loss(params, x, y)? + lambda * penalty)
}

/// Gradient of [`transfer_objective`] with respect to `θ_T`.
pub fn transfer_gradient(
    params: &ModelParams,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    source: &ModelParams,
    lambda: f64,
) -> Result<Array1<f64>> {
    check_dim(params.dim(), source.dim())?;
    let mut g = grad_theta(params, x, y)?;
    g.zip_mut_with(&(params.as_array() - source.as_array()), |gj, dj| {
        *gj += 2.0 * lambda * dj
    });
    Ok(g)
}

/// `a·b / (‖a‖‖b‖)` over the full parameter vectors.
pub fn cosine_similarity(a: &ModelParams, b: &ModelParams) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let dot: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
    let na = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedMetric("cosine similarity of a zero vector".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// One point of a hyperparameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the best score; the earliest wins ties.
    pub best: usize,
}

impl SweepTable {
    pub fn best_row(&self) -> SweepRow {
        self.rows[self.best]
    }
}

fn sweep<F>(values: &[f64], score: F) -> Result<SweepTable>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    // Points run in parallel; collect() keeps input order.
    let scores: Vec<f64> = values.par_iter().map(|&v| score(v)).collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = values
        .iter()
        .zip(scores)
        .map(|(&value, score)| SweepRow { value, score })
        .collect();
    let best = best_index(rows.iter().map(|r| r.score))
        .ok_or_else(|| Error::UndefinedMetric("every sweep point produced a non-finite score".into()))?;
    Ok(SweepTable { rows, best })
}

/// Index of the largest finite value; earliest wins ties.
pub(crate) fn best_index(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        if s.is_finite() && best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Scores each `α ∈ (0, 1]` with `score` and reports the argmax.
pub fn sweep_alpha<F>(alphas: &[f64], score: F) -> Result<SweepTable>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if alphas.is_empty() {
        return Err(Error::config("alpha grid is empty"));
    }
    if let Some(bad) = alphas.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::config(format!("alpha {bad} is outside (0, 1]")));
    }
    sweep(alphas, score)
}

/// Scores each `λ ≥ 0` with `score` and reports the argmax.
pub fn grid_lambda<F>(lambdas: &[f64], score: F) -> Result<SweepTable>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if lambdas.is_empty() {
        return Err(Error::config("lambda grid is empty"));
    }
    if let Some(bad) = lambdas.iter().find(|&&l| !(l >= 0.0 && l.is_finite())) {
        return Err(Error::config(format!("lambda {bad} must be finite and >= 0")));
    }
    sweep(lambdas, score)
}

pub const DEFAULT_ALPHAS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const DEFAULT_LAMBDAS: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
