//! Minibatch gradient descent over head banks.
//!
//! Every regime (normal, L1, adversarial, parameter transfer) runs through the
//! same loop; they differ only in the extra gradient terms added per step.
//! Each head is an independent binary problem, but all heads see the same
//! batches.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::adversarial::{augment_batch_unchecked, AdvConfig};
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::model::{accumulate_grad_theta, nll_loss_unchecked, HeadBank, ModelParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub l1_weight: f64,
    pub l2_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 100,
            epochs: 100,
            seed: 0,
            l1_weight: 0.0,
            l2_weight: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero learning rate is accepted: it turns the loop into a loss probe.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        for (name, v) in [("l1_weight", self.l1_weight), ("l2_weight", self.l2_weight)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub final_params: HeadBank,
    /// Objective on the full training set after each epoch: clean summed NLL
    /// over all heads plus whichever penalty terms were active. The
    /// adversarial term is not included.
    pub loss_trace: Vec<f64>,
    pub config: TrainConfig,
    pub wall_time: f64,
}

/// Extra terms layered on top of the clean loss.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Objective<'a> {
    pub adversarial: Option<&'a AdvConfig>,
    /// Frozen reference bank and the weight `λ` of `λ‖θ - θ_ref‖²`.
    pub anchor: Option<(&'a HeadBank, f64)>,
    pub l1_weight: f64,
    pub l2_weight: f64,
}

impl Objective<'_> {
    fn penalty(&self, head: usize, theta: &ModelParams) -> f64 {
        let w = theta.feature_weights();
        let mut total = 0.0;
        if self.l1_weight != 0.0 {
            total += self.l1_weight * w.iter().map(|v| v.abs()).sum::<f64>();
        }
        if self.l2_weight != 0.0 {
            total += self.l2_weight * w.iter().map(|v| v * v).sum::<f64>();
        }
        if let Some((reference, lambda)) = self.anchor {
            if lambda != 0.0 {
                let r = reference.heads()[head].as_slice();
                total += lambda
                    * theta
                        .as_slice()
                        .iter()
                        .zip(r)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
            }
        }
        total
    }

    fn add_penalty_grad(&self, theta: &ModelParams, grad: &mut Array1<f64>) {
        let d = theta.dim();
        let t = theta.as_slice();
        let g = grad.as_slice_mut().expect("owned vector is contiguous");
        if self.l1_weight != 0.0 {
            for (gj, &tj) in g[..d].iter_mut().zip(t) {
                // subgradient, zero at zero
                if tj > 0.0 {
                    *gj += self.l1_weight;
                } else if tj < 0.0 {
                    *gj -= self.l1_weight;
                }
            }
        }
        if self.l2_weight != 0.0 {
            for (gj, &tj) in g[..d].iter_mut().zip(t) {
                *gj += 2.0 * self.l2_weight * tj;
            }
        }
    }

    /// Applies `θ ← θ - lr·grad`, with the anchor term (if any) taken
    /// implicitly: `θ ← (θ - lr·grad + 2·lr·λ·θ_ref) / (1 + 2·lr·λ)`.
    ///
    /// The implicit form is the exact minimizer of the linearized step and
    /// stays stable for any `λ`; at `λ = 0` it is the plain update.
    fn step(&self, head: usize, theta: &mut ModelParams, grad: &Array1<f64>, lr: f64) {
        let t = theta.as_array_mut();
        t.scaled_add(-lr, grad);
        if let Some((reference, lambda)) = self.anchor {
            if lambda != 0.0 {
                let pull = 2.0 * lr * lambda;
                let r = reference.heads()[head].as_array();
                t.zip_mut_with(r, |tj, &rj| *tj = (*tj + pull * rj) / (1.0 + pull));
            }
        }
    }
}

pub(crate) fn check_trainable(data: &Dataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if data.n_rows() == 0 {
        return Err(Error::data("cannot train on an empty dataset"));
    }
    Ok(())
}

/// The shared loop. `init` fixes the starting point and the task layout.
pub(crate) fn run(data: &Dataset, cfg: &TrainConfig, init: HeadBank, objective: Objective<'_>) -> Result<FitReport> {
    check_trainable(data, cfg)?;
    if init.task() != data.task() {
        return Err(Error::invalid(format!(
            "initial bank is for a {} task but the data is {}",
            init.task(),
            data.task()
        )));
    }
    check_dim(data.n_features(), init.dim())?;
    if let Some(adv) = objective.adversarial {
        adv.validate()?;
    }
    if let Some((reference, lambda)) = objective.anchor {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if reference.task() != data.task() {
            return Err(Error::invalid("source bank task differs from the target task"));
        }
        check_dim(data.n_features(), reference.dim())?;
    }

    let started = Instant::now();
    let n = data.n_rows();
    let n_heads = data.task().n_heads();
    let targets: Vec<Array1<f64>> = (0..n_heads).map(|h| Array1::from(data.head_targets(h))).collect();
    let mut bank = init;
    let mut shuffler = rng::stream(cfg.seed, "train/shuffle");
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffler);
        for batch in order.chunks(cfg.batch_size) {
            let batch_x: Array2<f64> = data.features().select(Axis(0), batch);
            for (head, theta) in bank.heads_mut().iter_mut().enumerate() {
                let batch_y = Array1::from_iter(batch.iter().map(|&i| targets[head][i]));
                let mut grad = Array1::zeros(theta.dim() + 1);
                accumulate_grad_theta(theta, batch_x.view(), batch_y.view(), 1.0, &mut grad);
                if let Some(adv) = objective.adversarial {
                    let x_adv = augment_batch_unchecked(theta, batch_x.view(), batch_y.view(), adv);
                    accumulate_grad_theta(theta, x_adv.view(), batch_y.view(), adv.alpha, &mut grad);
                }
                objective.add_penalty_grad(theta, &mut grad);
                objective.step(head, theta, &grad, cfg.learning_rate);
            }
        }
        loss_trace.push(full_objective(data, &bank, &targets, &objective));
    }

    if bank.heads().iter().any(|h| !h.is_finite()) {
        return Err(Error::data("training diverged to non-finite parameters"));
    }
    Ok(FitReport {
        final_params: bank,
        loss_trace,
        config: *cfg,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

fn full_objective(data: &Dataset, bank: &HeadBank, targets: &[Array1<f64>], objective: &Objective<'_>) -> f64 {
    bank.heads()
        .iter()
        .enumerate()
        .map(|(h, theta)| nll_loss_unchecked(theta, data.features(), targets[h].view()) + objective.penalty(h, theta))
        .sum()
}

/// Plain summed-NLL minimization from zero parameters.
///
/// `cfg.l2_weight` is honoured; `cfg.l1_weight` is ignored here, see [`fit_l1`].
pub fn fit_normal(data: &Dataset, cfg: &TrainConfig) -> Result<FitReport> {
    check_trainable(data, cfg)?;
    let init = HeadBank::zeros(data.task(), data.n_features())?;
    run(
        data,
        cfg,
        init,
        Objective {
            l2_weight: cfg.l2_weight,
            ..Objective::default()
        },
    )
}

/// Normal training plus the subgradient of `l1_weight · ‖w‖₁` (bias excluded).
pub fn fit_l1(data: &Dataset, cfg: &TrainConfig) -> Result<FitReport> {
    check_trainable(data, cfg)?;
    let init = HeadBank::zeros(data.task(), data.n_features())?;
    run(
        data,
        cfg,
        init,
        Objective {
            l1_weight: cfg.l1_weight,
            l2_weight: cfg.l2_weight,
            ..Objective::default()
        },
    )
}

/// Fraction of rows whose predicted class matches the label. For multi-label
/// tasks every outcome is thresholded at 0.5 and counted separately.
pub fn accuracy(bank: &HeadBank, data: &Dataset) -> Result<f64> {
    check_dim(data.n_features(), bank.dim())?;
    let mut hits = 0usize;
    let mut total = 0usize;
    for i in 0..data.n_rows() {
        let labels: ArrayView1<'_, f64> = data.label_row(i);
        match data.task() {
            crate::model::TaskKind::MultiLabel(k) => {
                let scores = bank.predict(data.row(i))?;
                for (j, s) in scores.iter().enumerate().take(k) {
                    hits += usize::from((*s >= 0.5) == (labels[j] == 1.0));
                    total += 1;
                }
            }
            crate::model::TaskKind::Binary => {
                let s = bank.predict(data.row(i))?[0];
                hits += usize::from((s >= 0.5) == (labels[0] == 1.0));
                total += 1;
            }
            crate::model::TaskKind::MultiClass(_) => {
                hits += usize::from(bank.predict_class(data.row(i))? == labels[0] as usize);
                total += 1;
            }
        }
    }
    Ok(hits as f64 / total as f64)
}
