//! Adversarial-sample-enhanced domain adaptation for logistic regression.
//!
//! A source-domain model is trained first (optionally with iterative
//! fast-gradient-sign samples mixed into every batch). Its parameters are
//! then carried into target-domain training through the penalty
//! `λ‖θ_T - θ_S‖²`, again optionally with adversarial augmentation.
//!
//! ```
//! use advda::data::{synth_shifted_domains, SynthConfig};
//! use advda::{fit_da, fit_normal, DaConfig, TrainConfig};
//!
//! let domains = synth_shifted_domains(&SynthConfig {
//!     d: 4, n_source: 400, n_target: 60, shift: 0.5, seed: 1, ..Default::default()
//! })?;
//! let cfg = TrainConfig { epochs: 20, ..Default::default() };
//! let source = fit_normal(&domains.source, &cfg)?;
//! let target = fit_da(&domains.target, &cfg, &DaConfig::new(0.01, source.final_params))?;
//! assert_eq!(target.loss_trace.len(), 20);
//! # Ok::<(), advda::Error>(())
//! ```

pub mod adaptation;
pub mod adversarial;
pub mod data;
mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod training;

pub use adaptation::{
    cosine_similarity, fit_adv_da, fit_adv_source, fit_da, grid_lambda, sweep_alpha, DaConfig, Regime, SweepTable,
    WarmStart,
};
pub use adversarial::{augment_batch, clip_linf, iter_fgsm, AdvConfig};
pub use data::Dataset;
pub use error::{Error, Result};
pub use metrics::{auroc, evaluate, linear_weighted_kappa, macro_auroc, MetricsReport};
pub use model::{bank_predict, grad_theta, grad_x, nll_loss, predict_proba, sigmoid, HeadBank, ModelParams, TaskKind};
pub use training::{fit_l1, fit_normal, FitReport, TrainConfig};
