//! Experiment runners behind the command-line tool.
//!
//! Every runner takes an [`ExperimentConfig`], repeats its protocol once per
//! configured seed, and returns a [`RunReport`] whose body is a deterministic
//! function of the configuration. Per-seed randomness is derived from the
//! seed with fixed tags: `synth` (data generation), `split` (train/test),
//! `validation` (carving the selection slice) and `train` (minibatch order).

mod config;
mod five_way;
mod model_io;
mod report;
mod shift_matrix;
mod sparsity;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

pub use config::{DataSource, DomainFile, ExperimentConfig};
pub use five_way::{run_five_way, FiveWayBody, GridEntry, RegimeSummary, Selection, SplitSizes};
pub use model_io::{SavedModel, MODEL_FORMAT, MODEL_VERSION};
pub use report::{ReportHeader, RunReport, Summary};
pub use shift_matrix::{run_shift_matrix, ShiftCell, ShiftMatrixBody, ShiftSeed, POOLED_DOMAIN};
pub use sparsity::{run_sparsity_comparison, SparsityBody, SparsitySeed, WeightVector};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::rng;
use crate::training::TrainConfig;

/// Runs `f` on a dedicated pool of `threads` workers (`0` = rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Test split wrapper that counts reads made while hyperparameter selection
/// is still in progress.
pub(crate) struct HeldOut<'a> {
    data: &'a Dataset,
    sealed: AtomicBool,
    sealed_reads: AtomicUsize,
}

impl<'a> HeldOut<'a> {
    pub fn sealed(data: &'a Dataset) -> Self {
        Self {
            data,
            sealed: AtomicBool::new(true),
            sealed_reads: AtomicUsize::new(0),
        }
    }

    pub fn get(&self) -> &'a Dataset {
        if self.sealed.load(Ordering::SeqCst) {
            self.sealed_reads.fetch_add(1, Ordering::SeqCst);
        }
        self.data
    }

    pub fn unseal(&self) {
        self.sealed.store(false, Ordering::SeqCst);
    }

    pub fn reads_while_sealed(&self) -> usize {
        self.sealed_reads.load(Ordering::SeqCst)
    }
}

/// Training configuration of one run seed.
pub(crate) fn seeded_train(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: rng::derive_seed(seed, "train"),
        ..cfg.train
    }
}

/// Optional standardization fitted on `fit_on`, applied to every dataset in `all`.
pub(crate) fn maybe_standardize(
    enabled: bool,
    fit_on: &Dataset,
    all: Vec<Dataset>,
) -> Result<(Vec<Dataset>, Option<Standardizer>)> {
    if !enabled {
        return Ok((all, None));
    }
    let s = Standardizer::fit(fit_on);
    let out = all.iter().map(|d| s.apply(d)).collect::<Result<_>>()?;
    Ok((out, Some(s)))
}
