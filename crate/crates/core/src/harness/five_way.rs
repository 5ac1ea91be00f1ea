use std::fs;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{maybe_standardize, seeded_train, ExperimentConfig, HeldOut, ReportHeader, RunReport, SavedModel, Summary};
use crate::adaptation::{best_index, fit_adv_da, fit_adv_source, fit_da, DaConfig, Regime};
use crate::adversarial::AdvConfig;
use crate::data::{split_indices, split_train_test, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, headline_metric_name, MetricsReport};
use crate::model::HeadBank;
use crate::rng;
use crate::training::{fit_normal, TrainConfig};

/// One grid point of one regime for one seed: trained on the target fit
/// slice, scored on the validation slice (used for selection) and on the
/// test split (reported only).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEntry {
    pub regime: Regime,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub validation: f64,
    pub test: MetricsReport,
}

/// The validation-best grid point, refitted on the whole target training split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub regime: Regime,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub validation: f64,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitSizes {
    pub seed: u64,
    pub source_train: usize,
    pub target_train: usize,
    pub target_fit: usize,
    pub target_validation: usize,
    pub target_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub regime: Regime,
    /// Test headline metric of the selected model, across seeds.
    pub test: Summary,
    /// Seeds where this regime's selected model scored at least as well as
    /// each baseline.
    pub seeds_at_least_nt_source: usize,
    pub seeds_at_least_nt_target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiveWayBody {
    pub metric: String,
    pub source: String,
    pub target: String,
    pub splits: Vec<SplitSizes>,
    /// Sorted by (regime, seed, alpha, lambda).
    pub entries: Vec<GridEntry>,
    /// Sorted by (regime, seed).
    pub selections: Vec<Selection>,
    pub summary: Vec<RegimeSummary>,
    /// Reads of any test split made before selection finished. Always 0
    /// unless the protocol is broken.
    pub test_accesses_during_selection: usize,
}

/// Trains one grid point of one regime on `target`.
#[derive(Debug, Clone, Copy)]
enum Job {
    NtSource,
    NtTarget,
    DaNtNt { lambda: f64 },
    DaAtNt { alpha: usize, lambda: f64 },
    DaAtAt { alpha: usize, lambda: f64 },
}

impl Job {
    fn regime(&self) -> Regime {
        match self {
            Job::NtSource => Regime::NtSource,
            Job::NtTarget => Regime::NtTarget,
            Job::DaNtNt { .. } => Regime::DaNtNt,
            Job::DaAtNt { .. } => Regime::DaAtNt,
            Job::DaAtAt { .. } => Regime::DaAtAt,
        }
    }

    fn alpha(&self, alphas: &[f64]) -> Option<f64> {
        match *self {
            Job::DaAtNt { alpha, .. } | Job::DaAtAt { alpha, .. } => Some(alphas[alpha]),
            _ => None,
        }
    }

    fn lambda(&self) -> Option<f64> {
        match *self {
            Job::DaNtNt { lambda } | Job::DaAtNt { lambda, .. } | Job::DaAtAt { lambda, .. } => Some(lambda),
            _ => None,
        }
    }
}

/// The grid, in report order.
fn jobs(alphas: &[f64], lambdas: &[f64]) -> Vec<Job> {
    let mut out = vec![Job::NtSource, Job::NtTarget];
    out.extend(lambdas.iter().map(|&lambda| Job::DaNtNt { lambda }));
    for (alpha, _) in alphas.iter().enumerate() {
        out.extend(lambdas.iter().map(|&lambda| Job::DaAtNt { alpha, lambda }));
    }
    for (alpha, _) in alphas.iter().enumerate() {
        out.extend(lambdas.iter().map(|&lambda| Job::DaAtAt { alpha, lambda }));
    }
    out
}

/// Source-side models shared by every target fit of a seed.
struct SourceModels {
    normal: HeadBank,
    /// One adversarially trained model per α, in grid order.
    adversarial: Vec<HeadBank>,
}

struct SeedContext<'a> {
    cfg: &'a ExperimentConfig,
    tcfg: TrainConfig,
    source: SourceModels,
}

impl SeedContext<'_> {
    fn train(&self, job: Job, target: &Dataset) -> Result<HeadBank> {
        let adv = |alpha: usize| -> AdvConfig { self.cfg.adv.with_alpha(self.cfg.alphas[alpha]) };
        let bank = match job {
            Job::NtSource => return Ok(self.source.normal.clone()),
            Job::NtTarget => fit_normal(target, &self.tcfg)?,
            Job::DaNtNt { lambda } => fit_da(target, &self.tcfg, &DaConfig::new(lambda, self.source.normal.clone()))?,
            Job::DaAtNt { alpha, lambda } => fit_da(
                target,
                &self.tcfg,
                &DaConfig::new(lambda, self.source.adversarial[alpha].clone()),
            )?,
            Job::DaAtAt { alpha, lambda } => fit_adv_da(
                target,
                &self.tcfg,
                &adv(alpha),
                &DaConfig::new(lambda, self.source.adversarial[alpha].clone()),
            )?,
        };
        Ok(bank.final_params)
    }
}

struct SeedResult {
    splits: SplitSizes,
    entries: Vec<GridEntry>,
    selections: Vec<Selection>,
    sealed_reads: usize,
}

/// Runs the two baselines and the three transfer regimes on a source/target
/// pair, selecting `α` and `λ` on a validation slice of the target training split.
pub fn run_five_way(cfg: &ExperimentConfig) -> Result<RunReport<FiveWayBody>> {
    cfg.validate()?;
    if cfg.alphas.is_empty() {
        return Err(Error::config("five-way needs a nonempty alpha grid"));
    }
    if cfg.lambdas.is_empty() {
        return Err(Error::config("five-way needs a nonempty lambda grid"));
    }
    let start = Instant::now();
    if let Some(dir) = &cfg.models_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let per_seed: Vec<SeedResult> = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<_>>()?;

    let (source, target) = {
        let ((s, _), (t, _)) = cfg.pick_pair(cfg.load_domains(cfg.seeds[0])?)?;
        (s, t)
    };
    let test_accesses_during_selection = per_seed.iter().map(|r| r.sealed_reads).sum();
    let splits = per_seed.iter().map(|r| r.splits).collect();
    let mut entries: Vec<GridEntry> = Vec::new();
    let mut selections: Vec<Selection> = Vec::new();
    for r in per_seed {
        entries.extend(r.entries);
        selections.extend(r.selections);
    }
    // Stable sorts keep grid order within a (regime, seed) block.
    entries.sort_by_key(|e| (e.regime, e.seed));
    selections.sort_by_key(|s| (s.regime, s.seed));

    let score = |regime: Regime| -> Vec<f64> {
        selections
            .iter()
            .filter(|s| s.regime == regime)
            .map(|s| s.test.headline)
            .collect()
    };
    let nt_source = score(Regime::NtSource);
    let nt_target = score(Regime::NtTarget);
    let summary = Regime::ALL
        .iter()
        .map(|&regime| {
            let v = score(regime);
            RegimeSummary {
                regime,
                test: Summary::of(&v),
                seeds_at_least_nt_source: v.iter().zip(&nt_source).filter(|(a, b)| a >= b).count(),
                seeds_at_least_nt_target: v.iter().zip(&nt_target).filter(|(a, b)| a >= b).count(),
            }
        })
        .collect();

    Ok(RunReport {
        header: ReportHeader::new("five-way", cfg),
        body: FiveWayBody {
            metric: headline_metric_name(cfg.task).to_string(),
            source,
            target,
            splits,
            entries,
            selections,
            summary,
            test_accesses_during_selection,
        },
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult> {
    let ((_, source), (target_name, target)) = cfg.pick_pair(cfg.load_domains(seed)?)?;
    let split_seed = rng::derive_seed(seed, "split");
    let (source_train, _) = split_train_test(&source, cfg.train_fraction, split_seed)?;
    let (mut target_train, target_test) = split_train_test(&target, cfg.train_fraction, split_seed)?;
    if let Some(limit) = cfg.target_train_limit {
        if limit < target_train.n_rows() {
            // The split order is already shuffled; a prefix is a random subset.
            target_train = target_train.select_rows(&(0..limit).collect::<Vec<_>>());
        }
    }
    let (fit_idx, val_idx) = split_indices(
        target_train.n_rows(),
        1.0 - cfg.validation_fraction,
        rng::derive_seed(seed, "validation"),
    )
    .map_err(|e| {
        Error::data(format!(
            "target {target_name} is too small to carve a validation slice: {e}"
        ))
    })?;
    let target_fit = target_train.select_rows(&fit_idx);
    let target_val = target_train.select_rows(&val_idx);

    let splits = SplitSizes {
        seed,
        source_train: source_train.n_rows(),
        target_train: target_train.n_rows(),
        target_fit: target_fit.n_rows(),
        target_validation: target_val.n_rows(),
        target_test: target_test.n_rows(),
    };

    let (scaled, standardizer) = maybe_standardize(
        cfg.standardize,
        &source_train,
        vec![source_train.clone(), target_train, target_fit, target_val, target_test],
    )?;
    let [source_train, target_train, target_fit, target_val, target_test]: [Dataset; 5] =
        scaled.try_into().expect("five datasets in, five out");

    let tcfg = seeded_train(cfg, seed);
    let adversarial = cfg
        .alphas
        .par_iter()
        .map(|&a| Ok(fit_adv_source(&source_train, &tcfg, &cfg.adv.with_alpha(a))?.final_params))
        .collect::<Result<_>>()?;
    let ctx = SeedContext {
        cfg,
        tcfg,
        source: SourceModels {
            normal: fit_normal(&source_train, &tcfg)?.final_params,
            adversarial,
        },
    };
    let test = HeldOut::sealed(&target_test);

    // Selection phase: fit slice → validation slice. The test split stays sealed.
    let grid = jobs(&cfg.alphas, &cfg.lambdas);
    let fitted: Vec<(HeadBank, f64)> = grid
        .par_iter()
        .map(|&job| {
            let bank = ctx.train(job, &target_fit)?;
            let validation = evaluate(&bank, &target_val)
                .map_err(|e| annotate(e, "validation slice"))?
                .headline;
            Ok((bank, validation))
        })
        .collect::<Result<_>>()?;
    let mut chosen = Vec::with_capacity(Regime::ALL.len());
    for regime in Regime::ALL {
        let idx: Vec<usize> = (0..grid.len()).filter(|&i| grid[i].regime() == regime).collect();
        let best = best_index(idx.iter().map(|&i| fitted[i].1))
            .ok_or_else(|| Error::UndefinedMetric(format!("{regime}: no grid point has a finite validation score")))?;
        chosen.push(idx[best]);
    }
    let sealed_reads = test.reads_while_sealed();
    test.unseal();

    let entries = grid
        .iter()
        .zip(&fitted)
        .map(|(job, (bank, validation))| {
            Ok(GridEntry {
                regime: job.regime(),
                seed,
                alpha: job.alpha(&cfg.alphas),
                lambda: job.lambda(),
                validation: *validation,
                test: evaluate(bank, test.get()).map_err(|e| annotate(e, "test split"))?,
            })
        })
        .collect::<Result<_>>()?;

    let selections = chosen
        .par_iter()
        .map(|&i| {
            let job = grid[i];
            let bank = ctx.train(job, &target_train)?;
            if let Some(dir) = &cfg.models_dir {
                save_model(dir, job.regime(), seed, &bank, &target_train, standardizer.as_ref())?;
            }
            Ok(Selection {
                regime: job.regime(),
                seed,
                alpha: job.alpha(&cfg.alphas),
                lambda: job.lambda(),
                validation: fitted[i].1,
                test: evaluate(&bank, test.get()).map_err(|e| annotate(e, "test split"))?,
            })
        })
        .collect::<Result<_>>()?;

    Ok(SeedResult {
        splits,
        entries,
        selections,
        sealed_reads,
    })
}

fn annotate(e: Error, what: &str) -> Error {
    match e {
        Error::UndefinedMetric(m) => Error::UndefinedMetric(format!("target {what}: {m}")),
        other => other,
    }
}

fn save_model(
    dir: &std::path::Path,
    regime: Regime,
    seed: u64,
    bank: &HeadBank,
    data: &Dataset,
    standardizer: Option<&Standardizer>,
) -> Result<()> {
    let model = SavedModel::new(bank.clone(), data.feature_names().to_vec(), standardizer.cloned())?;
    model.save(dir.join(format!("{}_seed{seed}.toml", regime.name())))
}
