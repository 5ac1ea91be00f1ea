//! Two-domain logistic data with a controllable amount of shift.
//!
//! Source rows are `x ~ N(0, I)` labelled by `y ~ Bernoulli(σ(θ_Sᵀx))`.
//! Target rows are `x ~ N(shift·u, s²I)` with `s = 1 + shift/4` and a random
//! unit direction `u`, labelled by `θ_T`, which is `θ_S` rotated by
//! `min(shift, 3)·30°` towards a random orthogonal direction. `shift = 0`
//! makes the two domains identically distributed.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{default_feature_names, Dataset};
use crate::error::{Error, Result};
use crate::model::{sigmoid, ModelParams, TaskKind};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub d: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub shift: f64,
    /// Probability of flipping each label after sampling.
    pub label_noise: f64,
    /// Norm of the true weight vector; sets how separable the classes are.
    pub signal: f64,
    /// When set, only the first `k` features carry weight.
    pub informative: Option<usize>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            d: 10,
            n_source: 5000,
            n_target: 1000,
            shift: 0.0,
            label_noise: 0.0,
            signal: 2.0,
            informative: None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::config("synthetic data needs d >= 1"));
        }
        if self.n_source == 0 || self.n_target == 0 {
            return Err(Error::config("synthetic domains need at least one row each"));
        }
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return Err(Error::config(format!(
                "shift must be finite and >= 0, got {}",
                self.shift
            )));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return Err(Error::config(format!(
                "label noise must lie in [0, 0.5], got {}",
                self.label_noise
            )));
        }
        if !(self.signal > 0.0 && self.signal.is_finite()) {
            return Err(Error::config("signal must be positive"));
        }
        if let Some(k) = self.informative {
            if k == 0 || k > self.d {
                return Err(Error::config(format!(
                    "informative count {k} must lie in 1..={}",
                    self.d
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDomains {
    pub source: Dataset,
    pub target: Dataset,
    /// Generating weights of the source domain (bias last, always 0).
    pub theta_source: ModelParams,
    /// Generating weights of the target domain.
    pub theta_target: ModelParams,
}

fn normal_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sample_domain(
    rng: &mut ChaCha8Rng,
    n: usize,
    mean: &[f64],
    scale: f64,
    theta: &[f64],
    noise: f64,
    group: &str,
) -> Result<Dataset> {
    let d = mean.len();
    let mut x = Array2::zeros((n, d));
    let mut y = Array2::zeros((n, 1));
    for i in 0..n {
        let mut z = 0.0;
        for j in 0..d {
            let draw: f64 = StandardNormal.sample(rng);
            let v = mean[j] + scale * draw;
            x[[i, j]] = v;
            z += theta[j] * v;
        }
        let mut label = rng.random_bool(sigmoid(z));
        if noise > 0.0 && rng.random_bool(noise) {
            label = !label;
        }
        y[[i, 0]] = f64::from(label);
    }
    Dataset::new(
        x,
        y,
        TaskKind::Binary,
        default_feature_names(d),
        Some(vec![group.to_string(); n]),
    )
}

pub fn synth_shifted_domains(cfg: &SynthConfig) -> Result<SynthDomains> {
    cfg.validate()?;
    let d = cfg.d;
    let mut rng_theta = rng::stream(cfg.seed, "synth/theta");

    let mut theta = normal_vec(&mut rng_theta, d);
    if let Some(k) = cfg.informative {
        theta[k..].iter_mut().for_each(|t| *t = 0.0);
    }
    let n0 = norm(&theta).max(f64::MIN_POSITIVE);
    theta.iter_mut().for_each(|t| *t *= cfg.signal / n0);

    // Random direction orthogonal to θ for the rotation; Gram–Schmidt.
    let mut ortho = normal_vec(&mut rng_theta, d);
    if let Some(k) = cfg.informative {
        ortho[k..].iter_mut().for_each(|t| *t = 0.0);
    }
    let proj = ortho.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() / (cfg.signal * cfg.signal);
    ortho.iter_mut().zip(&theta).for_each(|(o, t)| *o -= proj * t);
    let on = norm(&ortho);
    let angle = cfg.shift.min(3.0) * std::f64::consts::PI / 6.0;
    let theta_target: Vec<f64> = if on > 1e-12 {
        theta
            .iter()
            .zip(&ortho)
            .map(|(t, o)| angle.cos() * t + angle.sin() * cfg.signal * o / on)
            .collect()
    } else {
        // d = 1 (or a degenerate draw): nothing to rotate towards.
        theta.clone()
    };

    let direction = normal_vec(&mut rng_theta, d);
    let dn = norm(&direction).max(f64::MIN_POSITIVE);
    let target_mean: Vec<f64> = direction.iter().map(|u| cfg.shift * u / dn).collect();
    let target_scale = 1.0 + cfg.shift / 4.0;

    let source = sample_domain(
        &mut rng::stream(cfg.seed, "synth/source"),
        cfg.n_source,
        &vec![0.0; d],
        1.0,
        &theta,
        cfg.label_noise,
        "source",
    )?;
    let target = sample_domain(
        &mut rng::stream(cfg.seed, "synth/target"),
        cfg.n_target,
        &target_mean,
        target_scale,
        &theta_target,
        cfg.label_noise,
        "target",
    )?;

    let with_bias = |mut v: Vec<f64>| {
        v.push(0.0);
        ModelParams::from_vec(v)
    };
    Ok(SynthDomains {
        source,
        target,
        theta_source: with_bias(theta)?,
        theta_target: with_bias(theta_target)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let cfg = SynthConfig {
            d: 3,
            n_source: 50,
            n_target: 20,
            shift: 1.0,
            seed: 5,
            ..SynthConfig::default()
        };
        assert_eq!(
            synth_shifted_domains(&cfg).unwrap(),
            synth_shifted_domains(&cfg).unwrap()
        );
        let other = synth_shifted_domains(&SynthConfig { seed: 6, ..cfg.clone() }).unwrap();
        assert_ne!(other.source, synth_shifted_domains(&cfg).unwrap().source);
    }

    #[test]
    fn shapes_and_rotation() {
        let cfg = SynthConfig {
            d: 6,
            n_source: 30,
            n_target: 12,
            shift: 1.0,
            informative: Some(2),
            ..SynthConfig::default()
        };
        let s = synth_shifted_domains(&cfg).unwrap();
        assert_eq!(
            (s.source.n_rows(), s.target.n_rows(), s.source.n_features()),
            (30, 12, 6)
        );
        assert!(s.theta_source.feature_weights()[2..].iter().all(|w| *w == 0.0));
        assert!(s.theta_target.feature_weights()[2..].iter().all(|w| *w == 0.0));
        let a = s.theta_source.feature_weights();
        let b = s.theta_target.feature_weights();
        let cos = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (norm(a) * norm(b));
        assert!((cos - (std::f64::consts::PI / 6.0).cos()).abs() < 1e-12);
        assert!((norm(a) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_shift_means_same_generator() {
        let s = synth_shifted_domains(&SynthConfig {
            d: 4,
            n_source: 10,
            n_target: 10,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(s.theta_source, s.theta_target);
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            SynthConfig {
                d: 0,
                ..SynthConfig::default()
            },
            SynthConfig {
                n_target: 0,
                ..SynthConfig::default()
            },
            SynthConfig {
                shift: -1.0,
                ..SynthConfig::default()
            },
            SynthConfig {
                label_noise: 0.9,
                ..SynthConfig::default()
            },
            SynthConfig {
                informative: Some(11),
                ..SynthConfig::default()
            },
        ] {
            assert!(synth_shifted_domains(&cfg).is_err());
        }
    }
}
