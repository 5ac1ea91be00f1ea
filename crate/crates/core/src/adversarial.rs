//! Iterative fast-gradient-sign sample generation inside an L∞ ball.
//!
//! Starting from `x₀ = x`, each of the `Z` steps moves by `ε / Z` along the
//! sign of the input gradient of the per-sample loss and is then clipped back
//! into `[x - ε, x + ε]`. Coordinates whose gradient is exactly zero stay put.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{check_binary_labels, sigmoid, ModelParams};

/// Attack radius, iteration count and the weight of the adversarial loss term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdvConfig {
    pub epsilon: f64,
    pub steps: usize,
    pub alpha: f64,
}

impl Default for AdvConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            steps: 20,
            alpha: 1.0,
        }
    }
}

impl AdvConfig {
    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if self.steps == 0 {
            return Err(Error::config("attack needs at least one step"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Sign with `sign(0) = 0`.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Componentwise projection of `candidate` onto the ε-box around `original`.
pub fn clip_linf(original: &[f64], candidate: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    check_dim(original.len(), candidate.len())?;
    Ok(original
        .iter()
        .zip(candidate)
        .map(|(&o, &c)| c.max(o - epsilon).min(o + epsilon))
        .collect())
}

/// Runs the `Z`-step attack on one sample and writes the result into `out`.
fn attack_into(params: &ModelParams, x: &[f64], y: f64, cfg: &AdvConfig, out: &mut [f64]) {
    out.copy_from_slice(x);
    if cfg.epsilon == 0.0 {
        return;
    }
    let step = cfg.epsilon / cfg.steps as f64;
    let w = params.feature_weights();
    for _ in 0..cfg.steps {
        let residual = sigmoid(params.logit_unchecked(out)) - y;
        for ((xi, &wi), &oi) in out.iter_mut().zip(w).zip(x) {
            let moved = *xi + step * sign(residual * wi);
            *xi = moved.max(oi - cfg.epsilon).min(oi + cfg.epsilon);
        }
    }
}

/// Adversarial counterpart of a single sample `(x, y)`.
pub fn iter_fgsm(params: &ModelParams, x: &[f64], y: f64, cfg: &AdvConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_dim(params.dim(), x.len())?;
    if y != 0.0 && y != 1.0 {
        return Err(Error::invalid(format!("label {y} is not in {{0, 1}}")));
    }
    let mut out = vec![0.0; x.len()];
    attack_into(params, x, y, cfg, &mut out);
    Ok(out)
}

/// Row-wise [`iter_fgsm`] against the given parameters. Labels are unchanged,
/// so the caller keeps using `y` with the returned matrix.
pub fn augment_batch(
    params: &ModelParams,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    cfg: &AdvConfig,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::invalid("cannot augment an empty batch"));
    }
    check_dim(params.dim(), x.ncols())?;
    check_dim(x.nrows(), y.len())?;
    check_binary_labels(y)?;
    Ok(augment_batch_unchecked(params, x, y, cfg))
}

pub(crate) fn augment_batch_unchecked(
    params: &ModelParams,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    cfg: &AdvConfig,
) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    for ((row, mut dst), &yi) in x.rows().into_iter().zip(out.rows_mut()).zip(y.iter()) {
        attack_into(
            params,
            row.as_slice().expect("standard layout"),
            yi,
            cfg,
            dst.as_slice_mut().expect("standard layout"),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::nll_loss;
    use ndarray::{array, Array1};
    use proptest::prelude::*;

    fn cfg(epsilon: f64, steps: usize) -> AdvConfig {
        AdvConfig {
            epsilon,
            steps,
            alpha: 1.0,
        }
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_linf(&[0.0, 0.0], &[0.05, -0.02], 0.1).unwrap(), vec![0.05, -0.02]);
        assert_eq!(clip_linf(&[0.3, -1.0], &[5.0, 7.0], 0.0).unwrap(), vec![0.3, -1.0]);
        assert_eq!(clip_linf(&[0.0, 0.0], &[0.5, -0.03], 0.1).unwrap(), vec![0.1, -0.03]);
        assert!(clip_linf(&[0.0], &[0.5, -0.03], 0.1).is_err());
    }

    #[test]
    fn fgsm_degenerate_cases() {
        let p = ModelParams::from_vec(vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(iter_fgsm(&p, &[0.3, 0.7], 1.0, &cfg(0.0, 20)).unwrap(), vec![0.3, 0.7]);
        let flat = ModelParams::from_vec(vec![0.0, 0.0, 3.0]).unwrap();
        assert_eq!(
            iter_fgsm(&flat, &[0.3, 0.7], 1.0, &cfg(0.1, 20)).unwrap(),
            vec![0.3, 0.7]
        );
    }

    #[test]
    fn fgsm_walks_to_the_boundary() {
        let p = ModelParams::from_vec(vec![1.0, 0.0]).unwrap();
        let adv = iter_fgsm(&p, &[0.0], 0.0, &cfg(0.1, 20)).unwrap();
        // twenty steps of 0.005 accumulate to 0.1 up to rounding
        assert!((adv[0] - 0.1).abs() < 1e-15, "{}", adv[0]);
        let before = nll_loss(&p, array![[0.0]].view(), array![0.0].view()).unwrap();
        let after = nll_loss(&p, array![[adv[0]]].view(), array![0.0].view()).unwrap();
        assert!((before - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(after > before);
    }

    #[test]
    fn single_step_is_plain_fgsm() {
        let p = ModelParams::from_vec(vec![0.4, -1.3, 0.0, 0.2]).unwrap();
        let x = [0.5, 0.25, -1.0];
        let adv = iter_fgsm(&p, &x, 1.0, &cfg(0.3, 1)).unwrap();
        // y = 1: residual < 0, so move against sign(w); zero weight stays put
        assert_eq!(adv, vec![0.5 - 0.3, 0.25 + 0.3, -1.0]);
    }

    #[test]
    fn batch_matches_rowwise() {
        let p = ModelParams::from_vec(vec![0.4, -1.3, 0.2]).unwrap();
        let x = array![[0.5, 0.25]];
        let y = array![0.0];
        let batch = augment_batch(&p, x.view(), y.view(), &cfg(0.1, 20)).unwrap();
        assert_eq!(
            batch.row(0).to_vec(),
            iter_fgsm(&p, &[0.5, 0.25], 0.0, &cfg(0.1, 20)).unwrap()
        );
        let same = augment_batch(&p, x.view(), y.view(), &cfg(0.0, 20)).unwrap();
        assert_eq!(same, x);
        assert!(augment_batch(&p, Array2::zeros((0, 2)).view(), Array1::zeros(0).view(), &cfg(0.1, 2)).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(cfg(-0.1, 20).validate().is_err());
        assert!(cfg(0.1, 0).validate().is_err());
        assert!(AdvConfig::default().with_alpha(0.0).validate().is_err());
        assert!(AdvConfig::default().with_alpha(1.5).validate().is_err());
        assert!(AdvConfig::default().validate().is_ok());
    }

    fn loss_at(p: &ModelParams, x: &[f64], y: f64) -> f64 {
        let xv = Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
        nll_loss(p, xv.view(), array![y].view()).unwrap()
    }

    proptest! {
        #[test]
        fn output_stays_in_ball(
            w in prop::collection::vec(-3.0f64..3.0, 2..8),
            seed_x in prop::collection::vec(-3.0f64..3.0, 8),
            y in prop::bool::ANY,
            eps in 0.0f64..1.0,
            steps in 1usize..30,
        ) {
            let d = w.len() - 1;
            let p = ModelParams::from_vec(w).unwrap();
            let x = &seed_x[..d];
            let y = f64::from(y);
            let adv = iter_fgsm(&p, x, y, &cfg(eps, steps)).unwrap();
            for (a, o) in adv.iter().zip(x) {
                prop_assert!((a - o).abs() <= eps + 1e-12);
            }
            prop_assert_eq!(&adv, &iter_fgsm(&p, x, y, &cfg(eps, steps)).unwrap());
        }
    }

    #[test]
    fn larger_radius_hurts_more_on_average() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (mut small, mut large) = (0.0, 0.0);
        for _ in 0..100 {
            let d = rng.random_range(1..=10);
            let p = ModelParams::from_vec((0..=d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = f64::from(rng.random_bool(0.5));
            let base = loss_at(&p, &x, y);
            small += loss_at(&p, &iter_fgsm(&p, &x, y, &cfg(0.01, 20)).unwrap(), y) - base;
            large += loss_at(&p, &iter_fgsm(&p, &x, y, &cfg(0.1, 20)).unwrap(), y) - base;
        }
        assert!(large >= small);
    }
}
