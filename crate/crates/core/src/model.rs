//! Logistic-regression heads: forward pass, summed negative log-likelihood,
//! and analytic gradients with respect to parameters and inputs.
//!
//! Every head carries `d + 1` weights. The last one is the bias and acts on
//! an implicit constant-1 feature, so `θᵀ[x; 1]` is the logit.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Probabilities are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]` before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// Logistic function, evaluated on whichever branch keeps `exp` from overflowing.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn clamped_log_likelihood(p: f64, y: f64) -> f64 {
    let p = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    y * p.ln() + (1.0 - y) * (1.0 - p).ln()
}

/// Parameters of one binary logistic-regression head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ModelParams {
    weights: Array1<f64>,
}

impl ModelParams {
    /// All-zero head for `d` features.
    pub fn zeros(d: usize) -> Self {
        Self {
            weights: Array1::zeros(d + 1),
        }
    }

    /// Builds a head from `d + 1` values, bias last.
    pub fn from_vec(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("parameter vector needs at least the bias entry"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("parameter vector has non-finite entries"));
        }
        Ok(Self {
            weights: Array1::from(weights),
        })
    }

    #[cfg(test)]
    pub(crate) fn from_array_unchecked(weights: Array1<f64>) -> Self {
        Self { weights }
    }

    /// Number of input features `d` (excluding the bias).
    pub fn dim(&self) -> usize {
        self.weights.len() - 1
    }

    /// Full vector including the bias.
    pub fn as_array(&self) -> &Array1<f64> {
        &self.weights
    }

    pub(crate) fn as_array_mut(&mut self) -> &mut Array1<f64> {
        &mut self.weights
    }

    pub fn as_slice(&self) -> &[f64] {
        self.weights.as_slice().expect("owned vector is contiguous")
    }

    /// Feature weights without the bias.
    pub fn feature_weights(&self) -> &[f64] {
        &self.as_slice()[..self.dim()]
    }

    pub fn bias(&self) -> f64 {
        self.weights[self.dim()]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.logit_unchecked(x))
    }

    #[inline]
    pub(crate) fn logit_unchecked(&self, x: &[f64]) -> f64 {
        let w = self.as_slice();
        let mut z = w[w.len() - 1];
        for (wi, xi) in w.iter().zip(x) {
            z += wi * xi;
        }
        z
    }
}

impl TryFrom<Vec<f64>> for ModelParams {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_vec(v)
    }
}

impl From<ModelParams> for Vec<f64> {
    fn from(p: ModelParams) -> Self {
        p.weights.to_vec()
    }
}

/// `sigmoid(θᵀ[x; 1])`.
pub fn predict_proba(params: &ModelParams, x: &[f64]) -> Result<f64> {
    params.logit(x).map(sigmoid)
}

fn check_batch(params: &ModelParams, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::invalid("loss needs at least one sample"));
    }
    check_dim(params.dim(), x.ncols())?;
    check_dim(x.nrows(), y.len())?;
    check_binary_labels(y)
}

pub(crate) fn check_binary_labels(y: ArrayView1<'_, f64>) -> Result<()> {
    match y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        Some(bad) => Err(Error::invalid(format!("label {bad} is not in {{0, 1}}"))),
        None => Ok(()),
    }
}

/// Summed binary cross-entropy `-Σ [y log p + (1 - y) log(1 - p)]`.
///
/// The sum is not divided by `n`.
pub fn nll_loss(params: &ModelParams, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    check_batch(params, x, y)?;
    Ok(nll_loss_unchecked(params, x, y))
}

pub(crate) fn nll_loss_unchecked(params: &ModelParams, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    let mut total = 0.0;
    for (row, &yi) in x.rows().into_iter().zip(y.iter()) {
        let p = sigmoid(params.logit_unchecked(row.as_slice().expect("standard layout")));
        total -= clamped_log_likelihood(p, yi);
    }
    total
}

/// Gradient of [`nll_loss`] with respect to all `d + 1` parameters: `Σ (pᵢ - yᵢ)[xᵢ; 1]`.
pub fn grad_theta(params: &ModelParams, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    check_batch(params, x, y)?;
    let mut grad = Array1::zeros(params.dim() + 1);
    accumulate_grad_theta(params, x, y, 1.0, &mut grad);
    Ok(grad)
}

/// Adds `scale · ∇θ nll` into `grad`. Shapes are the caller's responsibility.
pub(crate) fn accumulate_grad_theta(
    params: &ModelParams,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    scale: f64,
    grad: &mut Array1<f64>,
) {
    let d = params.dim();
    let g = grad.as_slice_mut().expect("owned vector is contiguous");
    for (row, &yi) in x.rows().into_iter().zip(y.iter()) {
        let row = row.as_slice().expect("standard layout");
        let residual = scale * (sigmoid(params.logit_unchecked(row)) - yi);
        for (gj, xj) in g[..d].iter_mut().zip(row) {
            *gj += residual * xj;
        }
        g[d] += residual;
    }
}

/// Gradient of the single-sample loss with respect to the input: `(p - y)·w`.
///
/// The bias coordinate is not an input and does not appear in the result.
pub fn grad_x(params: &ModelParams, x: &[f64], y: f64) -> Result<Array1<f64>> {
    check_dim(params.dim(), x.len())?;
    if y != 0.0 && y != 1.0 {
        return Err(Error::invalid(format!("label {y} is not in {{0, 1}}")));
    }
    let residual = sigmoid(params.logit_unchecked(x)) - y;
    Ok(params.feature_weights().iter().map(|w| residual * w).collect())
}

/// How the outcome space decomposes into binary heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Binary,
    /// `C` mutually exclusive classes, one one-vs-rest head per class.
    MultiClass(usize),
    /// `k` independent binary outcomes.
    MultiLabel(usize),
}

impl TaskKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TaskKind::MultiClass(c) if c < 2 => Err(Error::invalid("multi-class task needs at least 2 classes")),
            TaskKind::MultiLabel(0) => Err(Error::invalid("multi-label task needs at least 1 outcome")),
            _ => Ok(()),
        }
    }

    pub fn n_heads(&self) -> usize {
        match *self {
            TaskKind::Binary => 1,
            TaskKind::MultiClass(c) => c,
            TaskKind::MultiLabel(k) => k,
        }
    }

    /// Number of label columns a dataset of this task stores.
    pub fn label_columns(&self) -> usize {
        match *self {
            TaskKind::Binary | TaskKind::MultiClass(_) => 1,
            TaskKind::MultiLabel(k) => k,
        }
    }

    pub fn is_valid_label(&self, v: f64) -> bool {
        match *self {
            TaskKind::Binary | TaskKind::MultiLabel(_) => v == 0.0 || v == 1.0,
            TaskKind::MultiClass(c) => v >= 0.0 && v.fract() == 0.0 && (v as usize) < c,
        }
    }

    /// Binary target of head `head` for one label row.
    pub fn head_target(&self, labels: &[f64], head: usize) -> f64 {
        match *self {
            TaskKind::Binary => labels[0],
            TaskKind::MultiClass(_) => f64::from(labels[0] as usize == head),
            TaskKind::MultiLabel(_) => labels[head],
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskKind::Binary => write!(f, "binary"),
            TaskKind::MultiClass(c) => write!(f, "multiclass({c})"),
            TaskKind::MultiLabel(k) => write!(f, "multilabel({k})"),
        }
    }
}

/// One head per binary subproblem of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadBank {
    heads: Vec<ModelParams>,
    task: TaskKind,
}

impl HeadBank {
    pub fn new(task: TaskKind, heads: Vec<ModelParams>) -> Result<Self> {
        task.validate()?;
        check_dim(task.n_heads(), heads.len())?;
        let d = heads[0].dim();
        for h in &heads[1..] {
            check_dim(d, h.dim())?;
        }
        Ok(Self { heads, task })
    }

    pub fn zeros(task: TaskKind, d: usize) -> Result<Self> {
        task.validate()?;
        Ok(Self {
            heads: vec![ModelParams::zeros(d); task.n_heads()],
            task,
        })
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn dim(&self) -> usize {
        self.heads[0].dim()
    }

    pub fn heads(&self) -> &[ModelParams] {
        &self.heads
    }

    pub(crate) fn heads_mut(&mut self) -> &mut [ModelParams] {
        &mut self.heads
    }

    /// Per-head scores for one sample.
    ///
    /// Multi-class scores are the one-vs-rest probabilities rescaled to sum to one.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut scores: Vec<f64> = self.heads.iter().map(|h| sigmoid(h.logit_unchecked(x))).collect();
        if let TaskKind::MultiClass(_) = self.task {
            let total: f64 = scores.iter().sum();
            scores.iter_mut().for_each(|s| *s /= total);
        }
        Ok(scores)
    }

    /// Index of the highest-scoring head; first one wins ties.
    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        let scores = self.predict(x)?;
        Ok(argmax(&scores))
    }
}

/// Free-function form of [`HeadBank::predict`].
pub fn bank_predict(bank: &HeadBank, x: &[f64]) -> Result<Vec<f64>> {
    bank.predict(x)
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(v: &[f64]) -> ModelParams {
        ModelParams::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_abs_diff_eq!(sigmoid(40.0), 1.0, epsilon = 1e-15);
        // 1 / (1 + e^2)
        assert_abs_diff_eq!(sigmoid(-2.0), 0.119_202_922_022_117_57, epsilon = 1e-15);
        assert!(sigmoid(700.0).is_finite() && sigmoid(-700.0).is_finite());
        assert!(sigmoid(-700.0) > 0.0);
    }

    #[test]
    fn predict_proba_examples() {
        assert_eq!(predict_proba(&ModelParams::zeros(3), &[1.0, -2.0, 5.0]).unwrap(), 0.5);
        assert_eq!(predict_proba(&params(&[1.0, 0.0]), &[0.0]).unwrap(), 0.5);
        assert_abs_diff_eq!(
            predict_proba(&params(&[2.0, -1.0]), &[1.5]).unwrap(),
            0.880_797_077_977_882_3,
            epsilon = 1e-12
        );
        assert!(matches!(
            predict_proba(&params(&[2.0, -1.0]), &[1.5, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nll_examples() {
        let x = Array2::from_shape_vec((3, 2), vec![0.3, -1.0, 2.0, 0.5, -0.7, 0.1]).unwrap();
        let y = array![1.0, 0.0, 1.0];
        let loss = nll_loss(&ModelParams::zeros(2), x.view(), y.view()).unwrap();
        assert_abs_diff_eq!(loss, 3.0 * std::f64::consts::LN_2, epsilon = 1e-14);

        // -2 log sigmoid(1)
        let x = array![[1.0], [-1.0]];
        let y = array![1.0, 0.0];
        let loss = nll_loss(&params(&[1.0, 0.0]), x.view(), y.view()).unwrap();
        assert_abs_diff_eq!(loss, 0.626_523_375_036_445_6, epsilon = 1e-12);

        let x = array![[1.0], [-1.0]];
        let loss = nll_loss(&params(&[40.0, 0.0]), x.view(), y.view()).unwrap();
        assert!(loss <= 2.0 * 1e-12);
    }

    #[test]
    fn nll_rejects_bad_labels_and_shapes() {
        let x = array![[1.0], [2.0]];
        assert!(nll_loss(&ModelParams::zeros(1), x.view(), array![1.0, 0.5].view()).is_err());
        assert!(nll_loss(&ModelParams::zeros(1), x.view(), array![1.0].view()).is_err());
        assert!(nll_loss(&ModelParams::zeros(2), x.view(), array![1.0, 0.0].view()).is_err());
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(nll_loss(&ModelParams::zeros(1), empty.view(), Array1::zeros(0).view()).is_err());
    }

    #[test]
    fn grad_theta_examples() {
        let g = grad_theta(&ModelParams::zeros(1), array![[1.0]].view(), array![1.0].view()).unwrap();
        assert_eq!(g.to_vec(), vec![-0.5, -0.5]);

        // zero logits give p = 0.5; labels that are not 0/1 are rejected, so check
        // stationarity by pairing each point with its label-flipped twin.
        let x = array![[1.0, 2.0], [1.0, 2.0]];
        let g = grad_theta(&ModelParams::zeros(2), x.view(), array![1.0, 0.0].view()).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn grad_x_examples() {
        let g = grad_x(&params(&[0.0, 0.0, 3.0]), &[1.0, 2.0], 1.0).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        // p = 1 saturates to exactly 1.0 at logit 40
        let g = grad_x(&params(&[40.0, 0.0]), &[1.0], 1.0).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(grad_x(&params(&[1.0, 2.0, 0.0]), &[0.0, 0.0], 1.0).unwrap().len(), 2);
        assert!(grad_x(&params(&[1.0, 0.0]), &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn bank_examples() {
        let bank = HeadBank::zeros(TaskKind::MultiClass(4), 3).unwrap();
        assert_eq!(bank.predict(&[1.0, 2.0, 3.0]).unwrap(), vec![0.25; 4]);

        let bank = HeadBank::zeros(TaskKind::MultiLabel(2), 3).unwrap();
        assert_eq!(bank.predict(&[1.0, 2.0, 3.0]).unwrap(), vec![0.5; 2]);

        let heads = vec![params(&[2.0, 0.0]), params(&[0.0, 0.0]), params(&[-2.0, 0.0])];
        let bank = HeadBank::new(TaskKind::MultiClass(3), heads).unwrap();
        let p = bank.predict(&[1.0]).unwrap();
        let raw = [sigmoid(2.0), 0.5, sigmoid(-2.0)];
        let total: f64 = raw.iter().sum();
        for (pi, ri) in p.iter().zip(raw) {
            assert_abs_diff_eq!(*pi, ri / total, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(p[0], 0.587_198_051_985_255, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.079_468_614_681_411_71, epsilon = 1e-12);
        assert_eq!(bank.predict_class(&[1.0]).unwrap(), 0);
        assert_eq!(bank.predict_class(&[-1.0]).unwrap(), 2);
    }

    #[test]
    fn bank_shape_checks() {
        assert!(HeadBank::zeros(TaskKind::MultiClass(1), 2).is_err());
        assert!(HeadBank::zeros(TaskKind::MultiLabel(0), 2).is_err());
        assert!(HeadBank::new(TaskKind::Binary, vec![ModelParams::zeros(2), ModelParams::zeros(2)]).is_err());
        assert!(HeadBank::new(
            TaskKind::MultiLabel(2),
            vec![ModelParams::zeros(2), ModelParams::zeros(3)]
        )
        .is_err());
    }

    #[test]
    fn params_reject_non_finite() {
        assert!(ModelParams::from_vec(vec![]).is_err());
        assert!(ModelParams::from_vec(vec![1.0, f64::NAN]).is_err());
        assert!(serde_json::from_str::<ModelParams>("[]").is_err());
    }

    #[test]
    fn task_labels() {
        assert!(TaskKind::MultiClass(10).is_valid_label(9.0));
        assert!(!TaskKind::MultiClass(10).is_valid_label(10.0));
        assert!(!TaskKind::MultiClass(10).is_valid_label(1.5));
        assert!(!TaskKind::Binary.is_valid_label(2.0));
        assert_eq!(TaskKind::MultiClass(3).head_target(&[2.0], 2), 1.0);
        assert_eq!(TaskKind::MultiClass(3).head_target(&[2.0], 0), 0.0);
    }

    #[test]
    fn descent_step_does_not_increase_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let d = rng.random_range(1..=10);
            let n = rng.random_range(1..=50);
            let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
            let y = Array1::from_shape_fn(n, |_| f64::from(rng.random_bool(0.5)));
            let p = ModelParams::from_vec((0..=d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let g = grad_theta(&p, x.view(), y.view()).unwrap();
            let stepped = ModelParams::from_array_unchecked(p.as_array() - &(&g * 1e-4));
            let before = nll_loss(&p, x.view(), y.view()).unwrap();
            let after = nll_loss(&stepped, x.view(), y.view()).unwrap();
            assert!(after <= before + 1e-12, "{after} > {before}");
        }
    }
}
