//! Multinomial logistic regression trained with mini-batch SGD.
//!
//! This is the per-bucket classifier inside the ensemble, but it is a
//! complete standalone learner: dense weights over sparse inputs, stabilized
//! softmax, mean cross-entropy loss, and a deterministic training schedule.
//! Determinism is load-bearing: given the same dataset, configuration, and
//! shuffle seed, training produces bit-identical weights, which is what lets
//! ensemble members train on any worker layout with identical results.

use std::collections::BTreeMap;

use crate::data::{shuffled_indices, Dataset, SparseVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Number of passes over the data.
    pub epochs: usize,
    /// Examples per gradient step; the final batch of an epoch may be smaller.
    pub batch_size: usize,
    /// Initial step size. Zero is allowed and leaves the model at its
    /// initialization, which makes "no learning" an expressible baseline.
    pub learning_rate: f64,
    /// Per-epoch multiplicative decay of the step size.
    pub lr_decay: f64,
    /// Seed for the per-epoch example shuffle.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.1,
            lr_decay: 0.9,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    /// Checks that every hyperparameter is usable.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be at least 1".into(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !self.lr_decay.is_finite() || self.lr_decay <= 0.0 || self.lr_decay > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "learning-rate decay must lie in (0, 1], got {}",
                self.lr_decay
            )));
        }
        Ok(())
    }
}

/// A linear softmax classifier: `classes x dim` weights plus per-class bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel<F> {
    weights: Vec<F>,
    bias: Vec<F>,
    classes: usize,
    dim: usize,
}

impl<F: Scalar> SoftmaxModel<F> {
    /// The all-zero model, which predicts the uniform distribution.
    pub fn zeros(classes: usize, dim: usize) -> Self {
        SoftmaxModel {
            weights: vec![F::zero(); classes * dim],
            bias: vec![F::zero(); classes],
            classes,
            dim,
        }
    }

    /// Reassembles a model from raw parts, checking shapes and finiteness.
    pub fn from_parts(weights: Vec<F>, bias: Vec<F>, classes: usize, dim: usize) -> Result<Self> {
        if weights.len() != classes * dim {
            return Err(Error::DimensionMismatch {
                what: "softmax weight matrix",
                expected: classes * dim,
                got: weights.len(),
            });
        }
        if bias.len() != classes {
            return Err(Error::DimensionMismatch {
                what: "softmax bias vector",
                expected: classes,
                got: bias.len(),
            });
        }
        let model = SoftmaxModel {
            weights,
            bias,
            classes,
            dim,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks that every parameter is finite.
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().chain(self.bias.iter()).any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "softmax model holds non-finite parameters".into(),
            ));
        }
        Ok(())
    }

    /// Number of output classes.
    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Input feature dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Full weight matrix, row-major by class.
    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    /// Bias vector.
    pub fn bias(&self) -> &[F] {
        &self.bias
    }

    /// Weight row of one class.
    pub fn weight_row(&self, class: usize) -> &[F] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    /// Writes the raw logits of `x` into `out`.
    pub fn logits_into(&self, x: &SparseVector<F>, out: &mut [F]) -> Result<()> {
        if out.len() != self.classes {
            return Err(Error::DimensionMismatch {
                what: "logit buffer",
                expected: self.classes,
                got: out.len(),
            });
        }
        if let Some(max) = x.max_index() {
            if max as usize >= self.dim {
                return Err(Error::FeatureOutOfRange {
                    index: max as u64,
                    dim: self.dim as u64,
                });
            }
        }
        for (c, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[c * self.dim..(c + 1) * self.dim];
            let mut acc = self.bias[c];
            for (idx, v) in x.iter() {
                acc += row[idx as usize] * v;
            }
            *slot = acc;
        }
        Ok(())
    }

    /// Class probabilities of `x`, written into `out`.
    ///
    /// Computed through max-subtracted exponentials, so large logits cannot
    /// overflow; the result sums to 1 up to float rounding.
    pub fn predict_proba_into(&self, x: &SparseVector<F>, out: &mut [F]) -> Result<()> {
        self.logits_into(x, out)?;
        softmax_in_place(out);
        Ok(())
    }

    /// Class probabilities of `x` as a fresh vector.
    pub fn predict_proba(&self, x: &SparseVector<F>) -> Result<Vec<F>> {
        let mut out = vec![F::zero(); self.classes];
        self.predict_proba_into(x, &mut out)?;
        Ok(out)
    }

    /// Most probable class of `x`; ties go to the smallest class id.
    pub fn predict_class(&self, x: &SparseVector<F>) -> Result<usize> {
        let mut logits = vec![F::zero(); self.classes];
        self.logits_into(x, &mut logits)?;
        Ok(argmax(&logits).expect("a model always has at least one class"))
    }
}

/// Index of the largest value, ties broken toward the smallest index.
pub fn argmax<F: PartialOrd + Copy>(values: &[F]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if !(*v > values[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Exponentiates and normalizes logits in place; returns the log-sum-exp.
fn softmax_in_place<F: Scalar>(logits: &mut [F]) -> F {
    let max = logits
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut sum = F::zero();
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z = *z / sum;
    }
    max + sum.ln()
}

/// Mean cross-entropy gradient of a batch, plus the batch's mean loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<F> {
    /// `classes x dim` weight gradient, row-major by class.
    pub weights: Vec<F>,
    /// Per-class bias gradient.
    pub bias: Vec<F>,
    /// Mean cross-entropy loss over the batch.
    pub loss: F,
}

/// Raw (unaveraged) gradient sums of one batch, sparse over feature columns.
struct BatchSums<F> {
    columns: BTreeMap<u32, Vec<F>>,
    bias: Vec<F>,
    loss: F,
}

/// Accumulates gradient and loss sums over `batch` in the given order.
///
/// Both [`gradient`] and [`train`] reduce through this one function with the
/// same floating-point operation order, so a single optimizer step equals
/// `w - lr * gradient(...)` bit for bit.
fn accumulate_batch<F: Scalar>(
    model: &SoftmaxModel<F>,
    ds: &Dataset<F>,
    batch: &[usize],
    labels: &impl Fn(usize) -> usize,
) -> Result<BatchSums<F>> {
    let classes = model.classes;
    let mut columns: BTreeMap<u32, Vec<F>> = BTreeMap::new();
    let mut bias = vec![F::zero(); classes];
    let mut loss = F::zero();
    let mut buf = vec![F::zero(); classes];
    let mut delta = vec![F::zero(); classes];
    for &i in batch {
        let y = labels(i);
        if y >= classes {
            return Err(Error::LabelOutOfRange {
                label: y as u64,
                classes: classes as u64,
            });
        }
        let x = ds.feature(i);
        model.logits_into(x, &mut buf)?;
        let z_y = buf[y];
        let lse = softmax_in_place(&mut buf);
        loss += lse - z_y;
        for c in 0..classes {
            delta[c] = buf[c] - if c == y { F::one() } else { F::zero() };
            bias[c] += delta[c];
        }
        for (idx, v) in x.iter() {
            let col = columns
                .entry(idx)
                .or_insert_with(|| vec![F::zero(); classes]);
            for c in 0..classes {
                col[c] += delta[c] * v;
            }
        }
    }
    Ok(BatchSums { columns, bias, loss })
}

/// Mean cross-entropy gradient of `model` on the given batch of examples.
///
/// `batch` holds example indices into `ds`; `labels(i)` supplies the class of
/// example `i`, which lets the same dataset serve many relabelings.
pub fn gradient<F: Scalar>(
    model: &SoftmaxModel<F>,
    ds: &Dataset<F>,
    batch: &[usize],
    labels: impl Fn(usize) -> usize,
) -> Result<Gradient<F>> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter(
            "gradient needs a non-empty batch".into(),
        ));
    }
    let sums = accumulate_batch(model, ds, batch, &labels)?;
    let n = F::cast_usize(batch.len());
    let mut weights = vec![F::zero(); model.classes * model.dim];
    for (&idx, col) in &sums.columns {
        for c in 0..model.classes {
            weights[c * model.dim + idx as usize] = col[c] / n;
        }
    }
    let bias = sums.bias.iter().map(|&g| g / n).collect();
    Ok(Gradient {
        weights,
        bias,
        loss: sums.loss / n,
    })
}

/// Mean cross-entropy loss of `model` over the whole dataset.
pub fn mean_loss<F: Scalar>(
    model: &SoftmaxModel<F>,
    ds: &Dataset<F>,
    labels: impl Fn(usize) -> usize,
) -> Result<F> {
    if ds.is_empty() {
        return Err(Error::InvalidParameter(
            "loss of an empty dataset is undefined".into(),
        ));
    }
    let mut buf = vec![F::zero(); model.classes];
    let mut loss = F::zero();
    for i in 0..ds.len() {
        let y = labels(i);
        if y >= model.classes {
            return Err(Error::LabelOutOfRange {
                label: y as u64,
                classes: model.classes as u64,
            });
        }
        model.logits_into(ds.feature(i), &mut buf)?;
        let z_y = buf[y];
        let lse = softmax_in_place(&mut buf);
        loss += lse - z_y;
    }
    Ok(loss / F::cast_usize(ds.len()))
}

/// Trains a softmax classifier from zero initialization.
///
/// Each epoch shuffles example order with a seed derived from
/// `(cfg.shuffle_seed, epoch)`, walks the permutation in mini-batches, and
/// applies one mean-gradient step per batch at rate
/// `learning_rate * lr_decay^epoch`. The result is a pure function of
/// `(ds, labels, classes, cfg)`. A non-finite batch loss aborts training
/// with the offending epoch and batch in the error.
pub fn train<F: Scalar>(
    ds: &Dataset<F>,
    labels: impl Fn(usize) -> usize,
    classes: usize,
    cfg: &TrainConfig,
) -> Result<SoftmaxModel<F>> {
    cfg.validate()?;
    if classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "softmax training needs at least 2 classes, got {classes}"
        )));
    }
    if ds.is_empty() {
        return Err(Error::InvalidParameter(
            "softmax training needs at least one example".into(),
        ));
    }
    let mut model = SoftmaxModel::zeros(classes, ds.dim());
    let dim = ds.dim();
    for epoch in 0..cfg.epochs {
        let lr = F::cast(cfg.learning_rate * cfg.lr_decay.powi(epoch as i32));
        let order = shuffled_indices(ds.len(), cfg.shuffle_seed, epoch as u64);
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            let sums = accumulate_batch(&model, ds, batch, &labels)?;
            let n = F::cast_usize(batch.len());
            if !(sums.loss / n).is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            for (&idx, col) in &sums.columns {
                for c in 0..classes {
                    model.weights[c * dim + idx as usize] -= lr * (col[c] / n);
                }
            }
            for c in 0..classes {
                model.bias[c] -= lr * (sums.bias[c] / n);
            }
        }
    }
    model.validate()?;
    Ok(model)
}
