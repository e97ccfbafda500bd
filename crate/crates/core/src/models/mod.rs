//! Differentiable classifiers, class probabilities and attack losses.
//!
//! A [`Classifier`] exposes class probabilities and the gradient of an attack
//! loss with respect to its *input*. Parameters never change while an attack
//! runs.

mod data;
mod mlp;
mod toy;

use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

pub use data::{make_two_moons, Dataset};
pub use mlp::{train_sgd, Dense, MlpModel, TrainConfig, LEAKY_SLOPE};
pub use toy::Toy2DModel;

/// Class index in `[0, c)`.
pub type Label = usize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("input has length {got}, classifier expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: Label, classes: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("image {index} has a value outside [0,1]")]
    OutOfRange { index: usize },
    #[error("not a probability vector")]
    InvalidProbabilities,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Classification loss `ℓ(p, t)` descended by the attacks.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Loss {
    /// `log p_t`, the negated cross-entropy.
    Nll,
    /// `[log p_t − max_{k≠t} log p_k + m]₊` with margin `m ≥ 0`.
    Margin(f64),
}

/// Probabilities over `c` classes; nonnegative and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates nonnegativity and unit sum (to 1e−9).
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        let sum: f64 = probs.iter().sum();
        let valid = !probs.is_empty()
            && probs.iter().all(|p| (0.0..=1.0).contains(p))
            && (sum - 1.0).abs() <= 1e-9;
        if valid {
            Ok(ProbVector(probs))
        } else {
            Err(ModelError::InvalidProbabilities)
        }
    }

    /// Numerically stable softmax.
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
        let total: f64 = exps.iter().sum();
        ProbVector(exps.into_iter().map(|e| e / total).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> Label {
        argmax(&self.0)
    }
}

/// Lowest index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Output of one forward–backward pass.
#[derive(Debug, Clone)]
pub struct LossGradient {
    pub probs: ProbVector,
    pub loss: f64,
    /// `∇ₓ ℓ(f(x), t)`.
    pub gradient: Vec<f64>,
}

pub trait Classifier {
    fn input_dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    /// Unnormalized log-probabilities.
    fn logits(&self, x: &[f64]) -> Result<Vec<f64>, ModelError>;

    /// One forward and one backward pass: probabilities, loss and input gradient.
    fn loss_gradient(
        &self,
        x: &[f64],
        label: Label,
        loss: Loss,
    ) -> Result<LossGradient, ModelError>;

    fn forward(&self, x: &[f64]) -> Result<ProbVector, ModelError> {
        Ok(ProbVector::from_logits(&self.logits(x)?))
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn logits(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        (**self).logits(x)
    }
    fn loss_gradient(
        &self,
        x: &[f64],
        label: Label,
        loss: Loss,
    ) -> Result<LossGradient, ModelError> {
        (**self).loss_gradient(x, label, loss)
    }
    fn forward(&self, x: &[f64]) -> Result<ProbVector, ModelError> {
        (**self).forward(x)
    }
}

/// Predicted label `arg max_k f(x)_k`.
pub fn predict<C: Classifier + ?Sized>(model: &C, x: &[f64]) -> Result<Label, ModelError> {
    Ok(model.forward(x)?.argmax())
}

/// `∇ₓ ℓ(f(x), t)` for the chosen loss.
pub fn input_gradient<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    label: Label,
    loss: Loss,
) -> Result<Vec<f64>, ModelError> {
    Ok(model.loss_gradient(x, label, loss)?.gradient)
}

/// `ℓ(p, t) = ln p_t`; `−∞` when `p_t = 0`.
pub fn nll_loss(p: &ProbVector, t: Label) -> f64 {
    let pt = p.0[t];
    if pt <= 0.0 {
        f64::NEG_INFINITY
    } else {
        libm::log(pt)
    }
}

/// `[ln p_t − max_{k≠t} ln p_k + m]₊`.
pub fn margin_loss(p: &ProbVector, t: Label, margin: f64) -> f64 {
    let rival =
        p.0.iter()
            .enumerate()
            .filter(|(k, _)| *k != t)
            .map(|(_, &q)| q)
            .fold(f64::NEG_INFINITY, f64::max);
    let value = libm::log(p.0[t]) - libm::log(rival) + margin;
    if value.is_nan() {
        0.0
    } else {
        value.max(0.0)
    }
}

/// Loss value and `∂ℓ/∂logits` computed in log space from raw logits.
pub(crate) fn logit_loss(logits: &[f64], label: Label, loss: Loss) -> (ProbVector, f64, Vec<f64>) {
    let probs = ProbVector::from_logits(logits);
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|z| libm::exp(z - max)).sum::<f64>());
    match loss {
        Loss::Nll => {
            let value = logits[label] - lse;
            let mut grad: Vec<f64> = probs.0.iter().map(|p| -p).collect();
            grad[label] += 1.0;
            (probs, value, grad)
        }
        Loss::Margin(m) => {
            let mut rival = usize::MAX;
            for (k, z) in logits.iter().enumerate() {
                if k != label && (rival == usize::MAX || *z > logits[rival]) {
                    rival = k;
                }
            }
            let mut grad = vec![0.0; logits.len()];
            let raw = logits[label] - logits[rival] + m;
            if raw > 0.0 {
                grad[label] = 1.0;
                grad[rival] = -1.0;
            }
            (probs, raw.max(0.0), grad)
        }
    }
}

pub(crate) fn check_input(expected: usize, x: &[f64]) -> Result<(), ModelError> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch {
            expected,
            got: x.len(),
        })
    }
}

pub(crate) fn check_label(classes: usize, label: Label) -> Result<(), ModelError> {
    if label < classes {
        Ok(())
    } else {
        Err(ModelError::LabelOutOfRange { label, classes })
    }
}

/// Wraps a classifier and counts forward–backward passes.
pub struct CountingClassifier<C> {
    inner: C,
    gradient_calls: Cell<usize>,
}

impl<C: Classifier> CountingClassifier<C> {
    pub fn new(inner: C) -> Self {
        CountingClassifier {
            inner,
            gradient_calls: Cell::new(0),
        }
    }

    pub fn gradient_calls(&self) -> usize {
        self.gradient_calls.get()
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: Classifier> Classifier for CountingClassifier<C> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }
    fn logits(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.inner.logits(x)
    }
    fn loss_gradient(
        &self,
        x: &[f64],
        label: Label,
        loss: Loss,
    ) -> Result<LossGradient, ModelError> {
        self.gradient_calls.set(self.gradient_calls.get() + 1);
        self.inner.loss_gradient(x, label, loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn argmax_and_ties() {
        assert_eq!(probs(&[0.1, 0.7, 0.2]).argmax(), 1);
        assert_eq!(probs(&[0.5, 0.5]).argmax(), 0);
        assert_eq!(probs(&[0.25, 0.25, 0.25, 0.25]).argmax(), 0);
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(alloc::vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(alloc::vec![-0.1, 1.1]).is_err());
        assert!(ProbVector::new(alloc::vec![]).is_err());
        let p = ProbVector::from_logits(&[1000.0, 0.0, -1000.0]);
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nll_values() {
        assert_eq!(nll_loss(&probs(&[1.0, 0.0]), 0), 0.0);
        let e = libm::exp(-1.0);
        assert!((nll_loss(&probs(&[e, 1.0 - e]), 0) + 1.0).abs() < 1e-15);
        assert!((nll_loss(&probs(&[0.6, 0.4]), 0) - (-0.5108256237659907)).abs() < 1e-12);
        assert_eq!(nll_loss(&probs(&[1.0, 0.0]), 1), f64::NEG_INFINITY);
    }

    #[test]
    fn margin_values() {
        let v = margin_loss(&probs(&[0.6, 0.4]), 0, 0.0);
        assert!((v - libm::log(1.5)).abs() < 1e-12);
        assert!((v - 0.4055).abs() < 1e-4);
        assert_eq!(margin_loss(&probs(&[0.1, 0.9]), 0, 1.0), 0.0);
        assert_eq!(margin_loss(&probs(&[0.5, 0.5]), 0, 0.0), 0.0);
    }

    #[test]
    fn logit_loss_matches_probability_losses() {
        let logits = [0.3, -1.2, 2.0, 0.0];
        let (p, nll, _) = logit_loss(&logits, 2, Loss::Nll);
        assert!((nll - nll_loss(&p, 2)).abs() < 1e-12);
        let (p, marg, g) = logit_loss(&logits, 2, Loss::Margin(0.5));
        assert!((marg - margin_loss(&p, 2, 0.5)).abs() < 1e-12);
        assert_eq!(g, alloc::vec![-1.0, 0.0, 1.0, 0.0]);
        let (_, marg, g) = logit_loss(&logits, 1, Loss::Margin(0.0));
        assert_eq!(marg, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }
}
