use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    check_input, check_label, logit_loss, Classifier, Dataset, Label, Loss, LossGradient,
    ModelError,
};

/// Negative slope of the hidden-layer LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Mini-batch SGD settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub hidden_sizes: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 0,
            hidden_sizes: vec![128, 128],
        }
    }
}

/// Fully connected layer, `out = W·in + b` with `W` stored row-major (`outputs × inputs`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()),
        );
    }

    /// `Wᵀ·upstream`.
    fn backward_input(&self, upstream: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.inputs];
        for (row, u) in self.weights.chunks_exact(self.inputs).zip(upstream) {
            if *u == 0.0 {
                continue;
            }
            for (g, w) in grad.iter_mut().zip(row) {
                *g += u * w;
            }
        }
        grad
    }
}

/// Multilayer perceptron: affine layers with LeakyReLU between them and a
/// softmax on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
    /// Epochs of training applied so far.
    pub epochs_trained: u32,
    /// Seed used for initialization.
    pub seed: u64,
}

fn leaky(v: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

/// Derivative of LeakyReLU; the kink takes the positive-side slope.
fn leaky_slope(pre: f64) -> f64 {
    if pre >= 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

struct Activations {
    /// Input followed by each layer's post-activation output (logits last).
    outputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
}

impl MlpModel {
    /// He-uniform initialization, zero biases.
    pub fn new(input_dim: usize, hidden_sizes: &[usize], num_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = Vec::with_capacity(hidden_sizes.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden_sizes);
        sizes.push(num_classes);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = libm::sqrt(6.0 / inputs as f64);
                let weights = (0..inputs * outputs)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Dense {
                    inputs,
                    outputs,
                    weights,
                    bias: vec![0.0; outputs],
                }
            })
            .collect();
        MlpModel {
            layers,
            epochs_trained: 0,
            seed,
        }
    }

    /// Builds from explicit layers; adjacent dimensions must chain.
    pub fn from_layers(
        layers: Vec<Dense>,
        epochs_trained: u32,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::InvalidConfig("model needs at least one layer"));
        }
        for layer in &layers {
            if layer.inputs == 0
                || layer.outputs == 0
                || layer.weights.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return Err(ModelError::InvalidConfig(
                    "layer shape does not match its parameters",
                ));
            }
            if !layer
                .weights
                .iter()
                .chain(&layer.bias)
                .all(|v| v.is_finite())
            {
                return Err(ModelError::InvalidConfig("non-finite parameter"));
            }
        }
        if layers.windows(2).any(|w| w[0].outputs != w[1].inputs) {
            return Err(ModelError::InvalidConfig("layer dimensions do not chain"));
        }
        Ok(MlpModel {
            layers,
            epochs_trained,
            seed,
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    fn activations(&self, x: &[f64]) -> Activations {
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len().saturating_sub(1));
        outputs.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&outputs[i], &mut z);
            if i < last {
                let a = z.iter().map(|&v| leaky(v)).collect();
                pre.push(z);
                outputs.push(a);
            } else {
                outputs.push(z);
            }
        }
        Activations { outputs, pre }
    }

    /// Backpropagates `∂ℓ/∂logits` to the input.
    fn backprop_input(&self, acts: &Activations, dlogits: Vec<f64>) -> Vec<f64> {
        let mut upstream = dlogits;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let mut grad = layer.backward_input(&upstream);
            if i > 0 {
                for (g, p) in grad.iter_mut().zip(&acts.pre[i - 1]) {
                    *g *= leaky_slope(*p);
                }
            }
            upstream = grad;
        }
        upstream
    }

    /// Accumulates parameter gradients of the cross-entropy `−ln p_t` into `grads`.
    fn accumulate_param_grads(&self, x: &[f64], label: Label, grads: &mut [Dense]) {
        let acts = self.activations(x);
        let logits = acts.outputs.last().expect("at least one layer");
        let (_, _, dlog) = logit_loss(logits, label, Loss::Nll);
        // descend −ln p_t, whose logit gradient is the negation of ∂(ln p_t)
        let mut upstream: Vec<f64> = dlog.iter().map(|g| -g).collect();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts.outputs[i];
            let acc = &mut grads[i];
            for ((row, b), u) in acc
                .weights
                .chunks_exact_mut(layer.inputs)
                .zip(&mut acc.bias)
                .zip(&upstream)
            {
                *b += u;
                if *u == 0.0 {
                    continue;
                }
                for (w, a) in row.iter_mut().zip(input) {
                    *w += u * a;
                }
            }
            if i > 0 {
                let mut grad = layer.backward_input(&upstream);
                for (g, p) in grad.iter_mut().zip(&acts.pre[i - 1]) {
                    *g *= leaky_slope(*p);
                }
                upstream = grad;
            }
        }
    }

    /// Fraction of correctly predicted examples.
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let correct = data
            .iter()
            .filter(|(x, t)| {
                self.logits(x)
                    .map(|z| super::argmax(&z) == *t)
                    .unwrap_or(false)
            })
            .count();
        correct as f64 / data.len() as f64
    }
}

/// Mini-batch SGD on the cross-entropy, starting from `model`.
///
/// Deterministic for a fixed `cfg.seed`. `cfg.hidden_sizes` is only used
/// when building a fresh model with [`MlpModel::new`].
pub fn train_sgd(
    model: &MlpModel,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<MlpModel, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(ModelError::InvalidConfig("batch_size must be positive"));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(ModelError::InvalidConfig("learning_rate must be positive"));
    }
    check_input(model.input_dim(), &data.images()[0])?;
    for &t in data.labels() {
        check_label(model.num_classes(), t)?;
    }

    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads: Vec<Dense> = model
        .layers
        .iter()
        .map(|l| Dense {
            inputs: l.inputs,
            outputs: l.outputs,
            weights: vec![0.0; l.weights.len()],
            bias: vec![0.0; l.outputs],
        })
        .collect();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            for g in grads.iter_mut() {
                g.weights.iter_mut().for_each(|v| *v = 0.0);
                g.bias.iter_mut().for_each(|v| *v = 0.0);
            }
            for &idx in batch {
                model.accumulate_param_grads(&data.images()[idx], data.labels()[idx], &mut grads);
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (layer, g) in model.layers.iter_mut().zip(&grads) {
                for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                    *w -= step * gw;
                }
                for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                    *b -= step * gb;
                }
            }
        }
        model.epochs_trained += 1;
    }
    Ok(model)
}

impl Classifier for MlpModel {
    fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_input(self.input_dim(), x)?;
        let mut acts = self.activations(x);
        Ok(acts.outputs.pop().expect("logits"))
    }

    fn loss_gradient(
        &self,
        x: &[f64],
        label: Label,
        loss: Loss,
    ) -> Result<LossGradient, ModelError> {
        check_input(self.input_dim(), x)?;
        check_label(self.num_classes(), label)?;
        let acts = self.activations(x);
        let (probs, value, dlogits) = logit_loss(acts.outputs.last().expect("logits"), label, loss);
        let gradient = self.backprop_input(&acts, dlogits);
        Ok(LossGradient {
            probs,
            loss: value,
            gradient,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::input_gradient;

    fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|j| {
                probe[j] = x[j] + h;
                let up = f(&probe);
                probe[j] = x[j] - h;
                let down = f(&probe);
                probe[j] = x[j];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff = crate::vector::l2_distance(a, b);
        diff / crate::vector::l2_norm(a)
            .max(crate::vector::l2_norm(b))
            .max(1e-300)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let model = MlpModel::new(12, &[9, 7], 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
            let t = rng.random_range(0..4);
            let g = input_gradient(&model, &x, t, Loss::Nll).unwrap();
            let fd = central_difference(
                |y| {
                    let z = model.logits(y).unwrap();
                    logit_loss(&z, t, Loss::Nll).1
                },
                &x,
                1e-5,
            );
            assert!(rel_err(&g, &fd) <= 1e-6, "nll rel err {}", rel_err(&g, &fd));

            let g = input_gradient(&model, &x, t, Loss::Margin(0.3)).unwrap();
            let fd = central_difference(
                |y| {
                    let z = model.logits(y).unwrap();
                    logit_loss(&z, t, Loss::Margin(0.3)).1
                },
                &x,
                1e-5,
            );
            if crate::vector::l2_norm(&fd) > 0.0 {
                assert!(rel_err(&g, &fd) <= 1e-6);
            }
        }
    }

    #[test]
    fn forward_is_probability_vector() {
        let model = MlpModel::new(5, &[4], 3, 1);
        let p = model.forward(&[0.1, 0.9, 0.3, 0.0, 1.0]).unwrap();
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(
            model.forward(&[0.1, 0.2]),
            Err(ModelError::DimensionMismatch {
                expected: 5,
                got: 2
            })
        );
    }

    #[test]
    fn leaky_kink_uses_positive_slope() {
        assert_eq!(leaky_slope(0.0), 1.0);
        assert_eq!(leaky_slope(-1e-300), LEAKY_SLOPE);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let model = MlpModel::new(2, &[4], 2, 9);
        let data = Dataset::new(alloc::vec![alloc::vec![0.1, 0.2]], alloc::vec![1]).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert_eq!(train_sgd(&model, &data, &cfg).unwrap(), model);
    }

    #[test]
    fn empty_dataset_rejected() {
        let model = MlpModel::new(2, &[4], 2, 9);
        let data = Dataset::new(alloc::vec![], alloc::vec![]).unwrap();
        assert_eq!(
            train_sgd(&model, &data, &TrainConfig::default()),
            Err(ModelError::EmptyDataset)
        );
    }

    #[test]
    fn separable_toy_and_determinism() {
        // two clusters split by x0 + x1 = 1
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut images = Vec::new();
        let mut labels = Vec::new();
        while images.len() < 200 {
            let p: [f64; 2] = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let s = p[0] + p[1] - 1.0;
            if s.abs() < 0.1 {
                continue;
            }
            images.push(p.to_vec());
            labels.push(usize::from(s > 0.0));
        }
        let data = Dataset::new(images, labels).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 16,
            learning_rate: 0.2,
            seed: 2,
            hidden_sizes: alloc::vec![8],
        };
        let init = MlpModel::new(2, &cfg.hidden_sizes, 2, cfg.seed);
        let a = train_sgd(&init, &data, &cfg).unwrap();
        let b = train_sgd(&init, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.accuracy(&data), 1.0);
        assert_eq!(a.epochs_trained, 50);
    }
}
