use alloc::vec;
use alloc::vec::Vec;

use super::{
    check_input, check_label, logit_loss, Classifier, Label, Loss, LossGradient, ModelError,
};

/// Closed-form binary classifier on the plane.
///
/// Logits are `(0, s(y))` with the elliptic score
/// `s(y) = κ·(‖A(y − c)‖ − 1)`, `A = diag(1/a₀, 1/a₁)`: class 0 inside the
/// ellipse of semi-axes `(a₀, a₁)` centered at `c`, class 1 outside. With
/// equal semi-axes the score is radial and so is its gradient.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Toy2DModel {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    pub sharpness: f64,
}

impl Default for Toy2DModel {
    fn default() -> Self {
        Toy2DModel {
            center: [0.5, 0.45],
            semi_axes: [0.4, 0.22],
            sharpness: 10.0,
        }
    }
}

impl Toy2DModel {
    pub fn radial(center: [f64; 2], radius: f64, sharpness: f64) -> Self {
        Toy2DModel {
            center,
            semi_axes: [radius, radius],
            sharpness,
        }
    }

    fn scaled_offset(&self, y: &[f64]) -> [f64; 2] {
        [
            (y[0] - self.center[0]) / self.semi_axes[0],
            (y[1] - self.center[1]) / self.semi_axes[1],
        ]
    }

    /// Class-1 logit `s(y)`.
    pub fn score(&self, y: &[f64]) -> f64 {
        let [u, v] = self.scaled_offset(y);
        self.sharpness * (libm::hypot(u, v) - 1.0)
    }

    /// `∇s(y)`; zero at the center, where the score is not differentiable.
    pub fn score_gradient(&self, y: &[f64]) -> [f64; 2] {
        let [u, v] = self.scaled_offset(y);
        let rho = libm::hypot(u, v);
        if rho == 0.0 {
            return [0.0, 0.0];
        }
        let k = self.sharpness / rho;
        [k * u / self.semi_axes[0], k * v / self.semi_axes[1]]
    }
}

impl Classifier for Toy2DModel {
    fn input_dim(&self) -> usize {
        2
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_input(2, x)?;
        Ok(vec![0.0, self.score(x)])
    }

    fn loss_gradient(
        &self,
        x: &[f64],
        label: Label,
        loss: Loss,
    ) -> Result<LossGradient, ModelError> {
        check_input(2, x)?;
        check_label(2, label)?;
        let (probs, value, dlogits) = logit_loss(&[0.0, self.score(x)], label, loss);
        let ds = self.score_gradient(x);
        let gradient = vec![dlogits[1] * ds[0], dlogits[1] * ds[1]];
        Ok(LossGradient {
            probs,
            loss: value,
            gradient,
        })
    }
}
