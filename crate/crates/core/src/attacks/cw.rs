//! Carlini–Wagner 2-norm attack.
//!
//! Minimizes `‖σ(w) − x‖² + λ·ℓ_m(f(σ(w)), t)` over `w` with Adam, for a
//! short sequence of `λ` values: `λ` grows tenfold after a stage without
//! success and moves to the geometric midpoint of the bracket after a
//! successful one.

use alloc::vec;
use alloc::vec::Vec;

use super::{finish, AttackError, AttackOutcome, Best, Recorder, RunOptions};
use crate::models::{predict, Classifier, Label, Loss};

/// Pixels are pulled this far inside `(0,1)` before the change of variable.
const NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CwParams {
    pub lambda0: f64,
    pub search_steps: usize,
    pub inner_iters: usize,
    pub learning_rate: f64,
    pub margin: f64,
}

impl Default for CwParams {
    fn default() -> Self {
        CwParams {
            lambda0: 1.0,
            search_steps: 5,
            inner_iters: 20,
            learning_rate: 0.5,
            margin: 0.0,
        }
    }
}

impl CwParams {
    fn validate(&self) -> Result<(), AttackError> {
        if self.search_steps == 0 {
            return Err(AttackError::InvalidParams(
                "cw needs at least one search step",
            ));
        }
        if !(self.lambda0 >= 0.0 && self.learning_rate > 0.0 && self.margin >= 0.0) {
            return Err(AttackError::InvalidParams(
                "cw lambda0, learning_rate and margin must be nonnegative",
            ));
        }
        Ok(())
    }
}

/// Adam moments for one optimized vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub steps: u32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            steps: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected descent step on `params`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], learning_rate: f64) {
        self.steps += 1;
        let c1 = 1.0 - libm::pow(self.beta1, f64::from(self.steps));
        let c2 = 1.0 - libm::pow(self.beta2, f64::from(self.steps));
        for (((w, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= learning_rate * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
    }
}

fn sigmoid(w: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-w))
}

fn logit(y: f64) -> f64 {
    libm::log(y / (1.0 - y))
}

pub fn cw<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    p: &CwParams,
    opts: &RunOptions,
) -> Result<AttackOutcome, AttackError> {
    p.validate()?;
    let loss = Loss::Margin(p.margin);
    let mut rec = Recorder::new(opts.trace, loss);
    rec.push(model, x, t)?;
    let w0: Vec<f64> = x
        .iter()
        .map(|&v| logit(v * (1.0 - 2.0 * NUDGE) + NUDGE))
        .collect();

    let mut lambda = p.lambda0;
    let (mut lo, mut hi) = (None::<f64>, None::<f64>);
    let mut best = Best::new();
    let mut last = opts.grid.round(x);
    let mut grads = 0;
    for _ in 0..p.search_steps {
        let mut w = w0.clone();
        let mut adam = AdamState::new(x.len());
        let mut stage_success = false;
        for _ in 0..p.inner_iters {
            let y: Vec<f64> = w.iter().map(|&v| sigmoid(v)).collect();
            let lg = model.loss_gradient(&y, t, loss)?;
            grads += 1;
            let grad_w: Vec<f64> = y
                .iter()
                .zip(x)
                .zip(&lg.gradient)
                .map(|((yy, xx), g)| (2.0 * (yy - xx) + lambda * g) * yy * (1.0 - yy))
                .collect();
            adam.step(&mut w, &grad_w, p.learning_rate);

            let y: Vec<f64> = w.iter().map(|&v| sigmoid(v)).collect();
            rec.push(model, &y, t)?;
            let candidate = opts.grid.round(&y);
            if predict(model, &candidate)? != t {
                stage_success = true;
                best.offer(x, &candidate);
            }
            last = candidate;
        }
        if stage_success {
            hi = Some(lambda);
            lambda = match lo {
                Some(l) => libm::sqrt(l * lambda),
                None => lambda / 10.0,
            };
        } else {
            lo = Some(lambda);
            lambda = match hi {
                Some(h) => libm::sqrt(lambda * h),
                None => lambda * 10.0,
            };
        }
    }
    let result = best.point.unwrap_or(last);
    finish(model, x, t, result, grads, rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::boundary_crossing_stats;
    use crate::grid::QuantGrid;
    use crate::models::Toy2DModel;

    #[test]
    fn adam_first_step_is_learning_rate() {
        let mut adam = AdamState::new(3);
        let mut w = [0.0, 1.0, -2.0];
        adam.step(&mut w, &[0.3, -4.0, 1e-3], 0.5);
        assert!((w[0] + 0.5).abs() < 1e-6);
        assert!((w[1] - 1.5).abs() < 1e-6);
        assert!((w[2] + 2.5).abs() < 1e-4);
        assert_eq!(adam.steps, 1);
    }

    #[test]
    fn zero_lambda_fails() {
        let m = Toy2DModel::default();
        let p = CwParams {
            lambda0: 0.0,
            ..CwParams::default()
        };
        let out = cw(&m, &[0.5, 0.5], 0, &p, &RunOptions::default()).unwrap();
        assert!(!out.success);
        assert!(out.distortion_l2 < 0.01);
    }

    #[test]
    fn succeeds_on_toy_with_grid_output() {
        let m = Toy2DModel::default();
        let p = CwParams {
            learning_rate: 0.05,
            lambda0: 0.1,
            ..CwParams::default()
        };
        let out = cw(&m, &[0.5, 0.5], 0, &p, &RunOptions::default()).unwrap();
        assert!(out.success);
        assert!(QuantGrid::BYTE.is_on_grid(&out.adversarial));
        assert_eq!(out.grads_used, 100);
        // the nearest boundary point is (0.5, 0.67)
        assert!(out.distortion_l2 < 0.3, "{}", out.distortion_l2);
    }

    #[test]
    fn oscillates_around_margin_on_toy() {
        let m = Toy2DModel::default();
        let p = CwParams {
            learning_rate: 0.1,
            lambda0: 0.1,
            search_steps: 1,
            inner_iters: 100,
            ..CwParams::default()
        };
        let out = cw(&m, &[0.42, 0.52], 0, &p, &RunOptions::traced()).unwrap();
        let flags: Vec<bool> = out.trace.unwrap().iter().map(|s| s.adversarial).collect();
        assert!(boundary_crossing_stats(&flags).crossings >= 2);
    }
}
