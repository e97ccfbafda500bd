//! White-box untargeted attacks.
//!
//! Every attack is a pure procedure `(model, x, t, params) → AttackOutcome`.
//! `grads_used` counts forward–backward passes through
//! [`Classifier::loss_gradient`]; plain forward passes (success checks,
//! traces) are free.

mod bp;
mod cw;
mod ddn;
mod fgsm;

use alloc::vec::Vec;

pub use bp::{
    bp, bp_case_in, bp_case_out, bp_detailed, bp_stage1, bp_stage2, gamma_schedule, BpParams,
    BpRun, QuantMode, Stage1, Stage2, GAMMA_MAX,
};
pub use cw::{cw, AdamState, CwParams};
pub use ddn::{ddn, ddn_next_radius, DdnParams};
pub use fgsm::{fgsm, fgsm_step, ifgsm, pgd2, IFGSM_ALPHA};

use crate::grid::QuantGrid;
use crate::models::{logit_loss, Classifier, Label, Loss, ModelError};
use crate::vector::{l2_distance, normalize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttackError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid attack parameters: {0}")]
    InvalidParams(&'static str),
    /// Target distortion smaller than the current one in case IN.
    #[error("target distortion below the current distortion")]
    InvalidTarget,
}

/// One iterate of an attack path.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceStep {
    pub point: Vec<f64>,
    pub loss: f64,
    pub adversarial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub adversarial: Vec<f64>,
    /// `predict(adversarial) ≠ t`.
    pub success: bool,
    /// `‖adversarial − x‖₂`.
    pub distortion_l2: f64,
    pub grads_used: usize,
    pub trace: Option<Vec<TraceStep>>,
}

/// Settings shared by all attacks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub grid: QuantGrid,
    /// Record every iterate.
    pub trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            grid: QuantGrid::BYTE,
            trace: false,
        }
    }
}

impl RunOptions {
    pub fn traced() -> Self {
        RunOptions {
            trace: true,
            ..Self::default()
        }
    }
}

/// An attack with its parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum Attack {
    Fgsm {
        epsilon: f64,
    },
    Ifgsm {
        epsilon: f64,
        #[cfg_attr(feature = "serde", serde(default = "default_ifgsm_alpha"))]
        alpha: f64,
        iters: usize,
    },
    /// `alpha` defaults to `ε/2`.
    Pgd2 {
        epsilon: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        alpha: Option<f64>,
        iters: usize,
    },
    Cw(CwParams),
    Ddn(DdnParams),
    Bp(BpParams),
}

#[cfg(feature = "serde")]
fn default_ifgsm_alpha() -> f64 {
    IFGSM_ALPHA
}

impl Attack {
    pub fn name(&self) -> &'static str {
        match self {
            Attack::Fgsm { .. } => "fgsm",
            Attack::Ifgsm { .. } => "ifgsm",
            Attack::Pgd2 { .. } => "pgd2",
            Attack::Cw(_) => "cw",
            Attack::Ddn(_) => "ddn",
            Attack::Bp(_) => "bp",
        }
    }

    /// Target distortion of distortion-targeting attacks.
    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            Attack::Fgsm { epsilon }
            | Attack::Ifgsm { epsilon, .. }
            | Attack::Pgd2 { epsilon, .. } => Some(epsilon),
            _ => None,
        }
    }

    /// Same attack with a different target distortion; `None` for
    /// success-targeting attacks.
    pub fn with_epsilon(&self, epsilon: f64) -> Option<Attack> {
        let mut out = self.clone();
        match &mut out {
            Attack::Fgsm { epsilon: e }
            | Attack::Ifgsm { epsilon: e, .. }
            | Attack::Pgd2 { epsilon: e, .. } => {
                *e = epsilon;
                Some(out)
            }
            _ => None,
        }
    }

    /// Upper bound on `grads_used`.
    pub fn gradient_budget(&self) -> usize {
        match self {
            Attack::Fgsm { .. } => 1,
            Attack::Ifgsm { iters, .. } | Attack::Pgd2 { iters, .. } => *iters,
            Attack::Cw(p) => p.search_steps * p.inner_iters,
            Attack::Ddn(p) => p.iters,
            Attack::Bp(p) => p.iters,
        }
    }

    pub fn run<C: Classifier + ?Sized>(
        &self,
        model: &C,
        x: &[f64],
        t: Label,
        opts: &RunOptions,
    ) -> Result<AttackOutcome, AttackError> {
        match self {
            Attack::Fgsm { epsilon } => fgsm(model, x, t, *epsilon, opts),
            Attack::Ifgsm {
                epsilon,
                alpha,
                iters,
            } => ifgsm(model, x, t, *epsilon, *alpha, *iters, opts),
            Attack::Pgd2 {
                epsilon,
                alpha,
                iters,
            } => pgd2(
                model,
                x,
                t,
                *epsilon,
                alpha.unwrap_or(epsilon / 2.0),
                *iters,
                opts,
            ),
            Attack::Cw(p) => cw(model, x, t, p, opts),
            Attack::Ddn(p) => ddn(model, x, t, p, opts),
            Attack::Bp(p) => bp(model, x, t, p, opts),
        }
    }
}

/// `predict(y) ≠ t` from one forward pass.
pub fn is_adversarial<C: Classifier + ?Sized>(
    model: &C,
    y: &[f64],
    t: Label,
) -> Result<bool, AttackError> {
    Ok(crate::models::predict(model, y)? != t)
}

/// Gradient of `loss` at `y`, its 2-normalization (`None` if it vanishes) and
/// whether `y` is adversarial.
pub(crate) struct Direction {
    pub gradient: Vec<f64>,
    pub unit: Option<Vec<f64>>,
    pub adversarial: bool,
}

pub(crate) fn direction<C: Classifier + ?Sized>(
    model: &C,
    y: &[f64],
    t: Label,
    loss: Loss,
) -> Result<Direction, AttackError> {
    let lg = model.loss_gradient(y, t, loss)?;
    let unit = normalize(&lg.gradient).ok();
    Ok(Direction {
        adversarial: lg.probs.argmax() != t,
        gradient: lg.gradient,
        unit,
    })
}

/// Records iterates when tracing is on.
pub(crate) struct Recorder {
    steps: Option<Vec<TraceStep>>,
    loss: Loss,
}

impl Recorder {
    pub fn new(enabled: bool, loss: Loss) -> Self {
        Recorder {
            steps: enabled.then(Vec::new),
            loss,
        }
    }

    pub fn push<C: Classifier + ?Sized>(
        &mut self,
        model: &C,
        y: &[f64],
        t: Label,
    ) -> Result<(), AttackError> {
        if let Some(steps) = &mut self.steps {
            let logits = model.logits(y)?;
            let (probs, loss, _) = logit_loss(&logits, t, self.loss);
            steps.push(TraceStep {
                point: y.to_vec(),
                loss,
                adversarial: probs.argmax() != t,
            });
        }
        Ok(())
    }

    pub fn finish(self) -> Option<Vec<TraceStep>> {
        self.steps
    }
}

/// Builds the outcome; success and distortion are recomputed from `adversarial`.
pub(crate) fn finish<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    adversarial: Vec<f64>,
    grads_used: usize,
    trace: Option<Vec<TraceStep>>,
) -> Result<AttackOutcome, AttackError> {
    let success = is_adversarial(model, &adversarial, t)?;
    let distortion_l2 = l2_distance(&adversarial, x);
    Ok(AttackOutcome {
        adversarial,
        success,
        distortion_l2,
        grads_used,
        trace,
    })
}

/// Best successful candidate seen so far.
#[derive(Debug, Clone, Default)]
pub(crate) struct Best {
    pub point: Option<Vec<f64>>,
    pub distortion: f64,
}

impl Best {
    pub fn new() -> Self {
        Best {
            point: None,
            distortion: f64::INFINITY,
        }
    }

    /// Keeps `candidate` if it is strictly closer to `x`.
    pub fn offer(&mut self, x: &[f64], candidate: &[f64]) -> bool {
        let d = l2_distance(candidate, x);
        if d < self.distortion {
            self.distortion = d;
            self.point = Some(candidate.to_vec());
            true
        } else {
            false
        }
    }
}
