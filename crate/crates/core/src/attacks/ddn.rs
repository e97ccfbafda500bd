//! Decoupled direction and norm.

use alloc::vec::Vec;

use super::{direction, finish, AttackError, AttackOutcome, Best, Recorder, RunOptions};
use crate::models::{predict, Classifier, Label, Loss};
use crate::vector::{clip01_in_place, project_sphere};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DdnParams {
    /// Initial radius `ρ₀`.
    pub eps0: f64,
    /// Radius adaptation rate `γ ∈ (0,1)`.
    pub gamma: f64,
    pub iters: usize,
    /// Gradient step `α` before projection.
    pub step: f64,
}

impl Default for DdnParams {
    fn default() -> Self {
        DdnParams {
            eps0: 1.0,
            gamma: 0.05,
            iters: 20,
            step: 1.0,
        }
    }
}

impl DdnParams {
    fn validate(&self) -> Result<(), AttackError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(AttackError::InvalidParams("ddn gamma must lie in (0,1)"));
        }
        if !(self.eps0 > 0.0 && self.step > 0.0) {
            return Err(AttackError::InvalidParams(
                "ddn eps0 and step must be positive",
            ));
        }
        Ok(())
    }
}

/// `(1 − γ)·ρ` after an adversarial iterate, `(1 + γ)·ρ` otherwise.
///
/// The realized distortion after clipping can fall short of `ρ`, so it is not
/// used as the base of the update.
pub fn ddn_next_radius(radius: f64, adversarial: bool, gamma: f64) -> f64 {
    if adversarial {
        (1.0 - gamma) * radius
    } else {
        (1.0 + gamma) * radius
    }
}

/// Steps along the normalized gradient, projects onto `S[x; ρᵢ]`, clips and
/// rounds. Returns the least distorted adversarial iterate, else the last.
pub fn ddn<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    p: &DdnParams,
    opts: &RunOptions,
) -> Result<AttackOutcome, AttackError> {
    p.validate()?;
    let mut rec = Recorder::new(opts.trace, Loss::Nll);
    rec.push(model, x, t)?;
    let mut y = x.to_vec();
    let mut rho = p.eps0;
    let mut best = Best::new();
    for _ in 0..p.iters {
        let d = direction(model, &y, t, Loss::Nll)?;
        let stepped: Vec<f64> = match &d.unit {
            Some(unit) => y.iter().zip(unit).map(|(v, g)| v - p.step * g).collect(),
            None => y.clone(),
        };
        let mut next = match project_sphere(&stepped, x, rho) {
            Ok(v) => v,
            Err(_) => stepped,
        };
        clip01_in_place(&mut next);
        opts.grid.round_in_place(&mut next);
        let adversarial = predict(model, &next)? != t;
        if adversarial {
            best.offer(x, &next);
        }
        rho = ddn_next_radius(rho, adversarial, p.gamma);
        y = next;
        rec.push(model, &y, t)?;
    }
    let result = best.point.unwrap_or(y);
    finish(model, x, t, result, p.iters, rec.finish())
}
