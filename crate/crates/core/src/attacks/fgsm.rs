//! Distortion-targeting attacks: FGSM, I-FGSM and PGD₂.
//!
//! All three work on real-valued iterates and round to the grid once, at the
//! end.

use alloc::vec::Vec;

use super::{direction, finish, AttackError, AttackOutcome, Recorder, RunOptions};
use crate::models::{Classifier, Label, Loss};
use crate::vector::{clip01, clip01_in_place, project_ball, sign, Ball, NormKind};

/// Default I-FGSM step.
pub const IFGSM_ALPHA: f64 = 0.08;

fn check_positive(value: f64, what: &'static str) -> Result<(), AttackError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(AttackError::InvalidParams(what))
    }
}

/// `clip(y − s·sign(g))` without rounding.
pub fn fgsm_step(y: &[f64], gradient: &[f64], s: f64) -> Vec<f64> {
    let stepped: Vec<f64> = y
        .iter()
        .zip(gradient)
        .map(|(v, g)| v - s * sign(*g))
        .collect();
    clip01(&stepped)
}

/// Single step of `∞`-norm `ε` against the sign of the loss gradient.
pub fn fgsm<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    epsilon: f64,
    opts: &RunOptions,
) -> Result<AttackOutcome, AttackError> {
    check_positive(epsilon, "epsilon must be nonnegative")?;
    let mut rec = Recorder::new(opts.trace, Loss::Nll);
    rec.push(model, x, t)?;
    let d = direction(model, x, t, Loss::Nll)?;
    let y = fgsm_step(x, &d.gradient, epsilon);
    rec.push(model, &y, t)?;
    finish(model, x, t, opts.grid.round(&y), 1, rec.finish())
}

/// Iterated FGSM with step `α`, projected onto `B∞[x; ε]` and `[0,1]ⁿ`.
pub fn ifgsm<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    epsilon: f64,
    alpha: f64,
    iters: usize,
    opts: &RunOptions,
) -> Result<AttackOutcome, AttackError> {
    check_positive(epsilon, "epsilon must be nonnegative")?;
    if !(alpha > 0.0) {
        return Err(AttackError::InvalidParams("alpha must be positive"));
    }
    let ball = Ball {
        center: x,
        radius: epsilon,
        norm: NormKind::Linf,
    };
    let mut rec = Recorder::new(opts.trace, Loss::Nll);
    rec.push(model, x, t)?;
    let mut y = x.to_vec();
    for _ in 0..iters {
        let d = direction(model, &y, t, Loss::Nll)?;
        let stepped: Vec<f64> = y
            .iter()
            .zip(&d.gradient)
            .map(|(v, g)| v - alpha * sign(*g))
            .collect();
        y = project_ball(&stepped, &ball);
        clip01_in_place(&mut y);
        rec.push(model, &y, t)?;
    }
    finish(model, x, t, opts.grid.round(&y), iters, rec.finish())
}

/// 2-norm PGD: normalized gradient step `α`, projected onto `B₂[x; ε]` and
/// `[0,1]ⁿ`. A vanishing gradient leaves the iterate in place.
pub fn pgd2<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    epsilon: f64,
    alpha: f64,
    iters: usize,
    opts: &RunOptions,
) -> Result<AttackOutcome, AttackError> {
    check_positive(epsilon, "epsilon must be nonnegative")?;
    if !(alpha > 0.0) && epsilon > 0.0 {
        return Err(AttackError::InvalidParams("alpha must be positive"));
    }
    let ball = Ball {
        center: x,
        radius: epsilon,
        norm: NormKind::L2,
    };
    let mut rec = Recorder::new(opts.trace, Loss::Nll);
    rec.push(model, x, t)?;
    let mut y = x.to_vec();
    for _ in 0..iters {
        let d = direction(model, &y, t, Loss::Nll)?;
        if let Some(unit) = d.unit {
            let stepped: Vec<f64> = y.iter().zip(&unit).map(|(v, g)| v - alpha * g).collect();
            y = project_ball(&stepped, &ball);
            clip01_in_place(&mut y);
        }
        rec.push(model, &y, t)?;
    }
    finish(model, x, t, opts.grid.round(&y), iters, rec.finish())
}
