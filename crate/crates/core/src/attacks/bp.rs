//! Boundary projection.
//!
//! Stage 1 descends the normalized loss gradient with growing steps `α·γᵢ`
//! until the prediction flips. Stage 2 then alternates two closed-form moves
//! until the budget `K` is spent:
//!
//! * **out** (adversarial iterate): slide on the tangent hyperplane of the
//!   loss level set towards the sphere `S[x; γᵢ‖δᵢ‖]`, reducing distortion
//!   while keeping the loss to first order;
//! * **in** (non-adversarial iterate): jump along `−ĝ` onto the larger
//!   sphere `S[x; ‖δᵢ‖/γᵢ]`.
//!
//! Each move is concluded by `q_out` / `q_in`, which choose the update scale
//! so that rounding onto the grid does not defeat the move.

use alloc::vec::Vec;

use super::{
    direction, finish, is_adversarial, AttackError, AttackOutcome, Best, Recorder, RunOptions,
};
use crate::models::{Classifier, Label, Loss};
use crate::quantization::{q_in, q_out};
use crate::vector::{clip01, dot, l2_distance, l2_norm, sub};

/// Upper end `γ_max` of the step schedule.
pub const GAMMA_MAX: f64 = 1.0;

/// When each iterate is put on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QuantMode {
    /// Real-valued iterates; only the returned image is rounded.
    AtEnd,
    /// Plain rounding after every step.
    EachIteration,
    /// `q_out` / `q_in` after every refinement step.
    #[default]
    Adaptive,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BpParams {
    /// Stage-1 step scale `α`.
    pub alpha: f64,
    /// `γ_min ∈ (0, 1)`.
    pub gamma_min: f64,
    /// Budget `K` of gradient computations.
    pub iters: usize,
    pub quant: QuantMode,
}

impl Default for BpParams {
    fn default() -> Self {
        BpParams {
            alpha: 2.0,
            gamma_min: 0.7,
            iters: 20,
            quant: QuantMode::Adaptive,
        }
    }
}

impl BpParams {
    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.gamma_min > 0.0 && self.gamma_min < GAMMA_MAX) {
            return Err(AttackError::InvalidParams("gamma_min must lie in (0,1)"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(AttackError::InvalidParams("alpha must be positive"));
        }
        if self.iters == 0 {
            return Err(AttackError::InvalidParams(
                "bp needs at least one iteration",
            ));
        }
        Ok(())
    }

    fn gamma(&self, i: usize) -> f64 {
        gamma_schedule(i, self.iters, self.gamma_min, GAMMA_MAX)
    }
}

/// `γᵢ = γ_min + i·(γ_max − γ_min)/(K + 1)`.
pub fn gamma_schedule(i: usize, k: usize, gamma_min: f64, gamma_max: f64) -> f64 {
    gamma_min + i as f64 * (gamma_max - gamma_min) / (k as f64 + 1.0)
}

/// Case out: the point of the tangent hyperplane `⟨v − yᵢ, ĝ⟩ = 0` at
/// distance `ε` from `x` that is closest to `yᵢ`, or the projection
/// `v* = x + rĝ` of `x` onto that hyperplane when `|r| ≥ ε`.
pub fn bp_case_out(x: &[f64], y_i: &[f64], g_hat: &[f64], epsilon: f64) -> Vec<f64> {
    let delta = sub(y_i, x);
    let r = dot(&delta, g_hat);
    let v_star: Vec<f64> = x.iter().zip(g_hat).map(|(a, g)| a + r * g).collect();
    let reach_sq = epsilon * epsilon - r * r;
    if reach_sq <= 0.0 {
        return v_star;
    }
    let reach = libm::sqrt(reach_sq);
    let mut u = sub(y_i, &v_star);
    let len = l2_norm(&u);
    if len <= 1e-12 * (1.0 + l2_norm(&delta)) {
        u = orthogonal_unit(g_hat);
    } else {
        u.iter_mut().for_each(|v| *v /= len);
    }
    v_star.iter().zip(&u).map(|(v, d)| v + reach * d).collect()
}

/// Unit vector orthogonal to `ĝ`: Gram–Schmidt on the canonical vector
/// `e_k` where `|ĝ_k|` is smallest.
fn orthogonal_unit(g_hat: &[f64]) -> Vec<f64> {
    let mut k = 0;
    for (j, g) in g_hat.iter().enumerate() {
        if g.abs() < g_hat[k].abs() {
            k = j;
        }
    }
    let gk = g_hat[k];
    let mut u: Vec<f64> = g_hat.iter().map(|g| -gk * g).collect();
    u[k] += 1.0;
    let len = l2_norm(&u);
    u.iter_mut().for_each(|v| *v /= len);
    u
}

/// Case in: the point of `S[x; ε]` on the ray from `yᵢ` along `−ĝ`.
///
/// Requires `ε ≥ ‖yᵢ − x‖`.
pub fn bp_case_in(
    x: &[f64],
    y_i: &[f64],
    g_hat: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>, AttackError> {
    let delta = sub(y_i, x);
    let norm_sq = dot(&delta, &delta);
    if !(epsilon >= 0.0) || epsilon * epsilon < norm_sq {
        return Err(AttackError::InvalidTarget);
    }
    let r = dot(&delta, g_hat);
    let step = r + libm::sqrt(epsilon * epsilon - norm_sq + r * r);
    Ok(y_i.iter().zip(g_hat).map(|(y, g)| y - step * g).collect())
}

/// Stage-1 result.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1 {
    pub iterate: Vec<f64>,
    /// Iterations consumed, one gradient each.
    pub iters: usize,
    pub succeeded: bool,
}

/// Stage-2 result.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2 {
    /// Least distorted adversarial iterate, the start included; real-valued
    /// under [`QuantMode::AtEnd`].
    pub best: Option<Vec<f64>>,
    /// Final iterate `y_K`.
    pub last: Vec<f64>,
    pub grads: usize,
}

pub fn bp_stage1<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    p: &BpParams,
    opts: &RunOptions,
) -> Result<Stage1, AttackError> {
    p.validate()?;
    stage1(model, x, t, p, opts, &mut Recorder::new(false, Loss::Nll))
}

fn stage1<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    p: &BpParams,
    opts: &RunOptions,
    rec: &mut Recorder,
) -> Result<Stage1, AttackError> {
    let mut y = x.to_vec();
    let mut i = 0;
    let mut adversarial = is_adversarial(model, &y, t)?;
    while !adversarial && i < p.iters {
        let d = direction(model, &y, t, Loss::Nll)?;
        let Some(unit) = d.unit else {
            return Ok(Stage1 {
                iterate: y,
                iters: i + 1,
                succeeded: false,
            });
        };
        let s = p.alpha * p.gamma(i);
        let stepped: Vec<f64> = y.iter().zip(&unit).map(|(v, g)| v - s * g).collect();
        y = match p.quant {
            QuantMode::AtEnd => clip01(&stepped),
            QuantMode::EachIteration | QuantMode::Adaptive => opts.grid.round(&stepped),
        };
        i += 1;
        rec.push(model, &y, t)?;
        adversarial = is_adversarial(model, &y, t)?;
    }
    Ok(Stage1 {
        iterate: y,
        iters: i,
        succeeded: adversarial,
    })
}

/// Refinement from `y_start` at iteration `i_start` up to the budget.
pub fn bp_stage2<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    y_start: &[f64],
    i_start: usize,
    p: &BpParams,
    opts: &RunOptions,
) -> Result<Stage2, AttackError> {
    p.validate()?;
    stage2(
        model,
        x,
        t,
        y_start,
        i_start,
        p,
        opts,
        &mut Recorder::new(false, Loss::Nll),
    )
}

#[allow(clippy::too_many_arguments)]
fn stage2<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    y_start: &[f64],
    i_start: usize,
    p: &BpParams,
    opts: &RunOptions,
    rec: &mut Recorder,
) -> Result<Stage2, AttackError> {
    let grid = &opts.grid;
    let mut best = Best::new();
    let offer = |best: &mut Best, y: &[f64]| -> Result<(), AttackError> {
        if l2_distance(y, x) < best.distortion && is_adversarial(model, y, t)? {
            best.offer(x, y);
        }
        Ok(())
    };
    offer(&mut best, y_start)?;

    let mut y = y_start.to_vec();
    let mut grads = 0;
    for i in i_start..p.iters {
        let d = direction(model, &y, t, Loss::Nll)?;
        grads += 1;
        let Some(g_hat) = d.unit else { break };
        let gamma = p.gamma(i);
        let dist = l2_distance(&y, x);
        let next = if d.adversarial {
            let z = bp_case_out(x, &y, &g_hat, gamma * dist);
            match p.quant {
                QuantMode::AtEnd => clip01(&z),
                QuantMode::EachIteration => grid.round(&z),
                QuantMode::Adaptive => q_out(x, &z, &y, grid),
            }
        } else {
            let z = bp_case_in(x, &y, &g_hat, dist / gamma)?;
            match p.quant {
                QuantMode::AtEnd => clip01(&z),
                QuantMode::EachIteration => grid.round(&z),
                QuantMode::Adaptive => q_in(&z, &y, grid),
            }
        };
        y = next;
        rec.push(model, &y, t)?;
        offer(&mut best, &y)?;
    }
    Ok(Stage2 {
        best: best.point,
        last: y,
        grads,
    })
}

/// Full run with the stage statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BpRun {
    /// Carries the least distorted adversarial image.
    pub outcome: AttackOutcome,
    /// Final iterate `y_K`, rounded.
    pub last: Vec<f64>,
    pub stage1_iters: usize,
    pub stage1_succeeded: bool,
}

pub fn bp_detailed<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    p: &BpParams,
    opts: &RunOptions,
) -> Result<BpRun, AttackError> {
    p.validate()?;
    let mut rec = Recorder::new(opts.trace, Loss::Nll);
    rec.push(model, x, t)?;
    let s1 = stage1(model, x, t, p, opts, &mut rec)?;
    if !s1.succeeded {
        let last = opts.grid.round(&s1.iterate);
        let outcome = finish(model, x, t, last.clone(), s1.iters, rec.finish())?;
        return Ok(BpRun {
            outcome,
            last,
            stage1_iters: s1.iters,
            stage1_succeeded: false,
        });
    }
    let s2 = stage2(model, x, t, &s1.iterate, s1.iters, p, opts, &mut rec)?;
    let last = opts.grid.round(&s2.last);
    let result = s2
        .best
        .map(|b| opts.grid.round(&b))
        .unwrap_or_else(|| last.clone());
    let outcome = finish(model, x, t, result, s1.iters + s2.grads, rec.finish())?;
    Ok(BpRun {
        outcome,
        last,
        stage1_iters: s1.iters,
        stage1_succeeded: true,
    })
}

pub fn bp<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    t: Label,
    p: &BpParams,
    opts: &RunOptions,
) -> Result<AttackOutcome, AttackError> {
    bp_detailed(model, x, t, p, opts).map(|run| run.outcome)
}
