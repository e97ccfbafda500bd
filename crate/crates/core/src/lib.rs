//! Fast, low-distortion adversarial examples against differentiable classifiers.
//!
//! The centerpiece is the boundary-projection attack ([`attacks::bp`]): a first
//! stage walks down the normalized loss gradient until the prediction flips,
//! then a refinement stage walks *along* the class boundary, shrinking the
//! distortion while staying on the tangent hyperplane of the loss level set.
//! Every step is concluded by a quantization-aware rounding onto the pixel
//! lattice ([`quantization::q_out`], [`quantization::q_in`]).
//!
//! Baselines ([`attacks::fgsm`], [`attacks::ifgsm`], [`attacks::pgd2`],
//! [`attacks::cw`], [`attacks::ddn`]), a small trainable MLP, a closed-form 2D
//! classifier, the expected-distortion-after-rounding predictor and the
//! success/distortion evaluation protocol live alongside it.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parallel
//! benchmark drivers and the command line live in the `edgewalk` crate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attacks;
pub mod eval;
pub mod grid;
pub mod models;
pub mod quantization;
pub mod vector;

pub use attacks::{Attack, AttackError, AttackOutcome, TraceStep};
pub use grid::QuantGrid;
pub use models::{Classifier, Dataset, Label, Loss, MlpModel, ModelError, ProbVector, Toy2DModel};
pub use vector::{Ball, NormKind, VectorError};
