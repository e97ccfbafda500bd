//! Quantization-aware update finalizers and the expected-distortion model.
//!
//! Rounding an iterate onto the pixel lattice changes the length of the update
//! that produced it. [`q_out`] rescales an update so that the *rounded* image
//! keeps the intended distortion; [`q_in`] stretches short updates so rounding
//! does not cancel them. [`expected_sq_distortion_exact`] predicts how much a
//! random update of norm `ρ` survives rounding.

mod beta;
mod predictor;

use alloc::vec::Vec;

pub use beta::incomplete_reg_beta;
pub use predictor::{
    expected_sq_distortion_exact, expected_sq_distortion_highres, mc_quantized_distortion,
    QuantPredictorInput,
};

use crate::grid::QuantGrid;
use crate::vector::{dot, l2_distance};

/// Shortest update length `q_in` lets through to rounding.
pub const BETA_MIN: f64 = 0.1;
/// Upper end of the `q_out` scale bracket `[0, 2]`.
pub const Q_OUT_BETA_MAX: f64 = 2.0;
/// Bisection steps of the `q_out` line search.
pub const Q_OUT_STEPS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum QuantError {
    #[error("invalid predictor input: {0}")]
    InvalidInput(&'static str),
    #[error("argument outside the domain of the incomplete beta function")]
    DomainError,
}

/// `Q(y_i + β(z − y_i))` with `β` chosen so that the rounded image's distortion
/// `‖Q(·) − x‖` is as close as possible to `‖z − x‖`.
///
/// `β = 1` is evaluated first; bisection over `[0, 2]` then only replaces it
/// with a strictly better match.
pub fn q_out(x: &[f64], z: &[f64], y_i: &[f64], grid: &QuantGrid) -> Vec<f64> {
    let target = l2_distance(z, x);
    let dir: Vec<f64> = z.iter().zip(y_i).map(|(a, b)| a - b).collect();
    let point =
        |beta: f64| -> Vec<f64> { y_i.iter().zip(&dir).map(|(y, d)| y + beta * d).collect() };

    let mut best = grid.round(&point(1.0));
    let mut best_gap = (l2_distance(&best, x) - target).abs();

    let (mut lo, mut hi) = (0.0, Q_OUT_BETA_MAX);
    for _ in 0..Q_OUT_STEPS {
        let mid = 0.5 * (lo + hi);
        let real = point(mid);
        let candidate = grid.round(&real);
        let gap = l2_distance(&candidate, x) - target;
        if gap.abs() < best_gap {
            best_gap = gap.abs();
            best = candidate;
        }
        // slope of the real-valued distortion along the search line
        let offset: Vec<f64> = real.iter().zip(x).map(|(a, b)| a - b).collect();
        let slope = dot(&offset, &dir);
        if gap * slope < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// `Q(y_i + β(z − y_i))` with `β = max(1, β_min/‖z − y_i‖)`.
pub fn q_in(z: &[f64], y_i: &[f64], grid: &QuantGrid) -> Vec<f64> {
    let step = l2_distance(z, y_i);
    if step == 0.0 {
        return y_i.to_vec();
    }
    let beta = f64::max(1.0, BETA_MIN / step);
    let stretched: Vec<f64> = y_i
        .iter()
        .zip(z)
        .map(|(y, zz)| y + beta * (zz - y))
        .collect();
    grid.round(&stretched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn q_out_fixed_point() {
        let g = QuantGrid::BYTE;
        let x = [0.0, 0.0, 0.0];
        let y = [10.0 / 255.0, 20.0 / 255.0, 0.0];
        let z = [5.0 / 255.0, 10.0 / 255.0, 0.0];
        assert_eq!(q_out(&x, &z, &y, &g), z.to_vec());
    }

    #[test]
    fn q_out_two_candidates() {
        let g = QuantGrid::new(3).unwrap();
        let out = q_out(&[0.0, 0.0], &[0.6, 0.0], &[1.0, 0.0], &g);
        assert_eq!(out, vec![0.5, 0.0]);
    }

    #[test]
    fn q_in_examples() {
        let g = QuantGrid::BYTE;
        let y = [0.5, 0.5];
        // ‖z − y‖ = 0.05 → β = 2
        let z = [0.5 + 0.03, 0.5 + 0.04];
        let out = q_in(&z, &y, &g);
        assert_eq!(out, g.round(&[0.56, 0.58]));
        // long updates are rounded as they are
        let z = [0.5 + 0.12, 0.5 - 0.05];
        assert_eq!(q_in(&z, &y, &g), g.round(&z));
        assert_eq!(q_in(&y, &y, &g), y.to_vec());
    }

    proptest! {
        #[test]
        fn q_out_gap_within_one_cell(
            x in proptest::collection::vec(0.0f64..1.0, 16),
            z in proptest::collection::vec(0.0f64..1.0, 16),
            y in proptest::collection::vec(0u32..256, 16),
            levels in prop_oneof![Just(256u32), Just(16), Just(4)],
        ) {
            let g = QuantGrid::new(levels).unwrap();
            let y: Vec<f64> = y.iter().map(|&k| g.round_scalar(f64::from(k) / 255.0)).collect();
            let out = q_out(&x, &z, &y, &g);
            prop_assert!(g.is_on_grid(&out));
            let gap = (l2_distance(&out, &x) - l2_distance(&z, &x)).abs();
            prop_assert!(gap <= g.delta() * libm::sqrt(16.0) / 2.0 + 1e-12);
        }

        #[test]
        fn q_in_on_grid_and_moves(
            y in proptest::collection::vec(0u32..256, 8),
            u in proptest::collection::vec(-0.2f64..0.2, 8),
        ) {
            let g = QuantGrid::BYTE;
            let y: Vec<f64> = y.iter().map(|&k| f64::from(k) / 255.0).collect();
            let z: Vec<f64> = y.iter().zip(&u).map(|(a, b)| (a + b).clamp(0.0, 1.0)).collect();
            let out = q_in(&z, &y, &g);
            prop_assert!(g.is_on_grid(&out));
            let step = l2_distance(&z, &y);
            if step > 0.0 {
                let beta = f64::max(1.0, BETA_MIN / step);
                let moved_far = z.iter().zip(&y).any(|(a, b)| {
                    let target = b + beta * (a - b);
                    (0.0..=1.0).contains(&target) && (beta * (a - b)).abs() > g.delta() / 2.0 + 1e-12
                });
                if moved_far {
                    prop_assert_ne!(out, y);
                }
            }
        }
    }
}
