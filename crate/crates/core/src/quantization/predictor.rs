//! Expected squared norm of a random update after rounding.
//!
//! The update `U` is uniform on the sphere of radius `ρ` in `ℝⁿ` and each
//! coordinate is rounded to the lattice `ΔZ` (border effects ignored). Then
//! `E(D²) = n·Σ_ℓ (ℓΔ)²·P(|E_j| = ℓΔ)`, where `|E_j| ≥ ℓΔ` iff
//! `|U_j| ≥ (ℓ − ½)Δ`. Since `U_j²/ρ² ~ Beta(½, (n−1)/2)`,
//! `P(|E_j| ≥ ℓΔ) = 1 − I_{s²}(½, (n−1)/2)` with `s(ℓ) = (2ℓ−1)Δ/(2ρ)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{incomplete_reg_beta, QuantError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantPredictorInput {
    /// Dimension `n`.
    pub n: usize,
    /// Lattice step `Δ`.
    pub delta: f64,
    /// Update norm before rounding.
    pub rho: f64,
}

impl QuantPredictorInput {
    fn validate(&self) -> Result<(), QuantError> {
        if self.n == 0 {
            return Err(QuantError::InvalidInput("dimension must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(QuantError::InvalidInput("delta must be positive"));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(QuantError::InvalidInput("rho must be nonnegative"));
        }
        Ok(())
    }
}

/// `P(|E_j| ≥ ℓΔ)` for `ℓ ≥ 1`.
fn tail(n: usize, s: f64) -> Result<f64, QuantError> {
    if s >= 1.0 {
        return Ok(0.0);
    }
    if n == 1 {
        // the 1-sphere is the two points ±ρ
        return Ok(1.0);
    }
    // 1 − I_{s²}(½, (n−1)/2) = I_{1−s²}((n−1)/2, ½)
    incomplete_reg_beta(1.0 - s * s, (n as f64 - 1.0) / 2.0, 0.5)
}

/// Exact `E(D²)`.
pub fn expected_sq_distortion_exact(q: &QuantPredictorInput) -> Result<f64, QuantError> {
    q.validate()?;
    if q.rho == 0.0 {
        return Ok(0.0);
    }
    // Σ ℓ²·(T_ℓ − T_{ℓ+1}) = Σ (2ℓ − 1)·T_ℓ
    let mut sum = 0.0;
    let mut level = 1u64;
    loop {
        let odd = (2 * level - 1) as f64;
        let s = odd * q.delta / (2.0 * q.rho);
        let t = tail(q.n, s)?;
        if t == 0.0 {
            break;
        }
        sum += odd * t;
        level += 1;
    }
    Ok(q.n as f64 * q.delta * q.delta * sum)
}

/// High-resolution approximation `ρ² + nΔ²/12`.
pub fn expected_sq_distortion_highres(q: &QuantPredictorInput) -> Result<f64, QuantError> {
    q.validate()?;
    Ok(q.rho * q.rho + q.n as f64 * q.delta * q.delta / 12.0)
}

/// Monte-Carlo estimate of `E(D²)` from `samples` uniform directions.
pub fn mc_quantized_distortion(
    q: &QuantPredictorInput,
    samples: usize,
    seed: u64,
) -> Result<f64, QuantError> {
    q.validate()?;
    if samples == 0 {
        return Err(QuantError::InvalidInput("samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut direction = alloc::vec![0.0f64; q.n];
    let mut total = 0.0;
    for _ in 0..samples {
        let mut norm_sq = 0.0;
        for v in direction.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
            norm_sq += *v * *v;
        }
        let scale = q.rho / libm::sqrt(norm_sq) / q.delta;
        let d2: f64 = direction
            .iter()
            .map(|v| {
                let e = libm::round(v * scale) * q.delta;
                e * e
            })
            .sum();
        total += d2;
    }
    Ok(total / samples as f64)
}
