//! The pixel lattice `{0, Δ, …, 1}` with `Δ = 1/(L−1)`.

use alloc::vec::Vec;

/// Absolute tolerance used by [`QuantGrid::is_on_grid`].
pub const ON_GRID_TOLERANCE: f64 = 1e-9;

/// Uniform quantization lattice on `[0,1]` with `levels` values.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantGrid {
    levels: u32,
}

impl QuantGrid {
    /// 8-bit images.
    pub const BYTE: QuantGrid = QuantGrid { levels: 256 };

    /// Returns `None` for fewer than two levels.
    pub fn new(levels: u32) -> Option<Self> {
        (levels >= 2).then_some(QuantGrid { levels })
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Number of steps `L − 1`.
    pub fn steps(&self) -> f64 {
        f64::from(self.levels - 1)
    }

    /// Quantization step `Δ`.
    pub fn delta(&self) -> f64 {
        1.0 / self.steps()
    }

    /// Clip to `[0,1]`, then round to the nearest lattice point (ties away from zero).
    pub fn round_scalar(&self, v: f64) -> f64 {
        let steps = self.steps();
        libm::round(v.clamp(0.0, 1.0) * steps) / steps
    }

    pub fn round(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|&x| self.round_scalar(x)).collect()
    }

    pub fn round_in_place(&self, v: &mut [f64]) {
        for x in v {
            *x = self.round_scalar(*x);
        }
    }

    /// True iff every element is `k·Δ` for an integer `k ∈ [0, L−1]`, to 1e−9.
    pub fn is_on_grid(&self, v: &[f64]) -> bool {
        let steps = self.steps();
        let delta = self.delta();
        v.iter().all(|&x| {
            let k = libm::round(x * steps);
            (0.0..=steps).contains(&k) && (x - k * delta).abs() <= ON_GRID_TOLERANCE
        })
    }
}

impl Default for QuantGrid {
    fn default() -> Self {
        QuantGrid::BYTE
    }
}
