use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Label, ModelError};

/// Labeled images in `[0,1]^n`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    images: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

impl Dataset {
    /// Checks equal counts, a common dimension and pixel range.
    pub fn new(images: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self, ModelError> {
        if images.len() != labels.len() {
            return Err(ModelError::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if let Some(first) = images.first() {
            let dim = first.len();
            for (index, img) in images.iter().enumerate() {
                if img.len() != dim {
                    return Err(ModelError::DimensionMismatch {
                        expected: dim,
                        got: img.len(),
                    });
                }
                if !img.iter().all(|v| (0.0..=1.0).contains(v)) {
                    return Err(ModelError::OutOfRange { index });
                }
            }
        }
        Ok(Dataset { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Common image length, `None` when empty.
    pub fn dim(&self) -> Option<usize> {
        self.images.first().map(Vec::len)
    }

    pub fn images(&self) -> &[Vec<f64>] {
        &self.images
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], Label)> + '_ {
        self.images
            .iter()
            .map(Vec::as_slice)
            .zip(self.labels.iter().copied())
    }

    /// First `count` examples.
    pub fn truncated(mut self, count: usize) -> Self {
        self.images.truncate(count);
        self.labels.truncate(count);
        self
    }

    /// Appends another dataset of the same dimension.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset, ModelError> {
        let mut images = self.images.clone();
        images.extend(other.images.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Dataset::new(images, labels)
    }

    /// Splits off the last `count` examples.
    pub fn split_tail(mut self, count: usize) -> (Dataset, Dataset) {
        let at = self.len().saturating_sub(count);
        let images = self.images.split_off(at);
        let labels = self.labels.split_off(at);
        (self, Dataset { images, labels })
    }
}

/// Two interleaved half-circles mapped into `[0,1]²`.
///
/// Class 0 is the upper arc `(cos θ, sin θ)`, class 1 the lower arc
/// `(1 − cos θ, 1/2 − sin θ)`, `θ ∈ [0, π]`. Gaussian noise of standard
/// deviation `noise_sd` is added in the arc coordinates before the affine map
/// `u ↦ 0.1 + 0.8·(u + 1)/3` (both axes, so the map is a similarity), and the
/// result is clipped to the unit square. Examples come out shuffled.
pub fn make_two_moons(count: usize, noise_sd: f64, seed: u64) -> Result<Dataset, ModelError> {
    if count < 2 {
        return Err(ModelError::InvalidConfig(
            "two moons need at least two points",
        ));
    }
    let noise = Normal::new(0.0, noise_sd.max(0.0))
        .map_err(|_| ModelError::InvalidConfig("invalid noise level"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<(Vec<f64>, Label)> = (0..count)
        .map(|i| {
            let label = i % 2;
            let theta = rng.random_range(0.0..=core::f64::consts::PI);
            let (s, c) = libm::sincos(theta);
            let (mut u, mut v) = if label == 0 {
                (c, s)
            } else {
                (1.0 - c, 0.5 - s)
            };
            if noise_sd > 0.0 {
                u += noise.sample(&mut rng);
                v += noise.sample(&mut rng);
            }
            let map = |a: f64| (0.1 + 0.8 * (a + 1.0) / 3.0).clamp(0.0, 1.0);
            (alloc::vec![map(u), map(v)], label)
        })
        .collect();
    points.shuffle(&mut rng);
    let (images, labels) = points.into_iter().unzip();
    Dataset::new(images, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_points_lie_on_arcs() {
        let data = make_two_moons(200, 0.0, 4).unwrap();
        let unmap = |a: f64| (a - 0.1) * 3.0 / 0.8 - 1.0;
        for (x, t) in data.iter() {
            let (u, v) = (unmap(x[0]), unmap(x[1]));
            let r = if t == 0 {
                libm::hypot(u, v)
            } else {
                libm::hypot(1.0 - u, 0.5 - v)
            };
            assert!((r - 1.0).abs() < 1e-12, "radius {r}");
        }
        assert_eq!(data.labels().iter().filter(|&&t| t == 0).count(), 100);
    }

    #[test]
    fn deterministic_and_in_unit_square() {
        let a = make_two_moons(300, 0.1, 7).unwrap();
        assert_eq!(a, make_two_moons(300, 0.1, 7).unwrap());
        assert_ne!(a, make_two_moons(300, 0.1, 8).unwrap());
        assert!(a.images().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert!(make_two_moons(1, 0.1, 7).is_err());
    }

    #[test]
    fn dataset_validation() {
        use alloc::vec;
        assert!(matches!(
            Dataset::new(vec![vec![0.0]], vec![]),
            Err(ModelError::CountMismatch { .. })
        ));
        assert!(matches!(
            Dataset::new(vec![vec![1.5]], vec![0]),
            Err(ModelError::OutOfRange { index: 0 })
        ));
        assert_eq!(
            Dataset::new(vec![vec![0.5, 0.5]], vec![0])
                .unwrap()
                .truncated(0)
                .len(),
            0
        );
    }
}
