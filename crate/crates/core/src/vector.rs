//! Flat `f64` image vectors: norms, normalization, clipping and projections.
//!
//! Images are plain slices in `[0,1]^n` (channels flattened). Everything here
//! is a pure function over slices.

use alloc::vec::Vec;

/// Errors from vector geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum VectorError {
    /// Normalizing or projecting needs a nonzero direction.
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Which norm a [`Ball`] is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    Linf,
}

/// Closed ball `{v : ‖v − center‖ ≤ radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball<'a> {
    pub center: &'a [f64],
    pub radius: f64,
    pub norm: NormKind,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

pub fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// `‖a − b‖₂`.
pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// `‖a − b‖∞`.
pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// `a − b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + s·d`.
pub fn axpy(a: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    a.iter().zip(d).map(|(x, y)| x + s * y).collect()
}

/// 2-normalization `v / ‖v‖`.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>, VectorError> {
    let norm = l2_norm(v);
    if norm == 0.0 || !norm.is_finite() {
        return Err(VectorError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Element-wise `min(max(v, 0), 1)`.
pub fn clip01(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.clamp(0.0, 1.0)).collect()
}

pub fn clip01_in_place(v: &mut [f64]) {
    for x in v {
        *x = x.clamp(0.0, 1.0);
    }
}

/// Euclidean projection onto a closed ball.
pub fn project_ball(v: &[f64], ball: &Ball<'_>) -> Vec<f64> {
    let center = ball.center;
    let radius = ball.radius.max(0.0);
    match ball.norm {
        NormKind::L2 => {
            let dist = l2_distance(v, center);
            if dist <= radius {
                return v.to_vec();
            }
            let scale = radius / dist;
            center
                .iter()
                .zip(v)
                .map(|(c, x)| c + scale * (x - c))
                .collect()
        }
        NormKind::Linf => center
            .iter()
            .zip(v)
            .map(|(c, x)| c + (x - c).clamp(-radius, radius))
            .collect(),
    }
}

/// Projection onto the sphere `S[center; radius]`: `center + radius·η(v − center)`.
pub fn project_sphere(v: &[f64], center: &[f64], radius: f64) -> Result<Vec<f64>, VectorError> {
    let dist = l2_distance(v, center);
    if dist == 0.0 {
        return Err(VectorError::ZeroVector);
    }
    let scale = radius / dist;
    Ok(center
        .iter()
        .zip(v)
        .map(|(c, x)| c + scale * (x - c))
        .collect())
}

/// Element-wise sign with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn norms() {
        assert_eq!(l2_norm(&[3.0, 4.0]), 5.0);
        assert_eq!(l2_norm(&[0.0; 7]), 0.0);
        assert_eq!(l2_norm(&[1.0, 1.0, 1.0, 1.0]), 2.0);
        assert_eq!(linf_norm(&[0.5, -2.0, 1.0]), 2.0);
    }

    #[test]
    fn normalize_cases() {
        assert!(close(&normalize(&[3.0, 4.0]).unwrap(), &[0.6, 0.8], 1e-15));
        let unit = [0.0, 1.0, 0.0];
        assert_eq!(normalize(&unit).unwrap(), unit.to_vec());
        assert_eq!(normalize(&[0.0, 0.0]), Err(VectorError::ZeroVector));
    }

    #[test]
    fn clip_cases() {
        assert_eq!(clip01(&[-0.2, 0.5, 1.3]), vec![0.0, 0.5, 1.0]);
        assert_eq!(clip01(&[0.1, 0.9]), vec![0.1, 0.9]);
        assert_eq!(clip01(&[-1.0, -0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn ball_projection() {
        let c = [0.0, 0.0];
        let inside = [0.1, 0.2];
        let b = Ball {
            center: &c,
            radius: 1.0,
            norm: NormKind::L2,
        };
        assert_eq!(project_ball(&inside, &b), inside.to_vec());
        assert!(close(&project_ball(&[3.0, 4.0], &b), &[0.6, 0.8], 1e-15));

        let b = Ball {
            center: &c,
            radius: 0.1,
            norm: NormKind::Linf,
        };
        assert!(close(
            &project_ball(&[0.3, -0.05], &b),
            &[0.1, -0.05],
            1e-15
        ));
    }

    #[test]
    fn sphere_projection() {
        let c = [0.0, 0.0];
        assert!(close(
            &project_sphere(&[3.0, 4.0], &c, 2.0).unwrap(),
            &[1.2, 1.6],
            1e-15
        ));
        let on = [0.6, 0.8];
        assert!(close(&project_sphere(&on, &c, 1.0).unwrap(), &on, 1e-15));
        assert_eq!(project_sphere(&c, &c, 1.0), Err(VectorError::ZeroVector));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;
        use std::vec::Vec;

        fn vecs(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (
                proptest::collection::vec(-3.0f64..3.0, n),
                proptest::collection::vec(-3.0f64..3.0, n),
            )
        }

        proptest! {
            #[test]
            fn ball_projection_idempotent_and_feasible((v, c) in vecs(6), radius in 0.0f64..2.0) {
                for norm in [NormKind::L2, NormKind::Linf] {
                    let ball = Ball { center: &c, radius, norm };
                    let p = project_ball(&v, &ball);
                    let d = match norm {
                        NormKind::L2 => l2_distance(&p, &c),
                        NormKind::Linf => linf_distance(&p, &c),
                    };
                    prop_assert!(d <= radius + 1e-12);
                    let pp = project_ball(&p, &ball);
                    for (a, b) in p.iter().zip(&pp) {
                        prop_assert!((a - b).abs() <= 1e-12);
                    }
                }
            }

            #[test]
            fn sphere_projection_radius((v, c) in vecs(5), radius in 0.01f64..5.0) {
                prop_assume!(l2_distance(&v, &c) > 1e-6);
                let p = project_sphere(&v, &c, radius).unwrap();
                prop_assert!((l2_distance(&p, &c) - radius).abs() <= 1e-12 * radius.max(1.0));
            }

            #[test]
            fn normalize_unit((v, _c) in vecs(8)) {
                prop_assume!(l2_norm(&v) > 1e-9);
                let u = normalize(&v).unwrap();
                prop_assert!((l2_norm(&u) - 1.0).abs() <= 1e-12);
            }
        }
    }
}
