//! The three detection loss terms and their weighted sum.

use serde::{Deserialize, Serialize};

use super::{Heatmap2D, KeypointClass};
use crate::geometry::PolarAngle;
use crate::{Error, Result, Scalar};

/// Focal-loss exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalParams<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> Default for FocalParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::cast(2.0),
            beta: T::cast(4.0),
        }
    }
}

/// Weights of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights<T> {
    pub lambda_hm: T,
    pub lambda_off: T,
    pub lambda_ang: T,
}

impl<T: Scalar> Default for LossWeights<T> {
    fn default() -> Self {
        Self {
            lambda_hm: T::cast(2.0),
            lambda_off: T::one(),
            lambda_ang: T::one(),
        }
    }
}

/// Pixel-wise focal loss between a predicted and a ground-truth heatmap.
///
/// At pixels where the ground truth is exactly 1 the penalty term is
/// `(1 - p)^alpha * ln(p)`; elsewhere it is
/// `(1 - gt)^beta * p^alpha * ln(1 - p)`. The negated sum is normalized
/// by the keypoint count. Predictions are clamped to `[1e-7, 1 - 1e-7]`
/// before the logs.
pub fn focal_loss<T: Scalar>(
    pred: &Heatmap2D<T>,
    gt: &Heatmap2D<T>,
    params: &FocalParams<T>,
    n_keypoints: usize,
) -> Result<T> {
    if n_keypoints == 0 {
        return Err(Error::ZeroKeypoints);
    }
    let eps = T::cast(1e-7);
    let one = T::one();
    let mut sum = T::zero();
    for class in KeypointClass::ALL {
        let (p_plane, g_plane) = (pred.plane(class), gt.plane(class));
        if p_plane.len() != g_plane.len() {
            return Err(Error::LengthMismatch {
                left: p_plane.len(),
                right: g_plane.len(),
            });
        }
        for (&p_raw, &g) in p_plane.iter().zip(g_plane.iter()) {
            let p = num_traits::clamp(p_raw, eps, one - eps);
            sum = sum
                + if g == one {
                    (one - p).powf(params.alpha) * p.ln()
                } else {
                    (one - g).powf(params.beta) * p.powf(params.alpha) * (one - p).ln()
                };
        }
    }
    Ok(-sum / T::cast(n_keypoints))
}

/// Mean smooth-L1 over components: quadratic below a unit residual,
/// linear above.
pub fn smooth_l1<T: Scalar>(pred: &[T], gt: &[T]) -> Result<T> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::ZeroKeypoints);
    }
    let half = T::cast(0.5);
    let mut sum = T::zero();
    for (&p, &g) in pred.iter().zip(gt.iter()) {
        let diff = (p - g).abs();
        sum = sum
            + if diff < T::one() {
                half * diff * diff
            } else {
                diff - half
            };
    }
    Ok(sum / T::cast(pred.len()))
}

/// Mean `1 - cos(pred - gt)` over angle pairs; periodic in 2π by
/// construction, range `[0, 2]`.
pub fn cosine_angle_loss<T: Scalar>(pred: &[PolarAngle<T>], gt: &[PolarAngle<T>]) -> Result<T> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::ZeroKeypoints);
    }
    let mut sum = T::zero();
    for (p, g) in pred.iter().zip(gt.iter()) {
        sum = sum + (T::one() - (p.radians() - g.radians()).cos());
    }
    Ok(sum / T::cast(pred.len()))
}

/// Weighted sum of the heatmap, offset, and angle losses.
pub fn total_loss<T: Scalar>(hm: T, off: T, ang: T, w: &LossWeights<T>) -> T {
    w.lambda_hm * hm + w.lambda_off * off + w.lambda_ang * ang
}
