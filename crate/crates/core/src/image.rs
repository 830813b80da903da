//! Dense per-pixel products of the camera CNNs: score masks and depth images.

use crate::error::{FusionError, Result};
use crate::prob::{argmax, ProbabilityVector};
use crate::scalar::Real;

/// Per-pixel class score image, `height x width x classes`, pixel-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMask<T: Real> {
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    /// Seconds.
    pub stamp: f64,
    scores: Vec<T>,
}

impl<T: Real> ScoreMask<T> {
    pub fn new(width: usize, height: usize, classes: usize, stamp: f64) -> Self {
        let uniform = T::one() / T::from_usize(classes).unwrap();
        Self {
            width,
            height,
            classes,
            stamp,
            scores: vec![uniform; width * height * classes],
        }
    }

    pub fn from_scores(
        width: usize,
        height: usize,
        classes: usize,
        stamp: f64,
        scores: Vec<T>,
    ) -> Result<Self> {
        if scores.len() != width * height * classes {
            return Err(FusionError::DimensionMismatch {
                context: "score mask",
                expected: width * height * classes,
                actual: scores.len(),
            });
        }
        Ok(Self {
            width,
            height,
            classes,
            stamp,
            scores,
        })
    }

    #[inline]
    fn offset(&self, u: usize, v: usize) -> usize {
        (v * self.width + u) * self.classes
    }

    #[inline]
    pub fn pixel(&self, u: usize, v: usize) -> &[T] {
        let o = self.offset(u, v);
        &self.scores[o..o + self.classes]
    }

    #[inline]
    pub fn pixel_mut(&mut self, u: usize, v: usize) -> &mut [T] {
        let o = self.offset(u, v);
        &mut self.scores[o..o + self.classes]
    }

    pub fn set_pixel(&mut self, u: usize, v: usize, p: &ProbabilityVector<T>) {
        self.pixel_mut(u, v).copy_from_slice(p.values());
    }

    pub fn argmax(&self, u: usize, v: usize) -> usize {
        argmax(self.pixel(u, v))
    }

    pub fn raw(&self) -> &[T] {
        &self.scores
    }

    pub fn raw_mut(&mut self) -> &mut [T] {
        &mut self.scores
    }

    /// Per-pixel validity check over the whole mask; O(pixels).
    pub fn validate(&self) -> Result<()> {
        let tol = T::from_f64_lit(crate::prob::PROB_SUM_TOL);
        for v in 0..self.height {
            for u in 0..self.width {
                let px = self.pixel(u, v);
                let mut sum = T::zero();
                for &s in px {
                    if !s.is_finite() || s < T::zero() || s > T::one() {
                        return Err(FusionError::InvalidProbability(format!(
                            "pixel ({u},{v}) holds {s}"
                        )));
                    }
                    sum += s;
                }
                if (sum - T::one()).abs() > tol {
                    return Err(FusionError::InvalidProbability(format!(
                        "pixel ({u},{v}) sums to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Metric depth per pixel; `0` marks an invalid measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage<T: Real> {
    pub width: usize,
    pub height: usize,
    /// Seconds.
    pub stamp: f64,
    depth: Vec<T>,
}

impl<T: Real> DepthImage<T> {
    pub fn new(width: usize, height: usize, stamp: f64) -> Self {
        Self {
            width,
            height,
            stamp,
            depth: vec![T::zero(); width * height],
        }
    }

    pub fn from_depths(width: usize, height: usize, stamp: f64, depth: Vec<T>) -> Result<Self> {
        if depth.len() != width * height {
            return Err(FusionError::DimensionMismatch {
                context: "depth image",
                expected: width * height,
                actual: depth.len(),
            });
        }
        for &d in &depth {
            if !d.is_finite() || d < T::zero() {
                return Err(FusionError::InvalidProbability(format!(
                    "depth {d} must be finite and >= 0"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            stamp,
            depth,
        })
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> T {
        self.depth[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, d: T) {
        self.depth[v * self.width + u] = d;
    }

    /// Valid (non-zero) depth at the pixel, if any.
    #[inline]
    pub fn valid_at(&self, u: usize, v: usize) -> Option<T> {
        let d = self.at(u, v);
        (d > T::zero()).then_some(d)
    }

    pub fn raw(&self) -> &[T] {
        &self.depth
    }
}

/// A fused segmentation mask plus a per-pixel flag telling whether the pixel
/// carries (warped) history rather than being a plain pass-through.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedMask<T: Real> {
    pub mask: ScoreMask<T>,
    valid: Vec<bool>,
}

impl<T: Real> FusedMask<T> {
    /// Wrap a mask with every pixel marked valid.
    pub fn from_mask(mask: ScoreMask<T>) -> Self {
        let valid = vec![true; mask.width * mask.height];
        Self { mask, valid }
    }

    /// All-invalid mask of the given shape (used as the warp target).
    pub fn invalid(width: usize, height: usize, classes: usize, stamp: f64) -> Self {
        Self {
            mask: ScoreMask::new(width, height, classes, stamp),
            valid: vec![false; width * height],
        }
    }

    #[inline]
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.valid[v * self.mask.width + u]
    }

    #[inline]
    pub fn set_valid(&mut self, u: usize, v: usize, flag: bool) {
        self.valid[v * self.mask.width + u] = flag;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&f| f).count()
    }

    pub fn width(&self) -> usize {
        self.mask.width
    }

    pub fn height(&self) -> usize {
        self.mask.height
    }

    pub fn classes(&self) -> usize {
        self.mask.classes
    }

    pub fn stamp(&self) -> f64 {
        self.mask.stamp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_indexing_round_trip() {
        let mut mask = ScoreMask::<f64>::new(4, 3, 2, 0.0);
        let p = ProbabilityVector::new(vec![0.25, 0.75]).unwrap();
        mask.set_pixel(3, 2, &p);
        assert_eq!(mask.pixel(3, 2), p.values());
        assert_eq!(mask.argmax(3, 2), 1);
        mask.validate().unwrap();
    }

    #[test]
    fn depth_zero_is_invalid() {
        let mut d = DepthImage::<f64>::new(2, 2, 0.0);
        assert!(d.valid_at(0, 0).is_none());
        d.set(0, 0, 3.5);
        assert_eq!(d.valid_at(0, 0), Some(3.5));
        assert!(DepthImage::from_depths(1, 1, 0.0, vec![-1.0]).is_err());
    }

    #[test]
    fn fused_mask_validity_flags() {
        let mask = ScoreMask::<f64>::new(2, 2, 3, 1.0);
        let fused = FusedMask::from_mask(mask);
        assert_eq!(fused.valid_count(), 4);
        let empty = FusedMask::<f64>::invalid(2, 2, 3, 1.0);
        assert_eq!(empty.valid_count(), 0);
    }
}
