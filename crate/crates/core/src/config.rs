//! Fusion configuration shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::prob::DEFAULT_EPSILON_PROB;
use crate::registry::ClassRegistry;
use crate::scalar::Real;

/// What happens to the oldest per-scan voxel observation once the deque is full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonMode {
    /// Discard it; the map only remembers the last `n` scans.
    Drop,
    /// Fold it into the infinite-horizon log posterior.
    Fold,
}

/// How multiple points landing in one voxel within a single scan are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMerge {
    /// Bayes self-fusion of the point score vectors (default).
    Bayes,
    /// Arithmetic mean of the point score vectors.
    Mean,
}

/// Whether the motion-compensating transform chain is evaluated per point or
/// once per scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampMode {
    /// Each point uses `scan_stamp + stamp_offset`.
    PerPoint,
    /// All points use the scan stamp (offsets ignored).
    PerScan,
}

/// Per-class smoothing coefficients, either explicit or derived from the
/// registry's dynamic flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, bound = "")]
pub enum AlphaSpec<T: Real> {
    ByFlag { dynamic: T, r#static: T },
    Explicit(Vec<T>),
}

impl<T: Real> AlphaSpec<T> {
    pub fn resolve(&self, registry: &ClassRegistry) -> Result<Vec<T>> {
        match self {
            AlphaSpec::Explicit(values) => {
                if values.len() != registry.count() {
                    return Err(FusionError::DimensionMismatch {
                        context: "alpha",
                        expected: registry.count(),
                        actual: values.len(),
                    });
                }
                Ok(values.clone())
            }
            AlphaSpec::ByFlag { dynamic, r#static } => Ok(registry
                .dynamic_flags()
                .iter()
                .map(|&d| if d { *dynamic } else { *r#static })
                .collect()),
        }
    }
}

/// Knobs of the fusion pipeline. Constructed via [`FusionConfig::for_registry`]
/// or deserialized from the config JSON and validated with
/// [`FusionConfig::validate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default = "FusionConfig::default_json", bound = "")]
pub struct FusionConfig<T: Real> {
    /// Image weight of the point/image score blend, in `[0,1]`.
    pub w_img: T,
    /// Per-class temporal smoothing coefficients, length `C`.
    pub alpha: Vec<T>,
    /// Foreground distance quantile, in `(0,1]`.
    pub quantile_q: T,
    /// Margin in meters added to the quantile threshold.
    pub foreground_margin: T,
    /// Clamp for zero probabilities before logs.
    pub epsilon_prob: T,
    /// Voxel edge length in meters.
    pub voxel_size: T,
    /// Per-voxel deque length `n` (scans of short-horizon memory).
    pub deque_len: usize,
    pub horizon_mode: HorizonMode,
    pub scan_merge: ScanMerge,
    pub timestamp_mode: TimestampMode,
    /// Allowed extrapolation when interpolating poses, seconds.
    pub pose_slack: f64,
}

impl<T: Real> FusionConfig<T> {
    fn default_json() -> Self {
        Self::for_registry(&ClassRegistry::default_15())
    }

    /// Defaults: `w_img 0.5`, alpha `0.8` dynamic / `0.3` static, quantile
    /// `0.25`, margin `0.5 m`, epsilon `1e-9`, voxel `0.25 m`, deque `8`.
    pub fn for_registry(registry: &ClassRegistry) -> Self {
        let alpha = AlphaSpec::ByFlag {
            dynamic: T::from_f64_lit(0.8),
            r#static: T::from_f64_lit(0.3),
        }
        .resolve(registry)
        .expect("flag-derived alpha always matches the registry");
        Self {
            w_img: T::from_f64_lit(0.5),
            alpha,
            quantile_q: T::from_f64_lit(0.25),
            foreground_margin: T::from_f64_lit(0.5),
            epsilon_prob: T::from_f64_lit(DEFAULT_EPSILON_PROB),
            voxel_size: T::from_f64_lit(0.25),
            deque_len: 8,
            horizon_mode: HorizonMode::Fold,
            scan_merge: ScanMerge::Bayes,
            timestamp_mode: TimestampMode::PerPoint,
            pose_slack: 0.1,
        }
    }

    pub fn validate(&self, class_count: usize) -> Result<()> {
        let unit = T::zero()..=T::one();
        if !unit.contains(&self.w_img) {
            return Err(FusionError::InvalidConfig(format!(
                "w_img {} outside [0,1]",
                self.w_img
            )));
        }
        if self.alpha.len() != class_count {
            return Err(FusionError::DimensionMismatch {
                context: "alpha",
                expected: class_count,
                actual: self.alpha.len(),
            });
        }
        for &a in &self.alpha {
            if !unit.contains(&a) {
                return Err(FusionError::InvalidConfig(format!(
                    "alpha {} outside [0,1]",
                    a
                )));
            }
        }
        if self.quantile_q <= T::zero() || self.quantile_q > T::one() {
            return Err(FusionError::InvalidConfig(format!(
                "quantile_q {} outside (0,1]",
                self.quantile_q
            )));
        }
        if self.foreground_margin < T::zero() {
            return Err(FusionError::InvalidConfig("negative margin".into()));
        }
        if self.epsilon_prob <= T::zero() {
            return Err(FusionError::InvalidConfig(format!(
                "epsilon_prob {} must be > 0",
                self.epsilon_prob
            )));
        }
        if self.voxel_size <= T::zero() {
            return Err(FusionError::InvalidConfig(format!(
                "voxel_size {} must be > 0",
                self.voxel_size
            )));
        }
        if self.pose_slack < 0.0 {
            return Err(FusionError::InvalidConfig("negative pose_slack".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let reg = ClassRegistry::default_15();
        let cfg = FusionConfig::<f64>::for_registry(&reg);
        cfg.validate(reg.count()).unwrap();
        assert_eq!(cfg.alpha.len(), 15);
        assert_eq!(cfg.alpha[reg.lookup("person").unwrap()], 0.8);
        assert_eq!(cfg.alpha[reg.lookup("road").unwrap()], 0.3);
    }

    #[test]
    fn rejects_out_of_range() {
        let reg = ClassRegistry::default_15();
        let mut cfg = FusionConfig::<f64>::for_registry(&reg);
        cfg.w_img = 1.5;
        assert!(cfg.validate(reg.count()).is_err());

        let mut cfg = FusionConfig::<f64>::for_registry(&reg);
        cfg.quantile_q = 0.0;
        assert!(cfg.validate(reg.count()).is_err());

        let mut cfg = FusionConfig::<f64>::for_registry(&reg);
        cfg.alpha.pop();
        assert!(cfg.validate(reg.count()).is_err());
    }

    #[test]
    fn alpha_spec_json_forms() {
        let reg = ClassRegistry::default_15();
        let by_flag: AlphaSpec<f64> =
            serde_json::from_str(r#"{"dynamic":0.9,"static":0.2}"#).unwrap();
        let resolved = by_flag.resolve(&reg).unwrap();
        assert_eq!(resolved[reg.lookup("vehicle").unwrap()], 0.9);

        let explicit: AlphaSpec<f64> = serde_json::from_str("[0.5,0.5]").unwrap();
        assert!(explicit.resolve(&reg).is_err());
    }
}
