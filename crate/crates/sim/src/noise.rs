//! Sensor noise emulation: class-score sampling around ground truth,
//! class confusion, detection dropout, and range noise.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use semfuse_core::prob::ProbabilityVector;
use semfuse_core::{ClassId, Probs};

/// A directed mislabeling tendency (ground truth -> reported class).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfusionPair {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorNoiseModel {
    /// Peakedness of sampled score vectors around the target class
    /// (Dirichlet with `1 + concentration` at the target, `1` elsewhere).
    /// `None` means noiseless one-hot scores.
    #[serde(default)]
    pub score_concentration: Option<f64>,
    /// Probability that a point/pixel of a confusable class reports its
    /// confusion target instead of the truth.
    #[serde(default)]
    pub mislabel_rate: f64,
    #[serde(default)]
    pub confusion: Vec<ConfusionPair>,
    #[serde(default = "one")]
    pub detection_recall: f64,
    #[serde(default = "default_score_range")]
    pub detection_score_range: [f64; 2],
    /// Gaussian range noise, meters.
    #[serde(default)]
    pub range_noise_sigma: f64,
}

fn one() -> f64 {
    1.0
}

fn default_score_range() -> [f64; 2] {
    [0.75, 0.75]
}

impl SensorNoiseModel {
    /// Exact ground truth everywhere.
    pub fn noiseless() -> Self {
        Self {
            score_concentration: None,
            mislabel_rate: 0.0,
            confusion: Vec::new(),
            detection_recall: 1.0,
            detection_score_range: [0.75, 0.75],
            range_noise_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(k) = self.score_concentration {
            if !(k > 0.0) {
                return Err(format!("score_concentration {k} must be > 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.mislabel_rate) {
            return Err(format!("mislabel_rate {} outside [0,1]", self.mislabel_rate));
        }
        if !(0.0..=1.0).contains(&self.detection_recall) {
            return Err(format!(
                "detection_recall {} outside [0,1]",
                self.detection_recall
            ));
        }
        let [lo, hi] = self.detection_score_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(format!("detection_score_range [{lo},{hi}] invalid"));
        }
        if self.range_noise_sigma < 0.0 {
            return Err("range_noise_sigma must be >= 0".into());
        }
        Ok(())
    }
}

/// Runtime form with class names resolved against a registry.
pub struct NoiseSampler {
    classes: usize,
    concentration: Option<f64>,
    mislabel_rate: f64,
    confusion: Vec<Vec<ClassId>>,
    detection_recall: f64,
    detection_score_range: [f64; 2],
    range_noise_sigma: f64,
}

impl NoiseSampler {
    pub fn new(
        model: &SensorNoiseModel,
        registry: &semfuse_core::ClassRegistry,
    ) -> Result<Self, String> {
        model.validate()?;
        let mut confusion = vec![Vec::new(); registry.count()];
        for pair in &model.confusion {
            let from = registry
                .lookup(&pair.from)
                .ok_or_else(|| format!("unknown confusion class '{}'", pair.from))?;
            let to = registry
                .lookup(&pair.to)
                .ok_or_else(|| format!("unknown confusion class '{}'", pair.to))?;
            confusion[from].push(to);
        }
        Ok(Self {
            classes: registry.count(),
            concentration: model.score_concentration,
            mislabel_rate: model.mislabel_rate,
            confusion,
            detection_recall: model.detection_recall,
            detection_score_range: model.detection_score_range,
            range_noise_sigma: model.range_noise_sigma,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// The class the sensor reports for ground truth `gt` (confusion pairs
    /// fire with the mislabel rate).
    pub fn reported_class(&self, gt: ClassId, rng: &mut ChaCha12Rng) -> ClassId {
        let targets = &self.confusion[gt];
        if targets.is_empty() || self.mislabel_rate == 0.0 {
            return gt;
        }
        if rng.random::<f64>() < self.mislabel_rate {
            targets[rng.random_range(0..targets.len())]
        } else {
            gt
        }
    }

    /// Sample a score vector peaked at `target`; exact one-hot when the
    /// concentration is unset.
    pub fn sample_scores(&self, target: ClassId, rng: &mut ChaCha12Rng) -> Probs {
        match self.concentration {
            None => ProbabilityVector::one_hot(target, self.classes),
            Some(kappa) => {
                let base = Gamma::new(1.0, 1.0).expect("valid gamma");
                let peak = Gamma::new(1.0 + kappa, 1.0).expect("valid gamma");
                let mut masses = Vec::with_capacity(self.classes);
                for c in 0..self.classes {
                    let g: f64 = if c == target {
                        peak.sample(rng)
                    } else {
                        base.sample(rng)
                    };
                    masses.push(g.max(1e-300));
                }
                ProbabilityVector::from_masses(masses).expect("positive gamma masses")
            }
        }
    }

    /// Full per-point pipeline: confusion, then score sampling.
    pub fn observe(&self, gt: ClassId, rng: &mut ChaCha12Rng) -> Probs {
        let reported = self.reported_class(gt, rng);
        self.sample_scores(reported, rng)
    }

    pub fn noisy_range(&self, range: f64, rng: &mut ChaCha12Rng) -> f64 {
        if self.range_noise_sigma == 0.0 {
            return range;
        }
        let normal = Normal::new(0.0, self.range_noise_sigma).expect("valid sigma");
        (range + normal.sample(rng)).max(1e-3)
    }

    /// Detection kept? And with which confidence score.
    pub fn detection_outcome(&self, rng: &mut ChaCha12Rng) -> Option<f64> {
        if rng.random::<f64>() >= self.detection_recall {
            return None;
        }
        let [lo, hi] = self.detection_score_range;
        let score = if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        };
        Some(score)
    }
}

/// Deterministic per-frame RNG: one independent stream per (sensor, frame).
pub fn frame_rng(seed: u64, sensor: u32, frame: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((sensor as u64) << 48) ^ frame);
    rng
}
