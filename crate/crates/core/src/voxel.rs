//! Allocentric sparse-voxel semantic map.
//!
//! Voxels fuse per-class score vectors with Bayes' rule under an independence
//! assumption. The fusion runs in log space: the class-wise products of many
//! near-one-hot distributions underflow in probability space, while sums of
//! logs stay finite and normalize exactly through log-sum-exp. A bounded
//! per-voxel deque keeps the last `n` per-scan observations for a short time
//! horizon; evicted scans are dropped or folded into the infinite-horizon
//! state depending on the configured mode.

use std::collections::{HashMap, VecDeque};

use crate::cloud::{CloudFrame, SemanticCloud};
use crate::config::{HorizonMode, ScanMerge};
use crate::error::{FusionError, Result};
use crate::math::Vec3;
use crate::prob::{from_log, log_sum_exp, to_log, LogProbabilityVector, ProbabilityVector};
use crate::registry::ClassId;
use crate::scalar::Real;

/// Grid index of a cubic voxel: componentwise floor of position / size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey {
    pub ix: i32,
    pub iy: i32,
    pub iz: i32,
}

/// Floor-convention key of a position (negative coordinates floor, not
/// truncate; a boundary position belongs to the upper cell).
pub fn voxel_key<T: Real>(position: Vec3<T>, voxel_size: T) -> VoxelKey {
    let f = |v: T| (v / voxel_size).floor().to_i32().expect("grid index fits i32");
    VoxelKey {
        ix: f(position.x),
        iy: f(position.y),
        iz: f(position.z),
    }
}

/// One per-scan observation retained in a voxel's deque.
#[derive(Debug, Clone)]
pub struct ScanObservation<T: Real> {
    pub scan_id: u64,
    pub log_scores: LogProbabilityVector<T>,
    pub point_count: u32,
}

/// A single occupied voxel.
#[derive(Debug, Clone)]
pub struct Voxel<T: Real> {
    /// Infinite-horizon log posterior; stays at the uniform prior in drop mode.
    pub log_infinite: LogProbabilityVector<T>,
    /// Mean of every point ever integrated into this voxel.
    pub mean_position: Vec3<T>,
    pub point_count: u64,
    deque: VecDeque<ScanObservation<T>>,
}

impl<T: Real> Voxel<T> {
    fn new(classes: usize) -> Self {
        Self {
            log_infinite: LogProbabilityVector::uniform(classes),
            mean_position: Vec3::zero(),
            point_count: 0,
            deque: VecDeque::new(),
        }
    }

    pub fn deque(&self) -> impl Iterator<Item = &ScanObservation<T>> {
        self.deque.iter()
    }

    pub fn deque_len(&self) -> usize {
        self.deque.len()
    }

    /// Posterior over the retained horizon: the infinite-horizon state folded
    /// with every deque entry.
    pub fn posterior(&self) -> ProbabilityVector<T> {
        let mut log = self.log_infinite.clone();
        for obs in &self.deque {
            log = log_bayes_update(&log, &obs.log_scores);
        }
        from_log(&log)
    }
}

/// One log-space Bayes step: add the log likelihood and renormalize through
/// log-sum-exp (max subtraction keeps every term finite).
pub fn log_bayes_update<T: Real>(
    prev: &LogProbabilityVector<T>,
    obs: &LogProbabilityVector<T>,
) -> LogProbabilityVector<T> {
    debug_assert_eq!(prev.len(), obs.len());
    let mut combined: Vec<T> = prev
        .values()
        .iter()
        .zip(obs.values())
        .map(|(&a, &b)| a + b)
        .collect();
    let norm = log_sum_exp(&combined);
    for v in combined.iter_mut() {
        *v = *v - norm;
    }
    LogProbabilityVector::from_normalized_unchecked(combined)
}

/// The numerically naive twin of the log-space fusion: voxel state as a raw
/// running product of probabilities, normalized only on read. Repeated
/// near-one-hot updates drive every component to zero, after which the
/// posterior is unrecoverable. Kept for demonstration and comparison.
#[derive(Debug, Clone)]
pub struct NaiveProbVoxel<T: Real> {
    product: Vec<T>,
}

impl<T: Real> NaiveProbVoxel<T> {
    pub fn new(classes: usize) -> Self {
        Self {
            product: vec![T::one() / T::from_usize(classes).unwrap(); classes],
        }
    }

    pub fn update(&mut self, obs: &ProbabilityVector<T>) {
        for (p, &o) in self.product.iter_mut().zip(obs.values()) {
            *p = *p * o;
        }
    }

    /// Normalized posterior, or `None` once the product has collapsed to an
    /// unnormalizable all-zero state.
    pub fn posterior(&self) -> Option<Vec<T>> {
        let sum: T = self.product.iter().copied().sum();
        (sum > T::zero()).then(|| self.product.iter().map(|&p| p / sum).collect())
    }

    pub fn raw(&self) -> &[T] {
        &self.product
    }
}

/// Summary of one cloud integration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntegrationSummary {
    pub scan_id: u64,
    pub points: usize,
    pub voxels_touched: usize,
    pub voxels_created: usize,
}

/// One exported voxel record.
#[derive(Debug, Clone)]
pub struct VoxelRecord<T: Real> {
    pub key: VoxelKey,
    pub mean_position: Vec3<T>,
    pub point_count: u64,
    pub posterior: ProbabilityVector<T>,
    pub argmax: ClassId,
}

/// Sparse voxel-hash semantic map.
#[derive(Debug, Clone)]
pub struct VoxelMap<T: Real> {
    voxel_size: T,
    classes: usize,
    horizon: usize,
    horizon_mode: HorizonMode,
    scan_merge: ScanMerge,
    epsilon_prob: T,
    storage: HashMap<VoxelKey, Voxel<T>>,
}

impl<T: Real> VoxelMap<T> {
    pub fn new(
        voxel_size: T,
        classes: usize,
        horizon: usize,
        horizon_mode: HorizonMode,
        scan_merge: ScanMerge,
        epsilon_prob: T,
    ) -> Self {
        Self {
            voxel_size,
            classes,
            horizon,
            horizon_mode,
            scan_merge,
            epsilon_prob,
            storage: HashMap::new(),
        }
    }

    pub fn voxel_size(&self) -> T {
        self.voxel_size
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn voxel(&self, key: &VoxelKey) -> Option<&Voxel<T>> {
        self.storage.get(key)
    }

    pub fn key_of(&self, position: Vec3<T>) -> VoxelKey {
        voxel_key(position, self.voxel_size)
    }

    /// Integrate a world-frame cloud as one scan.
    ///
    /// Points of the scan that share a voxel merge into a single per-scan
    /// observation first (Bayes self-fusion or arithmetic mean); the deque
    /// then absorbs the observation, evicting the oldest entry per the
    /// horizon mode once `n` is exceeded.
    pub fn integrate_cloud(
        &mut self,
        cloud: &SemanticCloud<T>,
        scan_id: u64,
    ) -> Result<IntegrationSummary> {
        if cloud.frame != CloudFrame::World {
            return Err(FusionError::WrongFrame("integrate_cloud"));
        }

        // Group point indices per voxel, preserving point order.
        let mut groups: HashMap<VoxelKey, Vec<usize>> = HashMap::new();
        for (i, p) in cloud.points.iter().enumerate() {
            groups.entry(self.key_of(p.position)).or_default().push(i);
        }

        let mut summary = IntegrationSummary {
            scan_id,
            points: cloud.points.len(),
            voxels_touched: groups.len(),
            voxels_created: 0,
        };

        for (key, indices) in groups {
            let observation = self.merge_scan_points(cloud, &indices);
            let voxel = self.storage.entry(key).or_insert_with(|| {
                summary.voxels_created += 1;
                Voxel::new(self.classes)
            });

            for &i in &indices {
                let p = &cloud.points[i];
                voxel.point_count += 1;
                let count = T::from_u64(voxel.point_count).unwrap();
                let delta = p.position - voxel.mean_position;
                voxel.mean_position = voxel.mean_position + delta / count;
            }

            voxel.deque.push_back(ScanObservation {
                scan_id,
                log_scores: observation,
                point_count: indices.len() as u32,
            });
            while voxel.deque.len() > self.horizon {
                let oldest = voxel.deque.pop_front().expect("non-empty deque");
                if self.horizon_mode == HorizonMode::Fold {
                    voxel.log_infinite = log_bayes_update(&voxel.log_infinite, &oldest.log_scores);
                }
            }
        }
        Ok(summary)
    }

    fn merge_scan_points(
        &self,
        cloud: &SemanticCloud<T>,
        indices: &[usize],
    ) -> LogProbabilityVector<T> {
        match self.scan_merge {
            ScanMerge::Bayes => {
                let mut log = to_log(&cloud.points[indices[0]].scores, self.epsilon_prob);
                for &i in &indices[1..] {
                    let obs = to_log(&cloud.points[i].scores, self.epsilon_prob);
                    log = log_bayes_update(&log, &obs);
                }
                log
            }
            ScanMerge::Mean => {
                let mut mean = vec![T::zero(); self.classes];
                let weight = T::one() / T::from_usize(indices.len()).unwrap();
                for &i in indices {
                    for (m, &s) in mean.iter_mut().zip(cloud.points[i].scores.values()) {
                        *m += s * weight;
                    }
                }
                to_log(
                    &ProbabilityVector::from_normalized_unchecked(mean),
                    self.epsilon_prob,
                )
            }
        }
    }

    /// Posterior at a position: the containing voxel's retained-horizon
    /// posterior, or `None` for unobserved space.
    pub fn query(&self, position: Vec3<T>) -> Option<(ProbabilityVector<T>, ClassId, u64)> {
        let voxel = self.storage.get(&self.key_of(position))?;
        let posterior = voxel.posterior();
        let argmax = posterior.argmax();
        Some((posterior, argmax, voxel.point_count))
    }

    /// Rebuild a queryable map from exported records (posterior snapshots).
    /// Deque state is not part of the export; each voxel starts with its
    /// posterior as the infinite-horizon state, which preserves the argmax
    /// exactly and the posterior up to the epsilon clamp.
    pub fn from_records(
        voxel_size: T,
        classes: usize,
        epsilon_prob: T,
        records: impl IntoIterator<Item = VoxelRecord<T>>,
    ) -> Self {
        let mut map = Self::new(
            voxel_size,
            classes,
            0,
            HorizonMode::Fold,
            ScanMerge::Bayes,
            epsilon_prob,
        );
        for rec in records {
            map.storage.insert(
                rec.key,
                Voxel {
                    log_infinite: to_log(&rec.posterior, epsilon_prob),
                    mean_position: rec.mean_position,
                    point_count: rec.point_count,
                    deque: VecDeque::new(),
                },
            );
        }
        map
    }

    /// One record per voxel, sorted by key for deterministic output.
    pub fn export(&self) -> Vec<VoxelRecord<T>> {
        let mut keys: Vec<&VoxelKey> = self.storage.keys().collect();
        keys.sort();
        keys.into_iter()
            .map(|key| {
                let voxel = &self.storage[key];
                let posterior = voxel.posterior();
                let argmax = posterior.argmax();
                VoxelRecord {
                    key: *key,
                    mean_position: voxel.mean_position,
                    point_count: voxel.point_count,
                    posterior,
                    argmax,
                }
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VoxelKey, &Voxel<T>)> {
        self.storage.iter()
    }
}
