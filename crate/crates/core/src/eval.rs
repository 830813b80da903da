//! IoU coherence evaluation of segmented clouds against a ground-truth
//! semantic voxel map, with optional camera-FoV restriction.

use crate::cloud::{CloudFrame, SemanticCloud};
use crate::error::{FusionError, Result};
use crate::geometry::{project_point, CameraModel, Projection};
use crate::math::RigidTransform;
use crate::registry::{ClassId, ClassRegistry};
use crate::scalar::Real;
use crate::voxel::VoxelMap;

/// Per-class true positives, false positives, and false negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
    /// Points with no ground-truth voxel, excluded from the counts.
    pub unmatched: u64,
}

impl ConfusionCounts {
    pub fn new(classes: usize) -> Self {
        Self {
            tp: vec![0; classes],
            fp: vec![0; classes],
            fn_: vec![0; classes],
            unmatched: 0,
        }
    }

    pub fn classes(&self) -> usize {
        self.tp.len()
    }

    pub fn record(&mut self, predicted: ClassId, ground_truth: ClassId) {
        if predicted == ground_truth {
            self.tp[predicted] += 1;
        } else {
            self.fp[predicted] += 1;
            self.fn_[ground_truth] += 1;
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for c in 0..self.tp.len() {
            self.tp[c] += other.tp[c];
            self.fp[c] += other.fp[c];
            self.fn_[c] += other.fn_[c];
        }
        self.unmatched += other.unmatched;
    }

    pub fn matched(&self) -> u64 {
        self.tp.iter().sum::<u64>() + self.fp.iter().sum::<u64>()
    }
}

/// Per-point labeling outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLabel {
    Matched { predicted: ClassId, ground_truth: ClassId },
    Unmatched { predicted: ClassId },
}

/// Pair each point's argmax class with the label of its containing
/// ground-truth voxel; points in unobserved voxels are reported unmatched.
pub fn label_against_map<T: Real>(
    cloud: &SemanticCloud<T>,
    gt_map: &VoxelMap<T>,
) -> Result<(Vec<PointLabel>, ConfusionCounts)> {
    if cloud.frame != CloudFrame::World {
        return Err(FusionError::WrongFrame("label_against_map"));
    }
    let mut counts = ConfusionCounts::new(gt_map.classes());
    let labels = cloud
        .points
        .iter()
        .map(|p| match gt_map.query(p.position) {
            Some((_, gt_class, _)) => {
                counts.record(p.argmax_class, gt_class);
                PointLabel::Matched {
                    predicted: p.argmax_class,
                    ground_truth: gt_class,
                }
            }
            None => {
                counts.unmatched += 1;
                PointLabel::Unmatched {
                    predicted: p.argmax_class,
                }
            }
        })
        .collect();
    Ok((labels, counts))
}

/// Per-class and mean intersection-over-union.
#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    /// `None` where the class never occurs (zero denominator).
    pub per_class: Vec<Option<f64>>,
    /// Mean over classes with a defined IoU.
    pub mean: Option<f64>,
}

/// `IoU_c = TP_c / (TP_c + FP_c + FN_c)`; undefined classes are excluded
/// from the mean.
pub fn iou(counts: &ConfusionCounts) -> IouReport {
    let per_class: Vec<Option<f64>> = (0..counts.classes())
        .map(|c| {
            let denom = counts.tp[c] + counts.fp[c] + counts.fn_[c];
            (denom > 0).then(|| counts.tp[c] as f64 / denom as f64)
        })
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    IouReport { per_class, mean }
}

impl IouReport {
    pub fn class_iou(&self, class: ClassId) -> Option<f64> {
        self.per_class.get(class).copied().flatten()
    }

    /// Results table, one row per class plus the mean.
    pub fn to_text(&self, registry: &ClassRegistry) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<14} {:>8}\n", "class", "IoU"));
        for (c, value) in self.per_class.iter().enumerate() {
            match value {
                Some(v) => out.push_str(&format!("{:<14} {:>8.4}\n", registry.name(c), v)),
                None => out.push_str(&format!("{:<14} {:>8}\n", registry.name(c), "-")),
            }
        }
        match self.mean {
            Some(m) => out.push_str(&format!("{:<14} {:>8.4}\n", "mean", m)),
            None => out.push_str(&format!("{:<14} {:>8}\n", "mean", "-")),
        }
        out
    }

    pub fn to_csv(&self, registry: &ClassRegistry) -> String {
        let mut out = String::from("class,iou\n");
        for (c, value) in self.per_class.iter().enumerate() {
            match value {
                Some(v) => out.push_str(&format!("{},{}\n", registry.name(c), v)),
                None => out.push_str(&format!("{},\n", registry.name(c))),
            }
        }
        match self.mean {
            Some(m) => out.push_str(&format!("mean,{m}\n")),
            None => out.push_str("mean,\n"),
        }
        out
    }
}

/// Keep only the points that project inside the camera image with positive
/// depth. `camera_from_cloud` maps the cloud's frame into the camera frame.
pub fn restrict_to_fov<T: Real>(
    cloud: &SemanticCloud<T>,
    camera: &CameraModel<T>,
    camera_from_cloud: &RigidTransform<T>,
) -> SemanticCloud<T> {
    let points = cloud
        .points
        .iter()
        .filter(|p| {
            matches!(
                project_point(camera, camera_from_cloud.apply(p.position)),
                Projection::Inside { .. }
            )
        })
        .cloned()
        .collect();
    SemanticCloud::new(points, cloud.scan_stamp, cloud.frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::SemanticPoint;
    use crate::config::{HorizonMode, ScanMerge};
    use crate::math::{UnitQuaternion, Vec3};
    use crate::prob::ProbabilityVector;

    fn one_hot_cloud(points: Vec<(Vec3<f64>, usize)>, classes: usize) -> SemanticCloud<f64> {
        let pts = points
            .into_iter()
            .map(|(pos, class)| {
                SemanticPoint::new(
                    pos,
                    0.0,
                    0.0,
                    ProbabilityVector::one_hot_smoothed(class, classes, 1e-9),
                )
                .unwrap()
            })
            .collect();
        SemanticCloud::new(pts, 0.0, CloudFrame::World)
    }

    fn gt_map_from(points: Vec<(Vec3<f64>, usize)>, classes: usize) -> VoxelMap<f64> {
        let mut map = VoxelMap::new(0.25, classes, 4, HorizonMode::Fold, ScanMerge::Bayes, 1e-9);
        map.integrate_cloud(&one_hot_cloud(points, classes), 0).unwrap();
        map
    }

    #[test]
    fn matching_and_mismatching_points() {
        // GT: voxel (0,0,0) is class 0 (road); prediction says road and person.
        let gt = gt_map_from(vec![(Vec3::new(0.1, 0.1, 0.1), 0)], 3);
        let cloud = one_hot_cloud(
            vec![(Vec3::new(0.12, 0.08, 0.11), 0), (Vec3::new(0.2, 0.2, 0.2), 2)],
            3,
        );
        let (labels, counts) = label_against_map(&cloud, &gt).unwrap();
        assert_eq!(
            labels[0],
            PointLabel::Matched { predicted: 0, ground_truth: 0 }
        );
        assert_eq!(counts.tp[0], 1);
        assert_eq!(counts.fp[2], 1);
        assert_eq!(counts.fn_[0], 1);
        // TP + FN accounting covers every matched point.
        let matched: u64 = counts.tp.iter().sum::<u64>() + counts.fn_.iter().sum::<u64>();
        assert_eq!(matched, 2);
    }

    #[test]
    fn points_off_the_map_are_unmatched() {
        let gt = gt_map_from(vec![(Vec3::new(0.1, 0.1, 0.1), 0)], 3);
        let cloud = one_hot_cloud(vec![(Vec3::new(9.0, 9.0, 9.0), 0)], 3);
        let (labels, counts) = label_against_map(&cloud, &gt).unwrap();
        assert_eq!(labels[0], PointLabel::Unmatched { predicted: 0 });
        assert_eq!(counts.unmatched, 1);
        assert_eq!(counts.matched(), 0);
    }

    #[test]
    fn empty_map_leaves_all_unmatched() {
        let gt = VoxelMap::<f64>::new(0.25, 3, 4, HorizonMode::Fold, ScanMerge::Bayes, 1e-9);
        let cloud = one_hot_cloud(vec![(Vec3::new(0.0, 0.0, 0.0), 1)], 3);
        let (_, counts) = label_against_map(&cloud, &gt).unwrap();
        assert_eq!(counts.unmatched, 1);
    }

    #[test]
    fn iou_formula_cases() {
        let mut counts = ConfusionCounts::new(3);
        counts.tp[0] = 5;
        counts.fp[0] = 3;
        counts.fn_[0] = 2;
        let report = iou(&counts);
        assert_eq!(report.class_iou(0), Some(0.5));
        assert_eq!(report.class_iou(1), None, "absent class is undefined");
        assert_eq!(report.mean, Some(0.5), "mean skips undefined classes");
    }

    #[test]
    fn perfect_and_disjoint_predictions() {
        let gt = gt_map_from(
            vec![(Vec3::new(0.1, 0.1, 0.1), 0), (Vec3::new(1.1, 0.1, 0.1), 1)],
            3,
        );
        let perfect = one_hot_cloud(
            vec![(Vec3::new(0.1, 0.1, 0.1), 0), (Vec3::new(1.1, 0.1, 0.1), 1)],
            3,
        );
        let (_, counts) = label_against_map(&perfect, &gt).unwrap();
        let report = iou(&counts);
        assert_eq!(report.class_iou(0), Some(1.0));
        assert_eq!(report.class_iou(1), Some(1.0));
        assert_eq!(report.mean, Some(1.0));

        let disjoint = one_hot_cloud(
            vec![(Vec3::new(0.1, 0.1, 0.1), 1), (Vec3::new(1.1, 0.1, 0.1), 0)],
            3,
        );
        let (_, counts) = label_against_map(&disjoint, &gt).unwrap();
        let report = iou(&counts);
        assert_eq!(report.class_iou(0), Some(0.0));
        assert_eq!(report.class_iou(1), Some(0.0));
    }

    #[test]
    fn counts_are_permutation_invariant() {
        let gt = gt_map_from(
            vec![
                (Vec3::new(0.1, 0.1, 0.1), 0),
                (Vec3::new(1.1, 0.1, 0.1), 1),
                (Vec3::new(2.1, 0.1, 0.1), 2),
            ],
            3,
        );
        let points = vec![
            (Vec3::new(0.1, 0.1, 0.1), 0),
            (Vec3::new(1.1, 0.1, 0.1), 2),
            (Vec3::new(2.1, 0.1, 0.1), 2),
        ];
        let (_, a) = label_against_map(&one_hot_cloud(points.clone(), 3), &gt).unwrap();
        let mut reversed = points;
        reversed.reverse();
        let (_, b) = label_against_map(&one_hot_cloud(reversed, 3), &gt).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn label_counts_match_double_loop_oracle() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        let gt_points: Vec<(Vec3<f64>, usize)> = (0..300)
            .map(|_| {
                (
                    Vec3::new(
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-0.5..0.5),
                    ),
                    rng.random_range(0..3usize),
                )
            })
            .collect();
        let gt = gt_map_from(gt_points, 3);
        let pred_points: Vec<(Vec3<f64>, usize)> = (0..300)
            .map(|_| {
                (
                    Vec3::new(
                        rng.random_range(-2.5..2.5),
                        rng.random_range(-2.5..2.5),
                        rng.random_range(-0.5..0.5),
                    ),
                    rng.random_range(0..3usize),
                )
            })
            .collect();
        let cloud = one_hot_cloud(pred_points.clone(), 3);
        let (_, counts) = label_against_map(&cloud, &gt).unwrap();

        // Brute-force recount over all points.
        let mut oracle = ConfusionCounts::new(3);
        for (pos, pred) in &pred_points {
            match gt.query(*pos) {
                Some((_, gt_class, _)) => oracle.record(*pred, gt_class),
                None => oracle.unmatched += 1,
            }
        }
        assert_eq!(counts, oracle);
    }

    #[test]
    fn fov_restriction_trivial_cases() {
        let cam = CameraModel {
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 50.0,
            width: 100,
            height: 100,
        };
        let on_axis = one_hot_cloud(
            vec![(Vec3::new(0.0, 0.0, 5.0), 0), (Vec3::new(0.0, 0.0, 9.0), 0)],
            3,
        );
        let kept = restrict_to_fov(&on_axis, &cam, &RigidTransform::identity());
        assert_eq!(kept.len(), 2, "points on the optical axis are kept");

        // Camera looking the other way: z points away from every point.
        let away = RigidTransform::new(
            UnitQuaternion::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), std::f64::consts::PI),
            Vec3::zero(),
        );
        let kept = restrict_to_fov(&on_axis, &cam, &away);
        assert!(kept.is_empty(), "camera looking away keeps nothing");
    }

    #[test]
    fn hemisphere_kept_fraction_matches_solid_angle() {
        // Points uniform on the front hemisphere. A square 90-degree FoV
        // pyramid subtends 4*asin(sin(45)*sin(45)) = 2*pi/3 steradians,
        // one third of the hemisphere.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        let n = 200_000;
        let mut points = Vec::with_capacity(n);
        while points.len() < n {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            let z: f64 = rng.random_range(0.0..1.0);
            let r2 = x * x + y * y + z * z;
            if r2 > 1.0 || r2 < 1e-6 || z <= 0.0 {
                continue;
            }
            let r = r2.sqrt();
            points.push((Vec3::new(x / r * 10.0, y / r * 10.0, z / r * 10.0), 0));
        }
        let cloud = one_hot_cloud(points, 3);
        // 90 degree square FoV: fx = width/2.
        let cam = CameraModel {
            fx: 50.0,
            fy: 50.0,
            cx: 50.0,
            cy: 50.0,
            width: 100,
            height: 100,
        };
        let kept = restrict_to_fov(&cloud, &cam, &RigidTransform::identity());
        let fraction = kept.len() as f64 / cloud.len() as f64;
        let expected = 4.0 * 0.5f64.asin() / (2.0 * std::f64::consts::PI);
        assert!(
            (fraction - expected).abs() < 0.02,
            "kept {fraction:.4}, analytic {expected:.4}"
        );
    }

    #[test]
    fn noiseless_round_trip_gives_perfect_iou() {
        // integrate -> label the same cloud: IoU 1.0 for every present class
        // (one class per voxel by construction).
        let mut points = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                points.push((
                    Vec3::new(i as f64 * 0.25 + 0.1, j as f64 * 0.25 + 0.1, 0.05),
                    (i + j) % 3,
                ));
            }
        }
        let gt = gt_map_from(points.clone(), 3);
        let cloud = one_hot_cloud(points, 3);
        let (_, counts) = label_against_map(&cloud, &gt).unwrap();
        let report = iou(&counts);
        assert_eq!(report.mean, Some(1.0));
        for c in 0..3 {
            assert_eq!(report.class_iou(c), Some(1.0));
        }
    }

    #[test]
    fn report_rendering() {
        let reg = ClassRegistry::new(vec![("road", false), ("person", true)]).unwrap();
        let mut counts = ConfusionCounts::new(2);
        counts.tp[0] = 3;
        counts.fn_[0] = 1;
        let report = iou(&counts);
        let text = report.to_text(&reg);
        assert!(text.contains("road"));
        assert!(text.contains("0.7500"));
        assert!(text.contains("person"));
        let csv = report.to_csv(&reg);
        assert!(csv.starts_with("class,iou\n"));
        assert!(csv.contains("road,0.75"));
        assert!(csv.contains("person,\n"));
    }
}
