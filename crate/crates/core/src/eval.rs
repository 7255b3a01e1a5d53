//! Frame-level and video-level mean average precision, spatio-temporal tube
//! overlap, and the COCO-style average over IoU thresholds 0.50..0.95.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, BBox, ScoredBox};
use crate::num::Real;
use crate::tubes::ActionTube;

/// One detection box anchored to a video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetBox<T> {
    pub video: String,
    pub frame: usize,
    pub det: ScoredBox<T>,
}

/// One ground-truth box anchored to a video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GtBox<T> {
    pub video: String,
    pub frame: usize,
    pub class_id: usize,
    pub bbox: BBox<T>,
}

/// Ground-truth spatio-temporal track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthTube<T> {
    pub video: String,
    pub class_id: usize,
    pub elements: Vec<(usize, BBox<T>)>,
}

/// Detected tube anchored to its video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTube<T> {
    pub video: String,
    pub tube: ActionTube<T>,
}

/// Precision/recall points along a ranked detection list; recall is
/// non-decreasing along the ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve<T> {
    pub points: Vec<(T, T)>, // (recall, precision)
}

impl<T: Real> PrCurve<T> {
    /// Builds the curve from per-rank true-positive flags.
    pub fn from_matches(tp_flags: &[bool], num_gt: usize) -> Self {
        debug_assert!(num_gt > 0);
        let gt = T::of(num_gt as f64);
        let mut tp = T::zero();
        let mut points = Vec::with_capacity(tp_flags.len());
        for (rank, &is_tp) in tp_flags.iter().enumerate() {
            if is_tp {
                tp += T::one();
            }
            let seen = T::of((rank + 1) as f64);
            points.push((tp / gt, tp / seen));
        }
        Self { points }
    }

    /// Area under the monotone-envelope PR curve (all-point interpolation).
    pub fn average_precision(&self) -> T {
        if self.points.is_empty() {
            return T::zero();
        }
        let mut env = self.points.clone();
        for i in (0..env.len() - 1).rev() {
            env[i].1 = env[i].1.max(env[i + 1].1);
        }
        let mut ap = T::zero();
        let mut prev_recall = T::zero();
        for (recall, precision) in env {
            if recall > prev_recall {
                ap += (recall - prev_recall) * precision;
                prev_recall = recall;
            }
        }
        ap
    }
}

/// Per-class AP and the mean over classes that have ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult<T> {
    pub per_class_ap: BTreeMap<usize, T>,
    pub map: T,
    pub thresholds: Vec<T>,
    /// Classes that appear in the detections but have no ground-truth
    /// instance; their AP is undefined and they are excluded from the mean.
    pub skipped_classes: Vec<usize>,
}

/// Frame-level AP for one class at overlap threshold `delta`.
///
/// Detections are ranked by descending score; each is a true positive when
/// its IoU with some still-unmatched same-frame, same-class ground-truth box
/// strictly exceeds `delta` (the highest-IoU one is consumed). Returns `None`
/// when the class has no ground-truth instance.
pub fn frame_ap<T: Real>(
    dets: &[DetBox<T>],
    gts: &[GtBox<T>],
    class_id: usize,
    delta: T,
) -> Option<T> {
    let mut gt_pool: BTreeMap<(&str, usize), Vec<(BBox<T>, bool)>> = BTreeMap::new();
    let mut num_gt = 0usize;
    for gt in gts.iter().filter(|g| g.class_id == class_id) {
        gt_pool
            .entry((gt.video.as_str(), gt.frame))
            .or_default()
            .push((gt.bbox, false));
        num_gt += 1;
    }
    if num_gt == 0 {
        return None;
    }

    let mut ranked: Vec<&DetBox<T>> = dets
        .iter()
        .filter(|d| d.det.class_id == class_id)
        .collect();
    // stable sort keeps input order among equal scores
    ranked.sort_by(|a, b| {
        b.det
            .score
            .partial_cmp(&a.det.score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let tp_flags: Vec<bool> = ranked
        .iter()
        .map(|d| {
            let Some(cands) = gt_pool.get_mut(&(d.video.as_str(), d.frame)) else {
                return false;
            };
            let mut best: Option<(usize, T)> = None;
            for (i, (bbox, matched)) in cands.iter().enumerate() {
                if *matched {
                    continue;
                }
                let ov = iou(d.det.bbox, *bbox);
                if best.map(|(_, b)| ov > b).unwrap_or(true) {
                    best = Some((i, ov));
                }
            }
            match best {
                Some((i, ov)) if ov > delta => {
                    cands[i].1 = true;
                    true
                }
                _ => false,
            }
        })
        .collect();

    Some(PrCurve::from_matches(&tp_flags, num_gt).average_precision())
}

/// Frame-level mAP over every class with at least one ground-truth instance.
pub fn frame_map<T: Real>(dets: &[DetBox<T>], gts: &[GtBox<T>], delta: T) -> EvalResult<T> {
    let gt_classes: BTreeSet<usize> = gts.iter().map(|g| g.class_id).collect();
    let det_classes: BTreeSet<usize> = dets.iter().map(|d| d.det.class_id).collect();
    let mut per_class_ap = BTreeMap::new();
    for &c in &gt_classes {
        let ap = frame_ap(dets, gts, c, delta).unwrap_or_else(T::zero);
        per_class_ap.insert(c, ap);
    }
    finish_result(per_class_ap, &gt_classes, &det_classes, vec![delta])
}

fn finish_result<T: Real>(
    per_class_ap: BTreeMap<usize, T>,
    gt_classes: &BTreeSet<usize>,
    det_classes: &BTreeSet<usize>,
    thresholds: Vec<T>,
) -> EvalResult<T> {
    let map = if per_class_ap.is_empty() {
        T::zero()
    } else {
        per_class_ap.values().fold(T::zero(), |a, v| a + *v)
            / T::of(per_class_ap.len() as f64)
    };
    let skipped_classes = det_classes.difference(gt_classes).copied().collect();
    EvalResult {
        per_class_ap,
        map,
        thresholds,
        skipped_classes,
    }
}

/// Spatio-temporal overlap of two tracks in the same video: the temporal
/// Jaccard of their frame-index sets times the mean spatial IoU over the
/// co-occurring frames. Zero when the temporal intersection is empty.
pub fn tube_iou<T: Real>(a: &[(usize, BBox<T>)], b: &[(usize, BBox<T>)]) -> T {
    let bm: BTreeMap<usize, BBox<T>> = b.iter().copied().collect();
    let am: BTreeMap<usize, BBox<T>> = a.iter().copied().collect();
    let mut inter = 0usize;
    let mut spatial = T::zero();
    for (f, abox) in &am {
        if let Some(bbox) = bm.get(f) {
            inter += 1;
            spatial += iou(*abox, *bbox);
        }
    }
    if inter == 0 {
        return T::zero();
    }
    let union = am.len() + bm.len() - inter;
    let temporal = T::of(inter as f64) / T::of(union as f64);
    temporal * (spatial / T::of(inter as f64))
}

/// Video-level AP for one class: tubes ranked by `tube_score`, matched
/// greedily to unmatched same-video ground-truth tubes with tube IoU above
/// `delta`.
pub fn video_ap<T: Real>(
    tubes: &[VideoTube<T>],
    gts: &[GroundTruthTube<T>],
    class_id: usize,
    delta: T,
) -> Option<T> {
    let mut gt_pool: Vec<(&GroundTruthTube<T>, bool)> = gts
        .iter()
        .filter(|g| g.class_id == class_id)
        .map(|g| (g, false))
        .collect();
    if gt_pool.is_empty() {
        return None;
    }
    let num_gt = gt_pool.len();

    let mut ranked: Vec<(&VideoTube<T>, Vec<(usize, BBox<T>)>)> = tubes
        .iter()
        .filter(|t| t.tube.class_id == class_id)
        .map(|t| (t, t.tube.span()))
        .collect();
    ranked.sort_by(|a, b| {
        b.0.tube
            .tube_score
            .partial_cmp(&a.0.tube.tube_score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let tp_flags: Vec<bool> = ranked
        .iter()
        .map(|(t, span)| {
            let mut best: Option<(usize, T)> = None;
            for (i, (gt, matched)) in gt_pool.iter().enumerate() {
                if *matched || gt.video != t.video {
                    continue;
                }
                let ov = tube_iou(span, &gt.elements);
                if best.map(|(_, b)| ov > b).unwrap_or(true) {
                    best = Some((i, ov));
                }
            }
            match best {
                Some((i, ov)) if ov > delta => {
                    gt_pool[i].1 = true;
                    true
                }
                _ => false,
            }
        })
        .collect();

    Some(PrCurve::from_matches(&tp_flags, num_gt).average_precision())
}

/// Video-level mAP over every class with at least one ground-truth tube.
pub fn video_map<T: Real>(
    tubes: &[VideoTube<T>],
    gts: &[GroundTruthTube<T>],
    delta: T,
) -> EvalResult<T> {
    let gt_classes: BTreeSet<usize> = gts.iter().map(|g| g.class_id).collect();
    let det_classes: BTreeSet<usize> = tubes.iter().map(|t| t.tube.class_id).collect();
    let mut per_class_ap = BTreeMap::new();
    for &c in &gt_classes {
        let ap = video_ap(tubes, gts, c, delta).unwrap_or_else(T::zero);
        per_class_ap.insert(c, ap);
    }
    finish_result(per_class_ap, &gt_classes, &det_classes, vec![delta])
}

/// The ten thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds<T: Real>() -> Vec<T> {
    (0..10).map(|i| T::of((50 + 5 * i) as f64 / 100.0)).collect()
}

/// Mean of the frame-level mAPs over the COCO threshold band.
pub fn coco_frame_map<T: Real>(dets: &[DetBox<T>], gts: &[GtBox<T>]) -> T {
    let ts = coco_thresholds::<T>();
    let sum = ts
        .iter()
        .fold(T::zero(), |acc, &d| acc + frame_map(dets, gts, d).map);
    sum / T::of(ts.len() as f64)
}

/// Mean of the video-level mAPs over the COCO threshold band.
pub fn coco_video_map<T: Real>(tubes: &[VideoTube<T>], gts: &[GroundTruthTube<T>]) -> T {
    let ts = coco_thresholds::<T>();
    let sum = ts
        .iter()
        .fold(T::zero(), |acc, &d| acc + video_map(tubes, gts, d).map);
    sum / T::of(ts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tubes::TubeElement;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox<f64> {
        BBox::new(x1, y1, x2, y2)
    }

    fn gt(video: &str, frame: usize, class_id: usize, bbox: BBox<f64>) -> GtBox<f64> {
        GtBox {
            video: video.into(),
            frame,
            class_id,
            bbox,
        }
    }

    fn det(video: &str, frame: usize, class_id: usize, bbox: BBox<f64>, score: f64) -> DetBox<f64> {
        DetBox {
            video: video.into(),
            frame,
            det: ScoredBox::new(bbox, class_id, score),
        }
    }

    #[test]
    fn perfect_detections_give_ap_one() {
        let gts = vec![gt("v", 0, 0, b(0.0, 0.0, 10.0, 10.0)), gt("v", 1, 0, b(5.0, 5.0, 15.0, 15.0))];
        let dets = vec![
            det("v", 0, 0, b(0.0, 0.0, 10.0, 10.0), 0.9),
            det("v", 1, 0, b(5.0, 5.0, 15.0, 15.0), 0.8),
        ];
        assert_eq!(frame_ap(&dets, &gts, 0, 0.5), Some(1.0));
    }

    #[test]
    fn leading_false_positive_halves_ap() {
        // one gt; ranked list [FP 0.9, TP 0.8]: precision at full recall is 1/2
        let gts = vec![gt("v", 0, 0, b(0.0, 0.0, 10.0, 10.0))];
        let dets = vec![
            det("v", 0, 0, b(50.0, 50.0, 60.0, 60.0), 0.9),
            det("v", 0, 0, b(0.0, 0.0, 10.0, 10.0), 0.8),
        ];
        assert_eq!(frame_ap(&dets, &gts, 0, 0.5), Some(0.5));
    }

    #[test]
    fn no_detections_ap_zero() {
        let gts = vec![gt("v", 0, 0, b(0.0, 0.0, 10.0, 10.0))];
        assert_eq!(frame_ap(&[], &gts, 0, 0.5), Some(0.0));
    }

    #[test]
    fn no_ground_truth_ap_undefined() {
        let dets = vec![det("v", 0, 0, b(0.0, 0.0, 10.0, 10.0), 0.9)];
        assert_eq!(frame_ap(&dets, &[], 0, 0.5), None);
        let result = frame_map(&dets, &[], 0.5);
        assert_eq!(result.skipped_classes, vec![0]);
        assert!(result.per_class_ap.is_empty());
    }

    #[test]
    fn each_gt_matches_at_most_once() {
        let gts = vec![gt("v", 0, 0, b(0.0, 0.0, 10.0, 10.0))];
        let dets = vec![
            det("v", 0, 0, b(0.0, 0.0, 10.0, 10.0), 0.9),
            det("v", 0, 0, b(0.0, 0.0, 10.0, 10.0), 0.8),
        ];
        let ap = frame_ap(&dets, &gts, 0, 0.5).unwrap();
        assert_eq!(ap, 1.0); // TP first, duplicate FP after full recall
    }

    fn tube_of(class_id: usize, frames: std::ops::Range<usize>, bbox: BBox<f64>, score: f64) -> ActionTube<f64> {
        ActionTube::new(
            class_id,
            frames
                .map(|f| TubeElement {
                    frame_idx: f,
                    bbox,
                    score,
                })
                .collect(),
        )
    }

    #[test]
    fn tube_iou_identical() {
        let a = tube_of(0, 0..10, b(0.0, 0.0, 10.0, 10.0), 0.9);
        assert_eq!(tube_iou(&a.span(), &a.span()), 1.0);
    }

    #[test]
    fn tube_iou_temporally_disjoint() {
        let a = tube_of(0, 0..5, b(0.0, 0.0, 10.0, 10.0), 0.9);
        let c = tube_of(0, 5..10, b(0.0, 0.0, 10.0, 10.0), 0.9);
        assert_eq!(tube_iou(&a.span(), &c.span()), 0.0);
    }

    #[test]
    fn tube_iou_half_coverage() {
        let a = tube_of(0, 0..10, b(0.0, 0.0, 10.0, 10.0), 0.9);
        let c = tube_of(0, 0..5, b(0.0, 0.0, 10.0, 10.0), 0.9);
        assert_eq!(tube_iou(&a.span(), &c.span()), 0.5);
    }

    #[test]
    fn tube_iou_below_one_for_any_difference() {
        let a = tube_of(0, 0..5, b(0.0, 0.0, 10.0, 10.0), 0.9);
        let mut shifted = a.span();
        shifted[2].1 = b(1.0, 0.0, 11.0, 10.0);
        assert!(tube_iou(&a.span(), &shifted) < 1.0);
        let shorter = tube_of(0, 0..4, b(0.0, 0.0, 10.0, 10.0), 0.9);
        assert!(tube_iou(&a.span(), &shorter.span()) < 1.0);
    }

    #[test]
    fn video_map_perfect_and_half() {
        let gt_tube = GroundTruthTube {
            video: "v".into(),
            class_id: 0,
            elements: (0..10).map(|f| (f, b(0.0, 0.0, 10.0, 10.0))).collect(),
        };
        let gt2 = GroundTruthTube {
            video: "w".into(),
            ..gt_tube.clone()
        };
        let detected = VideoTube {
            video: "v".into(),
            tube: tube_of(0, 0..10, b(0.0, 0.0, 10.0, 10.0), 0.9),
        };
        let perfect2 = VideoTube {
            video: "w".into(),
            tube: tube_of(0, 0..10, b(0.0, 0.0, 10.0, 10.0), 0.8),
        };
        let both = vec![detected.clone(), perfect2];
        assert_eq!(video_map(&both, &[gt_tube.clone(), gt2.clone()], 0.5).map, 1.0);
        // half the gt tubes detected perfectly, none spurious
        assert_eq!(video_map(&[detected], &[gt_tube, gt2], 0.5).map, 0.5);
        assert_eq!(video_map::<f64>(&[], &[], 0.5).map, 0.0);
    }

    #[test]
    fn coco_average_counts_passing_thresholds() {
        let gts = vec![gt("v", 0, 0, b(0.0, 0.0, 10.0, 10.0))];
        // IoU 0.52: correct at delta 0.5 only
        let dets = vec![det("v", 0, 0, b(0.0, 0.0, 10.0, 5.2), 0.9)];
        let at_05 = frame_map(&dets, &gts, 0.5).map;
        assert_eq!(at_05, 1.0);
        let coco = coco_frame_map(&dets, &gts);
        assert!((coco - at_05 / 10.0).abs() < 1e-12);
        // perfect detections: 1.0 across the whole band
        let perfect = vec![det("v", 0, 0, b(0.0, 0.0, 10.0, 10.0), 0.9)];
        assert_eq!(coco_frame_map(&perfect, &gts), 1.0);
        // empty detections: 0.0
        assert_eq!(coco_frame_map(&[], &gts), 0.0);
    }
}
