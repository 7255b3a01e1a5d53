use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::cooperation::{CoopError, DetectionHead, DetectionSet, ProposalSet};
use crate::geometry::{clip, iou, nms, BBox, ScoredBox};

use super::config::HeadConfig;
use super::rng::{self, TAG_HEAD};
use super::world::GtIndex;

/// Monotone score calibration on post-regression overlap: 0.05 for pure
/// background, 0.95 for a perfect box.
pub fn calibrated_score(overlap: f64) -> f64 {
    0.05 + 0.9 * overlap
}

/// Stand-in for a trained detection head, bound to one frame of one video.
///
/// Each proposal that overlaps some ground-truth box is pulled toward its
/// best-overlapping box by `regression_fraction`, jittered, classified as
/// that box's class, and scored by a noisy monotone function of the
/// post-regression overlap. Zero-overlap proposals stay put and score as
/// background. Per-class NMS at the standard threshold is applied to the
/// result.
pub struct SimulatedHead<'a> {
    pub gt: &'a GtIndex,
    pub cfg: &'a HeadConfig,
    pub nms_threshold: f64,
    pub frame_width: f64,
    pub frame_height: f64,
    pub seed: u64,
    pub video: usize,
    pub frame: usize,
}

impl SimulatedHead<'_> {
    fn gauss<R: Rng>(&self, rng: &mut R, sigma: f64) -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).unwrap().sample(rng)
        } else {
            0.0
        }
    }
}

impl DetectionHead<f64> for SimulatedHead<'_> {
    fn detect(&self, proposals: &ProposalSet<f64>) -> Result<DetectionSet<f64>, CoopError> {
        let mut rng = rng::derive(&[
            self.seed,
            TAG_HEAD,
            proposals.stream as u64,
            self.video as u64,
            self.frame as u64,
            proposals.stage as u64,
        ]);
        let gts = self.gt.at(self.video, self.frame);
        let mut dets = Vec::with_capacity(proposals.proposals.len());
        for p in &proposals.proposals {
            let best = gts
                .iter()
                .map(|(b, c)| (iou(p.bbox, *b), *b, *c))
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            let det = match best {
                Some((overlap, gt_box, class_id)) if overlap > 0.0 => {
                    let f = self.cfg.regression_fraction;
                    let lerp = |a: f64, b: f64| a + f * (b - a);
                    let bb = BBox::normalized(
                        lerp(p.bbox.x1, gt_box.x1) + self.gauss(&mut rng, self.cfg.jitter_sigma),
                        lerp(p.bbox.y1, gt_box.y1) + self.gauss(&mut rng, self.cfg.jitter_sigma),
                        lerp(p.bbox.x2, gt_box.x2) + self.gauss(&mut rng, self.cfg.jitter_sigma),
                        lerp(p.bbox.y2, gt_box.y2) + self.gauss(&mut rng, self.cfg.jitter_sigma),
                    );
                    let bb = clip(bb, self.frame_width, self.frame_height);
                    let score = (calibrated_score(iou(bb, gt_box))
                        + self.gauss(&mut rng, self.cfg.score_noise))
                    .clamp(0.0, 1.0);
                    ScoredBox::new(bb, class_id, score)
                }
                _ => {
                    let bb = clip(p.bbox, self.frame_width, self.frame_height);
                    let score = (calibrated_score(0.0)
                        + self.gauss(&mut rng, self.cfg.score_noise))
                    .clamp(0.0, 1.0);
                    ScoredBox::new(bb, p.class_id, score)
                }
            };
            dets.push(det);
        }
        Ok(DetectionSet {
            stream: proposals.stream,
            stage: proposals.stage,
            detections: nms(&dets, self.nms_threshold),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooperation::StreamId;

    fn head_cfg(fraction: f64) -> HeadConfig {
        HeadConfig {
            regression_fraction: fraction,
            jitter_sigma: 0.0,
            score_noise: 0.0,
        }
    }

    fn one_box_index() -> GtIndex {
        let mut gt = GtIndex::empty(1, 1);
        gt.insert(0, 0, BBox::new(10.0, 10.0, 30.0, 30.0), 1);
        gt
    }

    fn proposals(boxes: Vec<ScoredBox<f64>>) -> ProposalSet<f64> {
        ProposalSet {
            stream: StreamId::Rgb,
            stage: 0,
            proposals: boxes,
        }
    }

    #[test]
    fn full_regression_snaps_to_gt() {
        let gt = one_box_index();
        let cfg = head_cfg(1.0);
        let head = SimulatedHead {
            gt: &gt,
            cfg: &cfg,
            nms_threshold: 0.5,
            frame_width: 96.0,
            frame_height: 96.0,
            seed: 1,
            video: 0,
            frame: 0,
        };
        let p = proposals(vec![ScoredBox::new(
            BBox::new(12.0, 8.0, 33.0, 28.0),
            0,
            0.5,
        )]);
        let out = head.detect(&p).unwrap();
        assert_eq!(out.detections.len(), 1);
        assert_eq!(out.detections[0].bbox, BBox::new(10.0, 10.0, 30.0, 30.0));
        assert_eq!(out.detections[0].class_id, 1);
        assert_eq!(out.detections[0].score, calibrated_score(1.0));
    }

    #[test]
    fn zero_regression_keeps_proposals() {
        let gt = one_box_index();
        let cfg = head_cfg(0.0);
        let head = SimulatedHead {
            gt: &gt,
            cfg: &cfg,
            nms_threshold: 0.5,
            frame_width: 96.0,
            frame_height: 96.0,
            seed: 1,
            video: 0,
            frame: 0,
        };
        let bb = BBox::new(12.0, 8.0, 33.0, 28.0);
        let out = head
            .detect(&proposals(vec![ScoredBox::new(bb, 0, 0.5)]))
            .unwrap();
        assert_eq!(out.detections[0].bbox, bb);
    }

    #[test]
    fn background_scores_below_half() {
        let gt = one_box_index();
        let cfg = HeadConfig::default();
        let head = SimulatedHead {
            gt: &gt,
            cfg: &cfg,
            nms_threshold: 0.5,
            frame_width: 96.0,
            frame_height: 96.0,
            seed: 1,
            video: 0,
            frame: 0,
        };
        let background: Vec<ScoredBox<f64>> = (0..20)
            .map(|i| {
                ScoredBox::new(
                    BBox::new(60.0 + (i % 3) as f64, 60.0, 80.0 + (i % 3) as f64, 80.0),
                    0,
                    0.5,
                )
            })
            .collect();
        let out = head.detect(&proposals(background)).unwrap();
        assert!(!out.detections.is_empty());
        for d in &out.detections {
            assert!(d.score < 0.5, "background score {} not < 0.5", d.score);
        }
    }
}
