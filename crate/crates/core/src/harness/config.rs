use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooperation::{CooperationParams, CrossFilterOrder};
use crate::refine::RefineParams;
use crate::tubes::LinkParams;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    Invalid(String),
}

/// Per-stream proposal noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamNoise {
    /// Probability that a ground-truth tube is missed entirely by this stream.
    pub miss_prob: f64,
    /// Per-coordinate Gaussian noise on proposal boxes, in pixels.
    pub jitter_sigma: f64,
    /// Expected spurious boxes per frame (Poisson).
    pub fp_rate: f64,
    /// False boundary frames appended on each side of a tube's extent.
    pub boundary_pad: usize,
}

impl Default for StreamNoise {
    fn default() -> Self {
        Self {
            miss_prob: 0.0,
            jitter_sigma: 0.0,
            fp_rate: 0.0,
            boundary_pad: 0,
        }
    }
}

/// Simulated detection head behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadConfig {
    /// Fraction by which a proposal is pulled toward its best-overlapping
    /// ground-truth box.
    pub regression_fraction: f64,
    /// Per-coordinate Gaussian noise added after regression, in pixels.
    pub jitter_sigma: f64,
    /// Gaussian noise on the calibrated score.
    pub score_noise: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            regression_fraction: 0.5,
            jitter_sigma: 0.3,
            score_noise: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoopConfig {
    pub nms_standard: f64,
    pub nms_cross: f64,
    pub confidence_min: f64,
    pub num_stages: usize,
    /// Filter the cross-stream term by confidence before its NMS pass (the
    /// default) or after it.
    pub filter_before_cross_nms: bool,
}

impl Default for CoopConfig {
    fn default() -> Self {
        Self {
            nms_standard: 0.5,
            nms_cross: 0.3,
            confidence_min: 0.05,
            num_stages: 4,
            filter_before_cross_nms: true,
        }
    }
}

impl CoopConfig {
    pub fn params(&self) -> CooperationParams<f64> {
        CooperationParams {
            nms_standard: self.nms_standard,
            nms_cross: self.nms_cross,
            confidence_min: self.confidence_min,
            num_stages: self.num_stages,
            cross_order: if self.filter_before_cross_nms {
                CrossFilterOrder::FilterThenNms
            } else {
                CrossFilterOrder::NmsThenFilter
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub lambda: f64,
    pub iou_min: f64,
    pub max_gap: usize,
    pub min_len: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        let p = LinkParams::<f64>::default();
        Self {
            lambda: p.lambda,
            iou_min: p.iou_min,
            max_gap: p.max_gap,
            min_len: p.min_len,
        }
    }
}

impl LinkConfig {
    pub fn params(&self) -> LinkParams<f64> {
        LinkParams {
            lambda: self.lambda,
            iou_min: self.iou_min,
            max_gap: self.max_gap,
            min_len: self.min_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub window: usize,
    pub tau: f64,
    pub min_seg_len: usize,
    /// Actionness training epochs (full-batch).
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            window: 7,
            tau: 0.5,
            min_seg_len: 2,
            epochs: 300,
            learning_rate: 0.5,
        }
    }
}

impl RefineConfig {
    pub fn params(&self) -> RefineParams<f64> {
        RefineParams {
            window: self.window,
            tau: self.tau,
            min_seg_len: self.min_seg_len,
        }
    }
}

/// Synthetic per-box feature generation: class-indicator feature maps pooled
/// through the fusion module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Feature-map resolution as a fraction of frame pixels.
    pub map_scale: f64,
    /// Spatial size of pooled ROI features.
    pub roi_size: usize,
    /// Gaussian noise added to every map value.
    pub noise_sigma: f64,
    /// Channel reduction of the message modules (must divide `num_classes`).
    pub reduction: usize,
    /// Share one ROI message module across stages instead of one per stage.
    pub share_roi_params: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            map_scale: 0.25,
            roi_size: crate::fusion::DEFAULT_ROI_SIZE,
            noise_sigma: 0.05,
            reduction: 1,
            share_roi_params: true,
        }
    }
}

/// Full description of a synthetic two-stream experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_videos: usize,
    pub frames_per_video: usize,
    pub num_classes: usize,
    pub tubes_per_video: usize,
    pub frame_width: f64,
    pub frame_height: f64,
    pub box_size_min: f64,
    pub box_size_max: f64,
    pub tube_len_min: usize,
    pub tube_len_max: usize,
    /// Maximum per-frame drift of a track center, in pixels per axis.
    pub speed_max: f64,
    /// Fraction of the two streams' missed-tube sets that coincides:
    /// 0 makes the misses disjoint, 1 makes them identical.
    pub complementarity: f64,
    pub seed: u64,
    /// Number of seeds (`seed`, `seed+1`, ...) an experiment averages over.
    pub num_seeds: usize,
    /// Leading fraction of videos used to train the actionness classifiers;
    /// the rest are evaluation videos.
    pub train_fraction: f64,
    pub rgb: StreamNoise,
    pub flow: StreamNoise,
    pub head: HeadConfig,
    pub cooperation: CoopConfig,
    pub link: LinkConfig,
    pub refine: RefineConfig,
    pub features: FeatureConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_videos: 8,
            frames_per_video: 16,
            num_classes: 3,
            tubes_per_video: 2,
            frame_width: 96.0,
            frame_height: 96.0,
            box_size_min: 10.0,
            box_size_max: 22.0,
            tube_len_min: 8,
            tube_len_max: 12,
            speed_max: 1.5,
            complementarity: 0.0,
            seed: 7,
            num_seeds: 1,
            train_fraction: 0.5,
            rgb: StreamNoise::default(),
            flow: StreamNoise::default(),
            head: HeadConfig::default(),
            cooperation: CoopConfig::default(),
            link: LinkConfig::default(),
            refine: RefineConfig::default(),
            features: FeatureConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Invalid(msg));
        let prob = |name: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) {
                Err(ScenarioError::Invalid(format!(
                    "{name} must be in [0, 1], got {v}"
                )))
            } else {
                Ok(())
            }
        };
        if self.num_videos == 0 || self.frames_per_video == 0 || self.num_classes == 0 {
            return fail("num_videos, frames_per_video and num_classes must be positive".into());
        }
        if self.frame_width <= 0.0 || self.frame_height <= 0.0 {
            return fail("frame dimensions must be positive".into());
        }
        if self.box_size_min <= 0.0 || self.box_size_max < self.box_size_min {
            return fail("box size range must be positive and ordered".into());
        }
        if self.box_size_max > self.frame_width.min(self.frame_height) {
            return fail(format!(
                "tubes larger than the frame: box_size_max {} exceeds frame {}x{}",
                self.box_size_max, self.frame_width, self.frame_height
            ));
        }
        if self.tube_len_min == 0
            || self.tube_len_max < self.tube_len_min
            || self.tube_len_max > self.frames_per_video
        {
            return fail("tube length range must be ordered and fit the video".into());
        }
        prob("miss_prob (rgb)", self.rgb.miss_prob)?;
        prob("miss_prob (flow)", self.flow.miss_prob)?;
        prob("complementarity", self.complementarity)?;
        prob("confidence_min", self.cooperation.confidence_min)?;
        prob("nms_standard", self.cooperation.nms_standard)?;
        prob("nms_cross", self.cooperation.nms_cross)?;
        prob("tau", self.refine.tau)?;
        prob("iou_min", self.link.iou_min)?;
        if self.cooperation.nms_cross > self.cooperation.nms_standard {
            return fail("nms_cross must not exceed nms_standard".into());
        }
        if self.rgb.fp_rate < 0.0 || self.flow.fp_rate < 0.0 {
            return fail("fp_rate must be non-negative".into());
        }
        if self.rgb.jitter_sigma < 0.0 || self.flow.jitter_sigma < 0.0 {
            return fail("jitter_sigma must be non-negative".into());
        }
        // the per-tube miss draw partitions [0, 1]
        let both = self.complementarity * self.rgb.miss_prob.min(self.flow.miss_prob);
        if self.rgb.miss_prob + self.flow.miss_prob - both > 1.0 {
            return fail(
                "rgb.miss_prob + flow.miss_prob - shared overlap must not exceed 1".into(),
            );
        }
        if !(0.0 < self.train_fraction && self.train_fraction < 1.0) {
            return fail("train_fraction must be in (0, 1)".into());
        }
        if self.num_seeds == 0 {
            return fail("num_seeds must be positive".into());
        }
        if self.refine.window % 2 == 0 {
            return fail("refine.window must be odd".into());
        }
        if self.features.roi_size == 0 {
            return fail("features.roi_size must be positive".into());
        }
        if !(0.0 < self.features.map_scale && self.features.map_scale <= 1.0) {
            return fail("features.map_scale must be in (0, 1]".into());
        }
        if self.features.reduction == 0 || self.num_classes % self.features.reduction != 0 {
            return fail(format!(
                "features.reduction {} must divide num_classes {}",
                self.features.reduction, self.num_classes
            ));
        }
        Ok(())
    }

    /// Index of the first evaluation video; everything before it trains the
    /// actionness classifiers.
    pub fn train_video_count(&self) -> usize {
        ((self.num_videos as f64 * self.train_fraction).round() as usize)
            .clamp(1, self.num_videos - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn oversized_boxes_are_rejected() {
        let cfg = ScenarioConfig {
            box_size_max: 200.0,
            ..ScenarioConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn disjoint_misses_must_fit() {
        let cfg = ScenarioConfig {
            rgb: StreamNoise {
                miss_prob: 0.6,
                ..StreamNoise::default()
            },
            flow: StreamNoise {
                miss_prob: 0.6,
                ..StreamNoise::default()
            },
            complementarity: 0.0,
            ..ScenarioConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn even_median_window_rejected() {
        let cfg = ScenarioConfig {
            refine: RefineConfig {
                window: 4,
                ..RefineConfig::default()
            },
            ..ScenarioConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
