use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::cooperation::StreamId;
use crate::eval::GroundTruthTube;
use crate::fusion::{
    fuse_roi, image_level_pass, roi_pool, FeatureMap, MessageParams, RoiFeature,
};
use crate::geometry::{clip, iou, BBox, ScoredBox};

use super::config::{ScenarioConfig, ScenarioError, StreamNoise};
use super::head::calibrated_score;
use super::rng::{self, TAG_MAP, TAG_PROPOSALS, TAG_WORLD};

/// One ground-truth track: a class, a start frame, and one box per covered
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GtTrack {
    pub class_id: usize,
    pub start_frame: usize,
    pub boxes: Vec<BBox<f64>>,
}

impl GtTrack {
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.boxes.len() - 1
    }

    pub fn box_at(&self, frame: usize) -> Option<BBox<f64>> {
        if frame < self.start_frame {
            return None;
        }
        self.boxes.get(frame - self.start_frame).copied()
    }
}

#[derive(Debug, Clone)]
pub struct VideoWorld {
    pub tracks: Vec<GtTrack>,
    /// Per track: whether each stream misses it entirely.
    pub missed_by_rgb: Vec<bool>,
    pub missed_by_flow: Vec<bool>,
}

/// Ground-truth boxes indexed by `[video][frame]`.
#[derive(Debug, Clone)]
pub struct GtIndex {
    boxes: Vec<Vec<Vec<(BBox<f64>, usize)>>>,
}

impl GtIndex {
    pub fn empty(num_videos: usize, frames_per_video: usize) -> Self {
        Self {
            boxes: vec![vec![Vec::new(); frames_per_video]; num_videos],
        }
    }

    pub fn insert(&mut self, video: usize, frame: usize, bbox: BBox<f64>, class_id: usize) {
        self.boxes[video][frame].push((bbox, class_id));
    }

    pub fn at(&self, video: usize, frame: usize) -> &[(BBox<f64>, usize)] {
        &self.boxes[video][frame]
    }

    pub fn num_videos(&self) -> usize {
        self.boxes.len()
    }

    pub fn frames_per_video(&self) -> usize {
        self.boxes.first().map(|v| v.len()).unwrap_or(0)
    }

    /// Rebuilds the index from evaluation-format tubes (the on-disk
    /// ground-truth representation).
    pub fn from_tubes(
        tubes: &[GroundTruthTube<f64>],
        num_videos: usize,
        frames_per_video: usize,
        video_index: impl Fn(&str) -> Option<usize>,
    ) -> Result<Self, ScenarioError> {
        let mut index = Self::empty(num_videos, frames_per_video);
        for tube in tubes {
            let v = video_index(&tube.video).ok_or_else(|| {
                ScenarioError::Invalid(format!("unknown video id {}", tube.video))
            })?;
            for &(frame, bbox) in &tube.elements {
                if frame >= frames_per_video {
                    return Err(ScenarioError::Invalid(format!(
                        "frame {frame} outside video of {frames_per_video} frames"
                    )));
                }
                index.insert(v, frame, bbox, tube.class_id);
            }
        }
        Ok(index)
    }
}

/// Base proposals indexed by `[video][frame]`, one set per stream.
#[derive(Debug, Clone)]
pub struct ProposalIndex {
    pub rgb: Vec<Vec<Vec<ScoredBox<f64>>>>,
    pub flow: Vec<Vec<Vec<ScoredBox<f64>>>>,
}

impl ProposalIndex {
    pub fn at(&self, stream: StreamId, video: usize, frame: usize) -> &[ScoredBox<f64>] {
        match stream {
            StreamId::Rgb => &self.rgb[video][frame],
            StreamId::Flow => &self.flow[video][frame],
        }
    }
}

/// Deterministic synthetic world: ground-truth tracks plus per-stream noisy
/// proposals derived from them.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub cfg: ScenarioConfig,
    pub seed: u64,
    pub videos: Vec<VideoWorld>,
}

pub fn video_name(index: usize) -> String {
    format!("v{index:03}")
}

pub fn video_index_of(name: &str) -> Option<usize> {
    name.strip_prefix('v').and_then(|s| s.parse().ok())
}

fn gauss<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).unwrap().sample(rng)
    } else {
        0.0
    }
}

impl SyntheticWorld {
    pub fn generate(cfg: &ScenarioConfig, seed: u64) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let videos = (0..cfg.num_videos)
            .map(|v| Self::generate_video(cfg, seed, v))
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            seed,
            videos,
        })
    }

    fn generate_video(cfg: &ScenarioConfig, seed: u64, video: usize) -> VideoWorld {
        let mut rng = rng::derive(&[seed, TAG_WORLD, video as u64]);
        let mut tracks = Vec::with_capacity(cfg.tubes_per_video);
        for _ in 0..cfg.tubes_per_video {
            let class_id = rng.random_range(0..cfg.num_classes);
            let len = rng.random_range(cfg.tube_len_min..=cfg.tube_len_max);
            let start_frame = rng.random_range(0..=cfg.frames_per_video - len);
            let w = rng.random_range(cfg.box_size_min..=cfg.box_size_max);
            let h = rng.random_range(cfg.box_size_min..=cfg.box_size_max);
            let mut cx = rng.random_range(w / 2.0..=cfg.frame_width - w / 2.0);
            let mut cy = rng.random_range(h / 2.0..=cfg.frame_height - h / 2.0);
            let vx = rng.random_range(-cfg.speed_max..=cfg.speed_max);
            let vy = rng.random_range(-cfg.speed_max..=cfg.speed_max);
            let mut boxes = Vec::with_capacity(len);
            for _ in 0..len {
                boxes.push(BBox::new(
                    cx - w / 2.0,
                    cy - h / 2.0,
                    cx + w / 2.0,
                    cy + h / 2.0,
                ));
                cx = (cx + vx).clamp(w / 2.0, cfg.frame_width - w / 2.0);
                cy = (cy + vy).clamp(h / 2.0, cfg.frame_height - h / 2.0);
            }
            tracks.push(GtTrack {
                class_id,
                start_frame,
                boxes,
            });
        }

        // complementarity controls how much of the two miss sets coincides
        let p_rgb = cfg.rgb.miss_prob;
        let p_flow = cfg.flow.miss_prob;
        let p_both = cfg.complementarity * p_rgb.min(p_flow);
        let mut missed_by_rgb = Vec::with_capacity(tracks.len());
        let mut missed_by_flow = Vec::with_capacity(tracks.len());
        for _ in 0..tracks.len() {
            let u: f64 = rng.random_range(0.0..1.0);
            let rgb_miss = u < p_rgb;
            let flow_miss = u < p_both || (p_rgb..p_rgb + p_flow - p_both).contains(&u);
            missed_by_rgb.push(rgb_miss);
            missed_by_flow.push(flow_miss);
        }

        VideoWorld {
            tracks,
            missed_by_rgb,
            missed_by_flow,
        }
    }

    pub fn gt_index(&self) -> GtIndex {
        let mut index = GtIndex::empty(self.cfg.num_videos, self.cfg.frames_per_video);
        for (v, video) in self.videos.iter().enumerate() {
            for track in &video.tracks {
                for (k, bbox) in track.boxes.iter().enumerate() {
                    index.insert(v, track.start_frame + k, *bbox, track.class_id);
                }
            }
        }
        index
    }

    pub fn gt_tubes(&self) -> Vec<GroundTruthTube<f64>> {
        let mut tubes = Vec::new();
        for (v, video) in self.videos.iter().enumerate() {
            for track in &video.tracks {
                tubes.push(GroundTruthTube {
                    video: video_name(v),
                    class_id: track.class_id,
                    elements: track
                        .boxes
                        .iter()
                        .enumerate()
                        .map(|(k, b)| (track.start_frame + k, *b))
                        .collect(),
                });
            }
        }
        tubes
    }

    /// Per-stream noisy base proposals for every frame.
    pub fn proposal_index(&self) -> ProposalIndex {
        ProposalIndex {
            rgb: self.stream_proposals(StreamId::Rgb),
            flow: self.stream_proposals(StreamId::Flow),
        }
    }

    fn stream_proposals(&self, stream: StreamId) -> Vec<Vec<Vec<ScoredBox<f64>>>> {
        let cfg = &self.cfg;
        let noise = match stream {
            StreamId::Rgb => &cfg.rgb,
            StreamId::Flow => &cfg.flow,
        };
        (0..cfg.num_videos)
            .map(|v| self.video_proposals(stream, noise, v))
            .collect()
    }

    fn video_proposals(
        &self,
        stream: StreamId,
        noise: &StreamNoise,
        video: usize,
    ) -> Vec<Vec<ScoredBox<f64>>> {
        let cfg = &self.cfg;
        let mut rng = rng::derive(&[self.seed, TAG_PROPOSALS, stream as u64, video as u64]);
        let world = &self.videos[video];
        let mut frames: Vec<Vec<ScoredBox<f64>>> = vec![Vec::new(); cfg.frames_per_video];

        let jittered = |b: BBox<f64>, rng: &mut rand_chacha::ChaCha8Rng| {
            let bb = BBox::normalized(
                b.x1 + gauss(rng, noise.jitter_sigma),
                b.y1 + gauss(rng, noise.jitter_sigma),
                b.x2 + gauss(rng, noise.jitter_sigma),
                b.y2 + gauss(rng, noise.jitter_sigma),
            );
            clip(bb, cfg.frame_width, cfg.frame_height)
        };

        for (ti, track) in world.tracks.iter().enumerate() {
            let missed = match stream {
                StreamId::Rgb => world.missed_by_rgb[ti],
                StreamId::Flow => world.missed_by_flow[ti],
            };
            if missed {
                continue;
            }
            for (k, gt_box) in track.boxes.iter().enumerate() {
                let frame = track.start_frame + k;
                let bb = jittered(*gt_box, &mut rng);
                let score = (calibrated_score(iou(bb, *gt_box))
                    + gauss(&mut rng, cfg.head.score_noise))
                .clamp(0.0, 1.0);
                frames[frame].push(ScoredBox::new(bb, track.class_id, score));
            }
            // false boundary frames around the temporal extent
            for k in 1..=noise.boundary_pad {
                if track.start_frame >= k {
                    let bb = jittered(track.boxes[0], &mut rng);
                    let score = (calibrated_score(0.0) + gauss(&mut rng, cfg.head.score_noise))
                        .clamp(0.0, 1.0);
                    frames[track.start_frame - k].push(ScoredBox::new(bb, track.class_id, score));
                }
                let after = track.end_frame() + k;
                if after < cfg.frames_per_video {
                    let bb = jittered(*track.boxes.last().unwrap(), &mut rng);
                    let score = (calibrated_score(0.0) + gauss(&mut rng, cfg.head.score_noise))
                        .clamp(0.0, 1.0);
                    frames[after].push(ScoredBox::new(bb, track.class_id, score));
                }
            }
        }

        if noise.fp_rate > 0.0 {
            let poisson = Poisson::new(noise.fp_rate).unwrap();
            for frame_dets in frames.iter_mut() {
                let count = poisson.sample(&mut rng) as usize;
                for _ in 0..count {
                    let w = rng.random_range(cfg.box_size_min..=cfg.box_size_max);
                    let h = rng.random_range(cfg.box_size_min..=cfg.box_size_max);
                    let x1 = rng.random_range(0.0..=cfg.frame_width - w);
                    let y1 = rng.random_range(0.0..=cfg.frame_height - h);
                    let class_id = rng.random_range(0..cfg.num_classes);
                    let score = (calibrated_score(0.0) + gauss(&mut rng, cfg.head.score_noise))
                        .clamp(0.0, 1.0);
                    frame_dets.push(ScoredBox::new(
                        BBox::new(x1, y1, x1 + w, y1 + h),
                        class_id,
                        score,
                    ));
                }
            }
        }
        frames
    }

    pub fn feature_context(&self) -> FeatureContext<'_> {
        FeatureContext {
            cfg: &self.cfg,
            seed: self.seed,
            gt: None,
        }
    }
}

/// Generates the synthetic per-frame feature maps: one channel per class
/// carrying a noisy indicator of that class's ground-truth boxes. Boxes are
/// described by pooling these maps through the fusion module.
pub struct FeatureContext<'a> {
    cfg: &'a ScenarioConfig,
    seed: u64,
    /// Ground truth loaded from files; `None` means the owning world's index
    /// must be passed to the map builder.
    gt: Option<&'a GtIndex>,
}

impl<'a> FeatureContext<'a> {
    pub fn new(cfg: &'a ScenarioConfig, seed: u64, gt: &'a GtIndex) -> Self {
        Self {
            cfg,
            seed,
            gt: Some(gt),
        }
    }

    pub fn map_dims(&self) -> (usize, usize) {
        let mw = (self.cfg.frame_width * self.cfg.features.map_scale).ceil() as usize;
        let mh = (self.cfg.frame_height * self.cfg.features.map_scale).ceil() as usize;
        (mh.max(1), mw.max(1))
    }

    pub fn feature_dim(&self) -> usize {
        let s = self.cfg.features.roi_size;
        self.cfg.num_classes * s * s
    }

    pub fn feature_map(&self, gt: &GtIndex, stream: StreamId, video: usize, frame: usize) -> FeatureMap<f64> {
        let (mh, mw) = self.map_dims();
        let scale = self.cfg.features.map_scale;
        let sigma = self.cfg.features.noise_sigma;
        let boxes = gt.at(video, frame);
        let mut rng = rng::derive(&[self.seed, TAG_MAP, stream as u64, video as u64, frame as u64]);
        FeatureMap::from_fn(self.cfg.num_classes, mh, mw, |c, i, j| {
            let px = (j as f64 + 0.5) / scale;
            let py = (i as f64 + 0.5) / scale;
            let inside = boxes.iter().any(|(b, cls)| {
                *cls == c && b.x1 <= px && px <= b.x2 && b.y1 <= py && py <= b.y2
            });
            let base = if inside { 1.0 } else { 0.0 };
            base + gauss(&mut rng, sigma)
        })
    }

    /// Fused per-box descriptors for all boxes of one frame. The flow map is
    /// message-passed into the rgb map once at the image level; each box is
    /// then ROI-pooled from both maps and the flow ROI feature is fused into
    /// the rgb one.
    pub fn box_features(
        &self,
        gt: &GtIndex,
        video: usize,
        frame: usize,
        boxes: &[BBox<f64>],
        image_params: &[MessageParams<f64>],
        roi_params: &MessageParams<f64>,
    ) -> Vec<Vec<f64>> {
        if boxes.is_empty() {
            return Vec::new();
        }
        let scale = self.cfg.features.map_scale;
        let size = self.cfg.features.roi_size;
        let mut rgb = vec![self.feature_map(gt, StreamId::Rgb, video, frame)];
        let flow = vec![self.feature_map(gt, StreamId::Flow, video, frame)];
        image_level_pass(&mut rgb, &flow, image_params).expect("level counts match by construction");
        boxes
            .iter()
            .map(|b| {
                let scaled = BBox::new(b.x1 * scale, b.y1 * scale, b.x2 * scale, b.y2 * scale);
                let roi_rgb = roi_pool(&rgb[0], scaled, size);
                let roi_flow = roi_pool(&flow[0], scaled, size);
                let fused: RoiFeature<f64> = fuse_roi(&roi_rgb, &roi_flow, roi_params)
                    .expect("roi shapes match by construction");
                fused.map().values().to_vec()
            })
            .collect()
    }

    pub fn gt(&self) -> Option<&GtIndex> {
        self.gt
    }
}
