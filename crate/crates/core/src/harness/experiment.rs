use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooperation::{
    combine_outputs, run_all_stages, CoopError, DetectionHead, ProposalSet, StageState, StreamId,
};
use crate::eval::{frame_map, video_map, DetBox, GroundTruthTube, GtBox, VideoTube};
use crate::fusion::{FusionError, MessageParams};
use crate::geometry::{BBox, ScoredBox};
use crate::refine::{
    build_training_set, refine_tube, train_actionness, ActionnessClassifier, ActionnessSample,
};
use crate::tubes::{link_tubes, ActionTube, FrameDetections, LinkParams};

use super::config::{ScenarioConfig, ScenarioError};
use super::head::SimulatedHead;
use super::world::{video_name, FeatureContext, GtIndex, ProposalIndex, SyntheticWorld};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Cooperation(#[from] CoopError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Message modules used by the harness: one image-level module (single
/// pyramid level) and either one shared ROI-level module or one per stage.
/// All start zero-initialized, so fusion begins as the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionBank {
    pub image: Vec<MessageParams<f64>>,
    pub roi: Vec<MessageParams<f64>>,
}

impl FusionBank {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        let zero = || MessageParams::zeros(cfg.num_classes, cfg.features.reduction);
        let image = vec![zero()?];
        let n = if cfg.features.share_roi_params {
            1
        } else {
            cfg.cooperation.num_stages + 1
        };
        let roi = (0..n).map(|_| zero()).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { image, roi })
    }

    pub fn roi_for_stage(&self, stage: usize) -> &MessageParams<f64> {
        if self.roi.len() == 1 {
            &self.roi[0]
        } else {
            &self.roi[stage.min(self.roi.len() - 1)]
        }
    }
}

/// Combined detections for every video, stage, and frame.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// `combined[video][stage][frame]`
    pub combined: Vec<Vec<Vec<Vec<ScoredBox<f64>>>>>,
}

impl PipelineOutput {
    pub fn num_stages(&self) -> usize {
        self.combined.first().map(|v| v.len() - 1).unwrap_or(0)
    }

    /// Final-stage detections of one video as per-frame sets.
    pub fn final_frames(&self, video: usize) -> Vec<FrameDetections<f64>> {
        let stages = &self.combined[video];
        stages[stages.len() - 1]
            .iter()
            .enumerate()
            .map(|(frame_idx, dets)| FrameDetections {
                frame_idx,
                dets: dets.clone(),
            })
            .collect()
    }
}

/// Runs the full stage machine on every frame of every video; videos are
/// processed in parallel and collected in order.
pub fn run_pipeline(
    cfg: &ScenarioConfig,
    seed: u64,
    gt: &GtIndex,
    props: &ProposalIndex,
) -> Result<PipelineOutput, HarnessError> {
    let params = cfg.cooperation.params();
    let combined = (0..cfg.num_videos)
        .into_par_iter()
        .map(|video| {
            let mut per_stage: Vec<Vec<Vec<ScoredBox<f64>>>> =
                vec![Vec::with_capacity(cfg.frames_per_video); params.num_stages + 1];
            for frame in 0..cfg.frames_per_video {
                let head = SimulatedHead {
                    gt,
                    cfg: &cfg.head,
                    nms_threshold: params.nms_standard,
                    frame_width: cfg.frame_width,
                    frame_height: cfg.frame_height,
                    seed,
                    video,
                    frame,
                };
                let detect0 = |stream: StreamId| {
                    head.detect(&ProposalSet {
                        stream,
                        stage: 0,
                        proposals: props.at(stream, video, frame).to_vec(),
                    })
                };
                let state = StageState::initial(detect0(StreamId::Rgb)?, detect0(StreamId::Flow)?)?;
                let state = run_all_stages(state, &head, &params)?;
                for (t, rows) in per_stage.iter_mut().enumerate() {
                    rows.push(combine_outputs(&state, t, &params)?);
                }
            }
            Ok::<_, HarnessError>(per_stage)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PipelineOutput { combined })
}

/// Frame-level mAP of the combined output at every stage, over the given
/// videos.
pub fn stage_frame_map(
    output: &PipelineOutput,
    gt: &GtIndex,
    videos: &[usize],
    delta: f64,
) -> Vec<f64> {
    let frames = gt.frames_per_video();
    let gts: Vec<GtBox<f64>> = videos
        .iter()
        .flat_map(|&v| {
            (0..frames).flat_map(move |f| {
                gt.at(v, f).iter().map(move |&(bbox, class_id)| GtBox {
                    video: video_name(v),
                    frame: f,
                    class_id,
                    bbox,
                })
            })
        })
        .collect();
    (0..=output.num_stages())
        .map(|t| {
            let dets: Vec<DetBox<f64>> = videos
                .iter()
                .flat_map(|&v| {
                    output.combined[v][t]
                        .iter()
                        .enumerate()
                        .flat_map(move |(f, boxes)| {
                            boxes.iter().map(move |&det| DetBox {
                                video: video_name(v),
                                frame: f,
                                det,
                            })
                        })
                })
                .collect();
            frame_map(&dets, &gts, delta).map
        })
        .collect()
}

/// Links one video's per-frame detections for every class.
pub fn link_all_tubes(
    frames: &[FrameDetections<f64>],
    num_classes: usize,
    p: &LinkParams<f64>,
) -> Vec<ActionTube<f64>> {
    (0..num_classes)
        .flat_map(|c| link_tubes(frames, c, p))
        .collect()
}

/// Per-element fused descriptors for every tube of one video, computed one
/// frame at a time so each frame's feature maps are built once.
pub fn tube_features(
    ctx: &FeatureContext<'_>,
    gt: &GtIndex,
    video: usize,
    tubes: &[ActionTube<f64>],
    bank: &FusionBank,
    final_stage: usize,
) -> Vec<Vec<Vec<f64>>> {
    let mut feats: Vec<Vec<Vec<f64>>> = tubes
        .iter()
        .map(|t| vec![Vec::new(); t.elements.len()])
        .collect();
    let mut by_frame: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (ti, tube) in tubes.iter().enumerate() {
        for (ei, el) in tube.elements.iter().enumerate() {
            by_frame.entry(el.frame_idx).or_default().push((ti, ei));
        }
    }
    for (frame, ids) in by_frame {
        let boxes: Vec<BBox<f64>> = ids
            .iter()
            .map(|&(ti, ei)| tubes[ti].elements[ei].bbox)
            .collect();
        let vecs = ctx.box_features(
            gt,
            video,
            frame,
            &boxes,
            &bank.image,
            bank.roi_for_stage(final_stage),
        );
        for (&(ti, ei), v) in ids.iter().zip(vecs) {
            feats[ti][ei] = v;
        }
    }
    feats
}

fn gt_frames_of(gt: &GtIndex, video: usize) -> BTreeMap<usize, Vec<(BBox<f64>, usize)>> {
    (0..gt.frames_per_video())
        .filter_map(|f| {
            let boxes = gt.at(video, f);
            if boxes.is_empty() {
                None
            } else {
                Some((f, boxes.to_vec()))
            }
        })
        .collect()
}

/// Aggregates actionness training samples per class over the given videos.
pub fn collect_actionness_samples(
    gt: &GtIndex,
    num_classes: usize,
    videos: &[usize],
    tubes_per_video: &[Vec<ActionTube<f64>>],
    feats_per_video: &[Vec<Vec<Vec<f64>>>],
) -> Vec<Vec<ActionnessSample<f64>>> {
    let mut samples_by_class = vec![Vec::new(); num_classes];
    for &v in videos {
        let frames = gt_frames_of(gt, v);
        for (c, samples) in samples_by_class.iter_mut().enumerate() {
            samples.extend(build_training_set(
                c,
                &tubes_per_video[v],
                &feats_per_video[v],
                &frames,
            ));
        }
    }
    samples_by_class
}

/// Metrics of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Frame mAP at delta 0.5 of the combined output per stage, on the
    /// evaluation videos.
    pub stage_frame_map: Vec<f64>,
    /// Video mAP at delta 0.5 before temporal refinement.
    pub video_map_before: f64,
    /// Video mAP at delta 0.5 after temporal refinement.
    pub video_map_after: f64,
}

/// Seed-averaged experiment metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedOutcome>,
    pub stage_frame_map_mean: Vec<f64>,
    pub video_map_before_mean: f64,
    pub video_map_after_mean: f64,
}

/// Runs one seed end to end: generate the world, run the stage pipeline,
/// evaluate per-stage frame mAP, link tubes, train actionness classifiers on
/// the training videos, refine the evaluation tubes, and report video mAP
/// before and after refinement.
pub fn run_seed(cfg: &ScenarioConfig, seed: u64) -> Result<SeedOutcome, HarnessError> {
    let world = SyntheticWorld::generate(cfg, seed)?;
    let gt = world.gt_index();
    let props = world.proposal_index();
    let output = run_pipeline(cfg, seed, &gt, &props)?;

    let n_train = cfg.train_video_count();
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..cfg.num_videos).collect();

    let stage_map = stage_frame_map(&output, &gt, &test, 0.5);

    let link = cfg.link.params();
    let tubes_per_video: Vec<Vec<ActionTube<f64>>> = (0..cfg.num_videos)
        .map(|v| link_all_tubes(&output.final_frames(v), cfg.num_classes, &link))
        .collect();

    let ctx = FeatureContext::new(cfg, seed, &gt);
    let bank = FusionBank::new(cfg)?;
    let final_stage = cfg.cooperation.num_stages;
    let feats_per_video: Vec<Vec<Vec<Vec<f64>>>> = (0..cfg.num_videos)
        .map(|v| tube_features(&ctx, &gt, v, &tubes_per_video[v], &bank, final_stage))
        .collect();

    let samples = collect_actionness_samples(
        &gt,
        cfg.num_classes,
        &train,
        &tubes_per_video,
        &feats_per_video,
    );
    let clf: ActionnessClassifier<f64> =
        train_actionness(&samples, cfg.refine.epochs, cfg.refine.learning_rate, seed);

    let gt_tubes: Vec<GroundTruthTube<f64>> = world
        .gt_tubes()
        .into_iter()
        .filter(|t| {
            super::world::video_index_of(&t.video)
                .map(|v| v >= n_train)
                .unwrap_or(false)
        })
        .collect();

    let detected: Vec<VideoTube<f64>> = test
        .iter()
        .flat_map(|&v| {
            tubes_per_video[v].iter().map(move |t| VideoTube {
                video: video_name(v),
                tube: t.clone(),
            })
        })
        .collect();
    let before = video_map(&detected, &gt_tubes, 0.5).map;

    let refine_params = cfg.refine.params();
    let refined: Vec<VideoTube<f64>> = test
        .iter()
        .flat_map(|&v| {
            tubes_per_video[v]
                .iter()
                .zip(&feats_per_video[v])
                .flat_map(|(tube, feats)| refine_tube(tube, &clf, feats, &refine_params))
                .map(move |tube| VideoTube {
                    video: video_name(v),
                    tube,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let after = video_map(&refined, &gt_tubes, 0.5).map;

    Ok(SeedOutcome {
        seed,
        stage_frame_map: stage_map,
        video_map_before: before,
        video_map_after: after,
    })
}

/// Runs `cfg.num_seeds` seeds (in parallel, reduced in seed order) and
/// averages the metrics. `threads` pins the worker count; `None` uses the
/// global pool.
pub fn run_experiment(
    cfg: &ScenarioConfig,
    threads: Option<usize>,
) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.num_seeds).map(|i| cfg.seed + i as u64).collect();
    let work = || {
        seeds
            .par_iter()
            .map(|&s| run_seed(cfg, s))
            .collect::<Result<Vec<_>, _>>()
    };
    let per_seed = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?
            .install(work),
        None => work(),
    }?;

    let stages = per_seed[0].stage_frame_map.len();
    let n = per_seed.len() as f64;
    let stage_frame_map_mean = (0..stages)
        .map(|t| per_seed.iter().map(|o| o.stage_frame_map[t]).sum::<f64>() / n)
        .collect();
    let video_map_before_mean = per_seed.iter().map(|o| o.video_map_before).sum::<f64>() / n;
    let video_map_after_mean = per_seed.iter().map(|o| o.video_map_after).sum::<f64>() / n;

    Ok(ExperimentResult {
        seeds,
        per_seed,
        stage_frame_map_mean,
        video_map_before_mean,
        video_map_after_mean,
    })
}
