//! The cross-stream cooperation stage machine: alternates between the two
//! streams, feeds each stream's detection head with proposals assembled from
//! its own earlier detections plus the other stream's latest ones, and
//! combines stage outputs with per-class NMS.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{iou, nms, BBox, ScoredBox};
use crate::num::Real;

/// One of the two input modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StreamId {
    Rgb,
    Flow,
}

impl StreamId {
    pub fn other(self) -> Self {
        match self {
            StreamId::Rgb => StreamId::Flow,
            StreamId::Flow => StreamId::Rgb,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StreamId::Rgb => "rgb",
            StreamId::Flow => "flow",
        }
    }
}

/// Stream refined at stage `t >= 1`: rgb at odd stages, flow at even stages.
pub fn scheduled_stream(stage: usize) -> StreamId {
    debug_assert!(stage >= 1);
    if stage % 2 == 1 {
        StreamId::Rgb
    } else {
        StreamId::Flow
    }
}

/// Region proposals feeding one stream's detection head at one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet<T> {
    pub stream: StreamId,
    pub stage: usize,
    pub proposals: Vec<ScoredBox<T>>,
}

/// Output of a detection head: scored, class-labelled boxes with per-class
/// NMS already applied at the head's standard threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet<T> {
    pub stream: StreamId,
    pub stage: usize,
    pub detections: Vec<ScoredBox<T>>,
}

/// Whether the cross-stream term is confidence-filtered before or after its
/// extra NMS pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossFilterOrder {
    FilterThenNms,
    NmsThenFilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooperationParams<T> {
    /// NMS threshold used by heads and when combining stage outputs.
    pub nms_standard: T,
    /// Lower NMS threshold applied to the cross-stream proposal term.
    pub nms_cross: T,
    /// Cross-stream detections below this score are not used as proposals.
    pub confidence_min: T,
    pub num_stages: usize,
    pub cross_order: CrossFilterOrder,
}

impl<T: Real> Default for CooperationParams<T> {
    fn default() -> Self {
        Self {
            nms_standard: T::of(0.5),
            nms_cross: T::of(0.3),
            confidence_min: T::of(0.05),
            num_stages: 4,
            cross_order: CrossFilterOrder::FilterThenNms,
        }
    }
}

#[derive(Debug, Error)]
pub enum CoopError {
    #[error("missing detection history for {stream:?} at stage {stage}")]
    MissingHistory { stream: StreamId, stage: usize },
    #[error("invalid stage state: {0}")]
    InvalidState(String),
    #[error("detection head failed: {0}")]
    Head(#[source] Box<dyn std::error::Error + Send + Sync>),
}

/// The mapping from a proposal set to a detection set. Implementations must
/// be deterministic given their seed and must clip output boxes.
pub trait DetectionHead<T: Real> {
    fn detect(&self, proposals: &ProposalSet<T>) -> Result<DetectionSet<T>, CoopError>;
}

/// Returns the proposals unchanged as detections.
pub struct IdentityHead;

impl<T: Real> DetectionHead<T> for IdentityHead {
    fn detect(&self, proposals: &ProposalSet<T>) -> Result<DetectionSet<T>, CoopError> {
        Ok(DetectionSet {
            stream: proposals.stream,
            stage: proposals.stage,
            detections: proposals.proposals.clone(),
        })
    }
}

/// Detection history across stages. Stage 0 holds both streams; each later
/// stage holds the stream scheduled at it. A value type: `run_stage` consumes
/// a state and returns the advanced one.
#[derive(Debug, Clone, PartialEq)]
pub struct StageState<T> {
    history: BTreeMap<(StreamId, usize), DetectionSet<T>>,
    current: usize,
}

impl<T: Real> StageState<T> {
    pub fn initial(rgb: DetectionSet<T>, flow: DetectionSet<T>) -> Result<Self, CoopError> {
        if rgb.stream != StreamId::Rgb || flow.stream != StreamId::Flow {
            return Err(CoopError::InvalidState(
                "initial sets must be tagged rgb and flow".into(),
            ));
        }
        if rgb.stage != 0 || flow.stage != 0 {
            return Err(CoopError::InvalidState(
                "initial sets must be tagged stage 0".into(),
            ));
        }
        let mut history = BTreeMap::new();
        history.insert((StreamId::Rgb, 0), rgb);
        history.insert((StreamId::Flow, 0), flow);
        Ok(Self {
            history,
            current: 0,
        })
    }

    pub fn current_stage(&self) -> usize {
        self.current
    }

    pub fn detections(&self, stream: StreamId, stage: usize) -> Option<&DetectionSet<T>> {
        self.history.get(&(stream, stage))
    }

    fn get(&self, stream: StreamId, stage: usize) -> Result<&DetectionSet<T>, CoopError> {
        self.history
            .get(&(stream, stage))
            .ok_or(CoopError::MissingHistory { stream, stage })
    }
}

/// Drops exact duplicates (same class, coordinates, and score), keeping the
/// first occurrence; unions across streams and stages can produce them.
fn dedup_exact<T: Real>(boxes: &mut Vec<ScoredBox<T>>) {
    let mut kept: Vec<ScoredBox<T>> = Vec::with_capacity(boxes.len());
    for b in boxes.drain(..) {
        if !kept.iter().any(|k| k == &b) {
            kept.push(b);
        }
    }
    *boxes = kept;
}

/// Assembles the proposal set for the stream scheduled at stage `t`: its own
/// detections from stage `t-2` (stage 0 when `t` is 1) unioned with the other
/// stream's detections from stage `t-1`, the latter confidence-filtered and
/// re-suppressed at the lower cross-stream NMS threshold.
pub fn update_proposals<T: Real>(
    state: &StageState<T>,
    t: usize,
    params: &CooperationParams<T>,
) -> Result<ProposalSet<T>, CoopError> {
    if t < 1 {
        return Err(CoopError::InvalidState(
            "proposal update is defined for stages >= 1".into(),
        ));
    }
    let stream = scheduled_stream(t);
    let own_stage = if t == 1 { 0 } else { t - 2 };
    let own = state.get(stream, own_stage)?;
    let cross = state.get(stream.other(), t - 1)?;

    let mut proposals = own.detections.clone();
    let cross_term = match params.cross_order {
        CrossFilterOrder::FilterThenNms => {
            let filtered: Vec<ScoredBox<T>> = cross
                .detections
                .iter()
                .filter(|d| d.score >= params.confidence_min)
                .copied()
                .collect();
            nms(&filtered, params.nms_cross)
        }
        CrossFilterOrder::NmsThenFilter => nms(&cross.detections, params.nms_cross)
            .into_iter()
            .filter(|d| d.score >= params.confidence_min)
            .collect(),
    };
    proposals.extend(cross_term);
    dedup_exact(&mut proposals);

    Ok(ProposalSet {
        stream,
        stage: t,
        proposals,
    })
}

/// Runs one cooperation stage: builds the scheduled stream's proposals,
/// applies the detection head, and records the result. A state already at
/// `num_stages` is returned unchanged.
pub fn run_stage<T: Real>(
    state: StageState<T>,
    head: &dyn DetectionHead<T>,
    params: &CooperationParams<T>,
) -> Result<StageState<T>, CoopError> {
    let t = state.current + 1;
    if t > params.num_stages {
        return Ok(state);
    }
    let proposals = update_proposals(&state, t, params)?;
    let mut dets = head.detect(&proposals)?;
    dets.stream = proposals.stream;
    dets.stage = t;
    let mut state = state;
    state.history.insert((dets.stream, t), dets);
    state.current = t;
    Ok(state)
}

/// Runs stages until `num_stages` is reached.
pub fn run_all_stages<T: Real>(
    mut state: StageState<T>,
    head: &dyn DetectionHead<T>,
    params: &CooperationParams<T>,
) -> Result<StageState<T>, CoopError> {
    while state.current < params.num_stages {
        state = run_stage(state, head, params)?;
    }
    Ok(state)
}

/// Per-class NMS at the standard threshold over the union of every stored
/// detection set of both streams up to stage `up_to`.
pub fn combine_outputs<T: Real>(
    state: &StageState<T>,
    up_to: usize,
    params: &CooperationParams<T>,
) -> Result<Vec<ScoredBox<T>>, CoopError> {
    if up_to > state.current {
        return Err(CoopError::InvalidState(format!(
            "stage {} not completed (state is at {})",
            up_to, state.current
        )));
    }
    let mut union = Vec::new();
    union.extend(state.get(StreamId::Rgb, 0)?.detections.iter().copied());
    union.extend(state.get(StreamId::Flow, 0)?.detections.iter().copied());
    for t in 1..=up_to {
        union.extend(state.get(scheduled_stream(t), t)?.detections.iter().copied());
    }
    dedup_exact(&mut union);
    Ok(nms(&union, params.nms_standard))
}

/// Label assigned to one proposal by ground-truth overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalLabel {
    /// Max IoU over the ground truth exceeds 0.5; carries the class of the
    /// best-overlapping box.
    Positive(usize),
    Negative,
}

/// Labels every proposal against the ground truth: positive iff its best IoU
/// strictly exceeds 0.5, carrying the class of that box. Applies identically
/// to boxes contributed by the assisting stream.
pub fn label_proposals<T: Real>(
    proposals: &ProposalSet<T>,
    gt: &[(BBox<T>, usize)],
) -> Vec<ProposalLabel> {
    let half = T::of(0.5);
    proposals
        .proposals
        .iter()
        .map(|p| {
            let mut best: Option<(T, usize)> = None;
            for (bbox, class_id) in gt {
                let ov = iou(p.bbox, *bbox);
                if best.map(|(b, _)| ov > b).unwrap_or(true) {
                    best = Some((ov, *class_id));
                }
            }
            match best {
                Some((ov, class_id)) if ov > half => ProposalLabel::Positive(class_id),
                _ => ProposalLabel::Negative,
            }
        })
        .collect()
}
