//! Links per-frame detections into class-specific action tubes with a greedy
//! online association that tolerates missed detections up to a frame gap.

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, BBox, ScoredBox};
use crate::num::Real;

/// Detections observed in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections<T> {
    pub frame_idx: usize,
    pub dets: Vec<ScoredBox<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeElement<T> {
    pub frame_idx: usize,
    pub bbox: BBox<T>,
    pub score: T,
}

/// Class-labelled track of per-frame boxes with strictly increasing frame
/// indices. `tube_score` is the mean of the element scores; the gap between
/// consecutive elements (number of fully missed frames) never exceeds the
/// linking `max_gap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTube<T> {
    pub class_id: usize,
    pub elements: Vec<TubeElement<T>>,
    pub tube_score: T,
}

impl<T: Real> ActionTube<T> {
    pub fn new(class_id: usize, elements: Vec<TubeElement<T>>) -> Self {
        debug_assert!(!elements.is_empty(), "tube must be non-empty");
        debug_assert!(
            elements.windows(2).all(|w| w[0].frame_idx < w[1].frame_idx),
            "frame indices must strictly increase"
        );
        let tube_score = mean_score(&elements);
        Self {
            class_id,
            elements,
            tube_score,
        }
    }

    pub fn start_frame(&self) -> usize {
        self.elements[0].frame_idx
    }

    pub fn end_frame(&self) -> usize {
        self.elements[self.elements.len() - 1].frame_idx
    }

    /// `(frame, box)` view used by the tube-overlap metric.
    pub fn span(&self) -> Vec<(usize, BBox<T>)> {
        self.elements.iter().map(|e| (e.frame_idx, e.bbox)).collect()
    }
}

/// Arithmetic mean of element scores; the tube-level ranking key.
pub fn mean_score<T: Real>(elements: &[TubeElement<T>]) -> T {
    let sum = elements
        .iter()
        .fold(T::zero(), |acc, e| acc + e.score);
    sum / T::of(elements.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams<T> {
    /// Weight of the IoU term in the association value `score + lambda * iou`.
    pub lambda: T,
    /// Minimum IoU between a tube's last box and a detection to be linkable.
    pub iou_min: T,
    /// Maximum number of consecutive missed frames before a tube terminates.
    pub max_gap: usize,
    /// Tubes shorter than this many elements are discarded.
    pub min_len: usize,
}

impl<T: Real> Default for LinkParams<T> {
    fn default() -> Self {
        Self {
            lambda: T::one(),
            iou_min: T::of(0.1),
            max_gap: 3,
            min_len: 2,
        }
    }
}

struct LiveTube<T> {
    elements: Vec<TubeElement<T>>,
}

impl<T: Real> LiveTube<T> {
    fn last_frame(&self) -> usize {
        self.elements[self.elements.len() - 1].frame_idx
    }

    fn last_box(&self) -> BBox<T> {
        self.elements[self.elements.len() - 1].bbox
    }
}

/// Greedy online association of class-`class_id` detections into tubes.
///
/// Frames are processed in order. Per frame, every `(live tube, detection)`
/// pair with IoU at least `iou_min` becomes a candidate valued at
/// `score + lambda * iou`; candidates are assigned greedily in descending
/// value (ties resolved by tube then detection index), one detection per
/// tube. Unmatched detections open new tubes; tubes that miss more than
/// `max_gap` consecutive frames terminate. Tubes shorter than `min_len` are
/// dropped.
pub fn link_tubes<T: Real>(
    frames: &[FrameDetections<T>],
    class_id: usize,
    p: &LinkParams<T>,
) -> Vec<ActionTube<T>> {
    debug_assert!(
        frames.windows(2).all(|w| w[0].frame_idx <= w[1].frame_idx),
        "frames must be sorted by frame_idx"
    );
    let mut live: Vec<LiveTube<T>> = Vec::new();
    let mut done: Vec<LiveTube<T>> = Vec::new();

    for fd in frames {
        let f = fd.frame_idx;
        // retire tubes that can no longer reach this frame
        let mut still_live = Vec::with_capacity(live.len());
        for lt in live.drain(..) {
            if f > lt.last_frame() && f - lt.last_frame() - 1 > p.max_gap {
                done.push(lt);
            } else {
                still_live.push(lt);
            }
        }
        live = still_live;

        let dets: Vec<&ScoredBox<T>> = fd
            .dets
            .iter()
            .filter(|d| d.class_id == class_id)
            .collect();

        let mut candidates: Vec<(T, usize, usize)> = Vec::new();
        for (ti, lt) in live.iter().enumerate() {
            if f <= lt.last_frame() {
                continue; // duplicate or out-of-order frame entry
            }
            for (di, det) in dets.iter().enumerate() {
                let overlap = iou(lt.last_box(), det.bbox);
                if overlap >= p.iou_min {
                    candidates.push((det.score + p.lambda * overlap, ti, di));
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        let mut tube_taken = vec![false; live.len()];
        let mut det_taken = vec![false; dets.len()];
        for (_, ti, di) in candidates {
            if tube_taken[ti] || det_taken[di] {
                continue;
            }
            tube_taken[ti] = true;
            det_taken[di] = true;
            live[ti].elements.push(TubeElement {
                frame_idx: f,
                bbox: dets[di].bbox,
                score: dets[di].score,
            });
        }
        for (di, det) in dets.iter().enumerate() {
            if !det_taken[di] {
                live.push(LiveTube {
                    elements: vec![TubeElement {
                        frame_idx: f,
                        bbox: det.bbox,
                        score: det.score,
                    }],
                });
            }
        }
    }
    done.extend(live);

    done.into_iter()
        .filter(|lt| lt.elements.len() >= p.min_len)
        .map(|lt| ActionTube::new(class_id, lt.elements))
        .collect()
}
