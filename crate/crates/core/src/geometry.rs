//! Axis-aligned box algebra shared by every other module: IoU, clipping, and
//! per-class greedy non-maximum suppression.

use serde::{Deserialize, Serialize};

use crate::num::Real;

/// Axis-aligned rectangle in corner convention: `x1 <= x2`, `y1 <= y2`.
///
/// Coordinates are continuous; zero-area boxes are valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox<T> {
    pub x1: T,
    pub y1: T,
    pub x2: T,
    pub y2: T,
}

impl<T: Real> BBox<T> {
    pub fn new(x1: T, y1: T, x2: T, y2: T) -> Self {
        debug_assert!(x1 <= x2 && y1 <= y2, "corner convention violated");
        Self { x1, y1, x2, y2 }
    }

    /// Builds a box from possibly swapped corner pairs by ordering each axis.
    pub fn normalized(xa: T, ya: T, xb: T, yb: T) -> Self {
        Self {
            x1: xa.min(xb),
            y1: ya.min(yb),
            x2: xa.max(xb),
            y2: ya.max(yb),
        }
    }

    pub fn width(&self) -> T {
        self.x2 - self.x1
    }

    pub fn height(&self) -> T {
        self.y2 - self.y1
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        self.x1 <= self.x2
            && self.y1 <= self.y2
            && self.x1.is_finite()
            && self.y1.is_finite()
            && self.x2.is_finite()
            && self.y2.is_finite()
    }
}

/// A box with a class label and a confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox<T> {
    pub bbox: BBox<T>,
    pub class_id: usize,
    pub score: T,
}

impl<T: Real> ScoredBox<T> {
    pub fn new(bbox: BBox<T>, class_id: usize, score: T) -> Self {
        Self {
            bbox,
            class_id,
            score,
        }
    }
}

/// Intersection-over-union of two boxes.
///
/// Total on valid boxes; returns 0 when the union has zero area (both boxes
/// degenerate).
pub fn iou<T: Real>(a: BBox<T>, b: BBox<T>) -> T {
    let iw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih = a.y2.min(b.y2) - a.y1.max(b.y1);
    if iw <= T::zero() || ih <= T::zero() {
        return T::zero();
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        T::zero()
    } else {
        inter / union
    }
}

/// Clamps a box to the `[0, width] x [0, height]` extent.
pub fn clip<T: Real>(b: BBox<T>, width: T, height: T) -> BBox<T> {
    let cx = |v: T| v.max(T::zero()).min(width);
    let cy = |v: T| v.max(T::zero()).min(height);
    BBox::new(cx(b.x1), cy(b.y1), cx(b.x2), cy(b.y2))
}

/// Greedy non-maximum suppression, applied per class.
///
/// Repeatedly keeps the highest-scoring remaining box and suppresses every
/// same-class box whose IoU with it exceeds `threshold` (strict, so boxes
/// exactly at the threshold survive). Equal scores keep their original input
/// order. The output is sorted by descending score.
pub fn nms<T: Real>(dets: &[ScoredBox<T>], threshold: T) -> Vec<ScoredBox<T>> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // stable sort: ties stay in original index order
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut suppressed = vec![false; dets.len()];
    let mut keep = Vec::new();
    for (i, &idx) in order.iter().enumerate() {
        if suppressed[idx] {
            continue;
        }
        keep.push(dets[idx]);
        for &jdx in &order[i + 1..] {
            if suppressed[jdx] || dets[jdx].class_id != dets[idx].class_id {
                continue;
            }
            if iou(dets[idx].bbox, dets[jdx].bbox) > threshold {
                suppressed[jdx] = true;
            }
        }
    }
    keep
}
