//! Class-specific actionness classifiers and temporal refinement of action
//! tubes: score every tube element, smooth with a median filter, drop
//! low-actionness elements, and split what remains into contiguous segments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, BBox};
use crate::num::Real;
use crate::tubes::ActionTube;

/// One labelled training instance for an actionness classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionnessSample<T> {
    pub feature: Vec<T>,
    pub label: bool,
}

/// Scorer for one class: a logistic model, or a constant fallback when the
/// training data was single-label (the degenerate case is flagged by the
/// variant itself).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassScorer<T> {
    Logistic { weights: Vec<T>, bias: T },
    Constant { rate: T },
}

impl<T: Real> ClassScorer<T> {
    pub fn score(&self, feature: &[T]) -> T {
        match self {
            ClassScorer::Logistic { weights, bias } => {
                debug_assert_eq!(weights.len(), feature.len());
                let z = weights
                    .iter()
                    .zip(feature)
                    .fold(*bias, |acc, (w, x)| acc + *w * *x);
                sigmoid(z)
            }
            ClassScorer::Constant { rate } => *rate,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, ClassScorer::Constant { .. })
    }
}

/// One binary scorer per class; outputs are probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionnessClassifier<T> {
    scorers: Vec<ClassScorer<T>>,
}

impl<T: Real> ActionnessClassifier<T> {
    pub fn from_scorers(scorers: Vec<ClassScorer<T>>) -> Self {
        Self { scorers }
    }

    pub fn num_classes(&self) -> usize {
        self.scorers.len()
    }

    pub fn scorer(&self, class_id: usize) -> &ClassScorer<T> {
        &self.scorers[class_id]
    }

    pub fn score(&self, class_id: usize, feature: &[T]) -> T {
        self.scorers[class_id].score(feature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineParams<T> {
    /// Median filter window; must be odd.
    pub window: usize,
    /// Elements with smoothed actionness below this threshold are dropped.
    pub tau: T,
    /// Surviving segments shorter than this are discarded.
    pub min_seg_len: usize,
}

impl<T: Real> Default for RefineParams<T> {
    fn default() -> Self {
        Self {
            window: 7,
            tau: T::of(0.5),
            min_seg_len: 2,
        }
    }
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Builds actionness training samples for `class_id` from predicted tubes.
///
/// `features[i][j]` is the descriptor of `tubes[i].elements[j]`. Every element
/// of every class-`class_id` tube becomes one sample, labelled 1 when its IoU
/// with some class-`class_id` ground-truth box in the same frame exceeds 0.5.
/// Elements falsely linked near temporal boundaries land here with label 0,
/// which is what makes the classifier sensitive to boundaries.
pub fn build_training_set<T: Real>(
    class_id: usize,
    tubes: &[ActionTube<T>],
    features: &[Vec<Vec<T>>],
    gt_by_frame: &BTreeMap<usize, Vec<(BBox<T>, usize)>>,
) -> Vec<ActionnessSample<T>> {
    assert_eq!(tubes.len(), features.len(), "features must align with tubes");
    let half = T::of(0.5);
    let mut samples = Vec::new();
    for (tube, feats) in tubes.iter().zip(features) {
        if tube.class_id != class_id {
            continue;
        }
        assert_eq!(
            tube.elements.len(),
            feats.len(),
            "features must align with tube elements"
        );
        for (el, feat) in tube.elements.iter().zip(feats) {
            let label = gt_by_frame
                .get(&el.frame_idx)
                .map(|boxes| {
                    boxes
                        .iter()
                        .any(|(b, c)| *c == class_id && iou(el.bbox, *b) > half)
                })
                .unwrap_or(false);
            samples.push(ActionnessSample {
                feature: feat.clone(),
                label,
            });
        }
    }
    samples
}

/// Result of a logistic fit, including the loss trace (entry 0 is the loss at
/// initialization, entry `epochs` the loss after the final update).
#[derive(Debug, Clone)]
pub struct LogisticFit<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub loss_per_epoch: Vec<T>,
}

/// Full-batch gradient descent on the mean cross-entropy of a logistic model.
/// Weights and bias start at zero, so zero epochs mean probability 0.5
/// everywhere.
pub fn fit_logistic<T: Real>(
    samples: &[ActionnessSample<T>],
    epochs: usize,
    learning_rate: T,
) -> LogisticFit<T> {
    assert!(!samples.is_empty());
    let dim = samples[0].feature.len();
    let n = T::of(samples.len() as f64);
    let mut weights = vec![T::zero(); dim];
    let mut bias = T::zero();
    let mut losses = Vec::with_capacity(epochs + 1);

    let eps = T::of(1e-12);
    let loss_of = |weights: &[T], bias: T| -> T {
        let mut total = T::zero();
        for s in samples {
            let z = weights
                .iter()
                .zip(&s.feature)
                .fold(bias, |acc, (w, x)| acc + *w * *x);
            let p = sigmoid(z).max(eps).min(T::one() - eps);
            total += if s.label { -p.ln() } else { -(T::one() - p).ln() };
        }
        total / n
    };

    for _ in 0..epochs {
        losses.push(loss_of(&weights, bias));
        let mut grad_w = vec![T::zero(); dim];
        let mut grad_b = T::zero();
        for s in samples {
            let z = weights
                .iter()
                .zip(&s.feature)
                .fold(bias, |acc, (w, x)| acc + *w * *x);
            let err = sigmoid(z) - if s.label { T::one() } else { T::zero() };
            for (g, x) in grad_w.iter_mut().zip(&s.feature) {
                *g += err * *x;
            }
            grad_b += err;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= learning_rate * *g / n;
        }
        bias -= learning_rate * grad_b / n;
    }
    losses.push(loss_of(&weights, bias));

    LogisticFit {
        weights,
        bias,
        loss_per_epoch: losses,
    }
}

/// Trains one binary scorer per class. A class whose samples carry a single
/// label (or none at all) gets a constant scorer at the empirical base rate.
///
/// Updates are full-batch from zero-initialized weights, so the fit is
/// deterministic; `_seed` is accepted for interface stability with stochastic
/// trainers.
pub fn train_actionness<T: Real>(
    samples_by_class: &[Vec<ActionnessSample<T>>],
    epochs: usize,
    learning_rate: T,
    _seed: u64,
) -> ActionnessClassifier<T> {
    let scorers = samples_by_class
        .iter()
        .map(|samples| {
            if samples.is_empty() {
                return ClassScorer::Constant { rate: T::of(0.5) };
            }
            let positives = samples.iter().filter(|s| s.label).count();
            if positives == 0 || positives == samples.len() {
                let rate = T::of(positives as f64 / samples.len() as f64);
                return ClassScorer::Constant { rate };
            }
            let fit = fit_logistic(samples, epochs, learning_rate);
            ClassScorer::Logistic {
                weights: fit.weights,
                bias: fit.bias,
            }
        })
        .collect();
    ActionnessClassifier { scorers }
}

/// Sliding median with a centered odd window and edge replication, so the
/// output has the same length as the input.
pub fn median_filter<T: Real>(scores: &[T], window: usize) -> Vec<T> {
    assert!(window % 2 == 1, "window must be odd");
    assert!(!scores.is_empty());
    let half = window / 2;
    let n = scores.len() as isize;
    let mut out = Vec::with_capacity(scores.len());
    let mut buf = Vec::with_capacity(window);
    for i in 0..scores.len() {
        buf.clear();
        for k in -(half as isize)..=(half as isize) {
            let j = (i as isize + k).clamp(0, n - 1) as usize;
            buf.push(scores[j]);
        }
        buf.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        out.push(buf[half]);
    }
    out
}

/// Scores every element of `tube` with its class scorer and delegates to
/// [`refine_tube_with_scores`].
pub fn refine_tube<T: Real>(
    tube: &ActionTube<T>,
    clf: &ActionnessClassifier<T>,
    features: &[Vec<T>],
    p: &RefineParams<T>,
) -> Vec<ActionTube<T>> {
    assert_eq!(
        features.len(),
        tube.elements.len(),
        "features must align with tube elements"
    );
    let scores: Vec<T> = features
        .iter()
        .map(|f| clf.score(tube.class_id, f))
        .collect();
    refine_tube_with_scores(tube, &scores, p)
}

/// Median-filters the actionness scores, drops elements whose smoothed score
/// falls below `tau`, and splits the survivors at the dropped positions into
/// maximal contiguous runs. Runs of at least `min_seg_len` elements come back
/// as tubes with recomputed scores.
pub fn refine_tube_with_scores<T: Real>(
    tube: &ActionTube<T>,
    scores: &[T],
    p: &RefineParams<T>,
) -> Vec<ActionTube<T>> {
    assert_eq!(scores.len(), tube.elements.len());
    let smoothed = median_filter(scores, p.window);
    let mut out = Vec::new();
    let mut run: Vec<_> = Vec::new();
    for (el, s) in tube.elements.iter().zip(&smoothed) {
        if *s >= p.tau {
            run.push(*el);
        } else if !run.is_empty() {
            if run.len() >= p.min_seg_len {
                out.push(ActionTube::new(tube.class_id, std::mem::take(&mut run)));
            } else {
                run.clear();
            }
        }
    }
    if run.len() >= p.min_seg_len {
        out.push(ActionTube::new(tube.class_id, run));
    }
    out
}
