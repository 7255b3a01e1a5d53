//! Feature-level cross-stream cooperation: a two-layer 1x1-convolution message
//! function with element-wise additive fusion, ROI pooling, and an exact
//! backward pass for gradient verification.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::num::Real;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("reduction {reduction} does not divide channel count {channels}")]
    BadReduction { channels: usize, reduction: usize },
    #[error("pyramid level count mismatch: rgb {rgb}, flow {flow}, params {params}")]
    MissingLevel {
        rgb: usize,
        flow: usize,
        params: usize,
    },
}

/// Dense `C x H x W` grid of real values, stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for h in 0..height {
                for w in 0..width {
                    data.push(f(c, h, w));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn from_vec(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<T>,
    ) -> Result<Self, FusionError> {
        if data.len() != channels * height * width {
            return Err(FusionError::Shape(format!(
                "{} values for {}x{}x{} map",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    fn idx(&self, c: usize, h: usize, w: usize) -> usize {
        (c * self.height + h) * self.width + w
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, w: usize) -> T {
        self.data[self.idx(c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, h: usize, w: usize, v: T) {
        let i = self.idx(c, h, w);
        self.data[i] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

/// Default spatial size of pooled ROI features.
pub const DEFAULT_ROI_SIZE: usize = 7;

/// Fixed-size `S x S` feature pooled from one box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiFeature<T>(FeatureMap<T>);

impl<T: Real> RoiFeature<T> {
    pub fn new(map: FeatureMap<T>) -> Result<Self, FusionError> {
        if map.height() != map.width() {
            return Err(FusionError::Shape(format!(
                "ROI feature must be square, got {}x{}",
                map.height(),
                map.width()
            )));
        }
        Ok(Self(map))
    }

    pub fn size(&self) -> usize {
        self.0.height()
    }

    pub fn map(&self) -> &FeatureMap<T> {
        &self.0
    }

    pub fn into_map(self) -> FeatureMap<T> {
        self.0
    }
}

/// Parameters of the message function: two 1x1 layers with a relu between
/// them. The first layer reduces the channel count by `reduction`, the second
/// restores it.
///
/// Layout: `w1` is `(C/r) x C` row-major, `w2` is `C x (C/r)` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageParams<T> {
    channels: usize,
    hidden: usize,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

impl<T: Real> MessageParams<T> {
    /// All-zero parameters: the message is identically zero, so fusion is the
    /// identity on its target.
    pub fn zeros(channels: usize, reduction: usize) -> Result<Self, FusionError> {
        if reduction == 0 || channels % reduction != 0 {
            return Err(FusionError::BadReduction {
                channels,
                reduction,
            });
        }
        let hidden = channels / reduction;
        Ok(Self {
            channels,
            hidden,
            w1: vec![T::zero(); hidden * channels],
            b1: vec![T::zero(); hidden],
            w2: vec![T::zero(); channels * hidden],
            b2: vec![T::zero(); channels],
        })
    }

    /// Default initialization: `w1` from a small uniform range, `w2` and `b2`
    /// zero so fusion starts as the identity.
    pub fn init<R: Rng>(
        channels: usize,
        reduction: usize,
        rng: &mut R,
    ) -> Result<Self, FusionError> {
        let mut p = Self::zeros(channels, reduction)?;
        for w in p.w1.iter_mut() {
            *w = T::of(rng.random_range(-0.1..0.1));
        }
        Ok(p)
    }

    pub fn from_parts(
        channels: usize,
        reduction: usize,
        w1: Vec<T>,
        b1: Vec<T>,
        w2: Vec<T>,
        b2: Vec<T>,
    ) -> Result<Self, FusionError> {
        let mut p = Self::zeros(channels, reduction)?;
        if w1.len() != p.w1.len()
            || b1.len() != p.b1.len()
            || w2.len() != p.w2.len()
            || b2.len() != p.b2.len()
        {
            return Err(FusionError::Shape("parameter length mismatch".into()));
        }
        p.w1 = w1;
        p.b1 = b1;
        p.w2 = w2;
        p.b2 = b2;
        Ok(p)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn reduction(&self) -> usize {
        self.channels / self.hidden
    }
}

/// Gradients with the same shapes as [`MessageParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MessageGrads<T> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

/// Forward intermediates needed by [`message_backward`].
#[derive(Debug, Clone)]
pub struct MessageCache<T> {
    src: FeatureMap<T>,
    /// Pre-relu activations of the hidden layer, `(C/r) x H x W`.
    pre_activation: Vec<T>,
}

impl<T: Real> MessageCache<T> {
    /// Pre-relu hidden activations, useful for keeping finite-difference
    /// probes away from the relu kink.
    pub fn pre_activations(&self) -> &[T] {
        &self.pre_activation
    }
}

fn check_src_shape<T: Real>(src: &FeatureMap<T>, p: &MessageParams<T>) -> Result<(), FusionError> {
    if src.channels() != p.channels {
        return Err(FusionError::Shape(format!(
            "map has {} channels, params expect {}",
            src.channels(),
            p.channels
        )));
    }
    Ok(())
}

/// Applies the message function at every spatial location:
/// `out[:, h, w] = w2 * relu(w1 * src[:, h, w] + b1) + b2`.
///
/// The output has the same shape as the input.
pub fn message_forward<T: Real>(
    src: &FeatureMap<T>,
    p: &MessageParams<T>,
) -> Result<FeatureMap<T>, FusionError> {
    message_forward_cached(src, p).map(|(out, _)| out)
}

/// Like [`message_forward`] but also returns the intermediates required for
/// the exact backward pass.
pub fn message_forward_cached<T: Real>(
    src: &FeatureMap<T>,
    p: &MessageParams<T>,
) -> Result<(FeatureMap<T>, MessageCache<T>), FusionError> {
    check_src_shape(src, p)?;
    let (c, h, w) = src.shape();
    let k = p.hidden;
    let mut pre = vec![T::zero(); k * h * w];
    let mut out = FeatureMap::zeros(c, h, w);
    for hh in 0..h {
        for ww in 0..w {
            for kk in 0..k {
                let mut z = p.b1[kk];
                for cc in 0..c {
                    z += p.w1[kk * c + cc] * src.get(cc, hh, ww);
                }
                pre[(kk * h + hh) * w + ww] = z;
            }
            for cc in 0..c {
                let mut v = p.b2[cc];
                for kk in 0..k {
                    let a = pre[(kk * h + hh) * w + ww].max(T::zero());
                    v += p.w2[cc * k + kk] * a;
                }
                out.set(cc, hh, ww, v);
            }
        }
    }
    Ok((
        out,
        MessageCache {
            src: src.clone(),
            pre_activation: pre,
        },
    ))
}

/// Exact analytic gradients of [`message_forward`] with respect to the source
/// map and the parameters. The relu subgradient at 0 is taken as 0.
pub fn message_backward<T: Real>(
    grad_out: &FeatureMap<T>,
    cache: &MessageCache<T>,
    p: &MessageParams<T>,
) -> Result<(FeatureMap<T>, MessageGrads<T>), FusionError> {
    if grad_out.shape() != cache.src.shape() {
        return Err(FusionError::Shape(format!(
            "grad shape {:?} does not match forward shape {:?}",
            grad_out.shape(),
            cache.src.shape()
        )));
    }
    check_src_shape(&cache.src, p)?;
    let (c, h, w) = cache.src.shape();
    let k = p.hidden;
    let mut grads = MessageGrads {
        w1: vec![T::zero(); k * c],
        b1: vec![T::zero(); k],
        w2: vec![T::zero(); c * k],
        b2: vec![T::zero(); c],
    };
    let mut grad_src = FeatureMap::zeros(c, h, w);
    for hh in 0..h {
        for ww in 0..w {
            for cc in 0..c {
                grads.b2[cc] += grad_out.get(cc, hh, ww);
            }
            for kk in 0..k {
                let z = cache.pre_activation[(kk * h + hh) * w + ww];
                let a = z.max(T::zero());
                let mut gh = T::zero();
                for cc in 0..c {
                    let go = grad_out.get(cc, hh, ww);
                    grads.w2[cc * k + kk] += go * a;
                    gh += p.w2[cc * k + kk] * go;
                }
                if z <= T::zero() {
                    continue;
                }
                grads.b1[kk] += gh;
                for cc in 0..c {
                    grads.w1[kk * c + cc] += gh * cache.src.get(cc, hh, ww);
                    let gs = grad_src.get(cc, hh, ww) + gh * p.w1[kk * c + cc];
                    grad_src.set(cc, hh, ww, gs);
                }
            }
        }
    }
    Ok((grad_src, grads))
}

/// Element-wise addition of the message extracted from `src` onto `target`.
pub fn fuse<T: Real>(
    target: &FeatureMap<T>,
    src: &FeatureMap<T>,
    p: &MessageParams<T>,
) -> Result<FeatureMap<T>, FusionError> {
    if target.shape() != src.shape() {
        return Err(FusionError::Shape(format!(
            "target shape {:?} != source shape {:?}",
            target.shape(),
            src.shape()
        )));
    }
    let msg = message_forward(src, p)?;
    let mut out = target.clone();
    for (o, m) in out.values_mut().iter_mut().zip(msg.values()) {
        *o += *m;
    }
    Ok(out)
}

/// [`fuse`] on pooled ROI features. The direction follows the stage schedule:
/// flow feeds rgb at odd stages and rgb feeds flow at even stages.
pub fn fuse_roi<T: Real>(
    target: &RoiFeature<T>,
    src: &RoiFeature<T>,
    p: &MessageParams<T>,
) -> Result<RoiFeature<T>, FusionError> {
    RoiFeature::new(fuse(target.map(), src.map(), p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolKind {
    /// One bilinear sample at the center of each sub-region.
    Average,
    /// Max over a 2x2 bilinear sample grid per sub-region.
    Max,
}

/// Bilinear sample at continuous coordinates, pixel centers at `(i+0.5, j+0.5)`,
/// edge replication outside the center grid.
fn bilinear<T: Real>(fm: &FeatureMap<T>, c: usize, x: T, y: T) -> T {
    let half = T::of(0.5);
    let fx = x - half;
    let fy = y - half;
    let w = fm.width() as isize;
    let h = fm.height() as isize;
    let clamp = |v: isize, hi: isize| v.max(0).min(hi - 1) as usize;
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let xi = x0.to_f64().unwrap_or(0.0) as isize;
    let yi = y0.to_f64().unwrap_or(0.0) as isize;
    let v00 = fm.get(c, clamp(yi, h), clamp(xi, w));
    let v01 = fm.get(c, clamp(yi, h), clamp(xi + 1, w));
    let v10 = fm.get(c, clamp(yi + 1, h), clamp(xi, w));
    let v11 = fm.get(c, clamp(yi + 1, h), clamp(xi + 1, w));
    let one = T::one();
    v00 * (one - tx) * (one - ty) + v01 * tx * (one - ty) + v10 * (one - tx) * ty + v11 * tx * ty
}

/// Pools an `S x S` feature from the box region, averaging one bilinear sample
/// per equal sub-region. A zero-area box yields an all-zero feature.
pub fn roi_pool<T: Real>(fm: &FeatureMap<T>, b: BBox<T>, size: usize) -> RoiFeature<T> {
    roi_pool_with(fm, b, size, PoolKind::Average)
}

pub fn roi_pool_with<T: Real>(
    fm: &FeatureMap<T>,
    b: BBox<T>,
    size: usize,
    kind: PoolKind,
) -> RoiFeature<T> {
    let c = fm.channels();
    if b.area() <= T::zero() {
        return RoiFeature(FeatureMap::zeros(c, size, size));
    }
    let sn = T::of(size as f64);
    let cell_w = b.width() / sn;
    let cell_h = b.height() / sn;
    let half = T::of(0.5);
    let map = FeatureMap::from_fn(c, size, size, |cc, i, j| {
        let cx = b.x1 + (T::of(j as f64) + half) * cell_w;
        let cy = b.y1 + (T::of(i as f64) + half) * cell_h;
        match kind {
            PoolKind::Average => bilinear(fm, cc, cx, cy),
            PoolKind::Max => {
                let q = T::of(0.25);
                let dx = cell_w * q;
                let dy = cell_h * q;
                let mut best = T::neg_infinity();
                for &sx in &[cx - dx, cx + dx] {
                    for &sy in &[cy - dy, cy + dy] {
                        best = best.max(bilinear(fm, cc, sx, sy));
                    }
                }
                best
            }
        }
    });
    RoiFeature(map)
}

/// One image-level pass from the flow stream into the rgb stream, level by
/// level. Must be applied exactly once per frame, before any stage runs.
pub fn image_level_pass<T: Real>(
    rgb: &mut [FeatureMap<T>],
    flow: &[FeatureMap<T>],
    params: &[MessageParams<T>],
) -> Result<(), FusionError> {
    if rgb.len() != flow.len() || rgb.len() != params.len() {
        return Err(FusionError::MissingLevel {
            rgb: rgb.len(),
            flow: flow.len(),
            params: params.len(),
        });
    }
    for ((r, f), p) in rgb.iter_mut().zip(flow).zip(params) {
        *r = fuse(r, f, p)?;
    }
    Ok(())
}
