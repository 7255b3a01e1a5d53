//! Two-stream action localization at desk scale.
//!
//! The library covers the full frame-to-video pipeline: box algebra and NMS
//! ([`geometry`]), the cross-stream cooperation stage machine
//! ([`cooperation`]), feature-level message passing with an exact backward
//! pass ([`fusion`]), tube linking ([`tubes`]), actionness-based temporal
//! refinement ([`refine`]), detection metrics ([`eval`]), and a synthetic
//! two-stream experiment harness ([`harness`]).
//!
//! Numeric code is generic over the scalar type via [`num::Real`]; the
//! aliases below fix the common instantiations.

pub mod cooperation;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod harness;
pub mod num;
pub mod refine;
pub mod tubes;

pub use num::Real;

pub type BBox32 = geometry::BBox<f32>;
pub type BBox64 = geometry::BBox<f64>;
pub type ScoredBox32 = geometry::ScoredBox<f32>;
pub type ScoredBox64 = geometry::ScoredBox<f64>;
pub type FeatureMap32 = fusion::FeatureMap<f32>;
pub type FeatureMap64 = fusion::FeatureMap<f64>;
pub type ActionTube32 = tubes::ActionTube<f32>;
pub type ActionTube64 = tubes::ActionTube<f64>;
