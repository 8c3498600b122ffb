//! Multi-needle localization on CT volumes.
//!
//! The library decomposes needle localization into a tip-handle detection
//! stage and a tip-handle matching stage:
//!
//! - [`geometry`] — 3D/2D segment, angle, and distance primitives.
//! - [`volume`] — voxel grids with trilinear sampling, segment HU profiles,
//!   white top-hat preprocessing, and clamp-normalization.
//! - [`phantom`] — synthetic CT scenes with known needle ground truth.
//! - [`detection`] — heatmap encoding/decoding, detection losses, peak
//!   extraction, slice fusion, and a simulated detector.
//! - [`matcher`] — the constrained unbalanced assignment model for pairing
//!   tips with handles, solved by greedy matching and merging, plus an
//!   exact brute-force reference solver.
//! - [`metrics`] — 2D and 3D evaluation against ground truth.
//!
//! All numeric code is generic over the scalar type via the [`Scalar`]
//! trait; `f64` aliases for the main types live at the crate root.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

pub mod detection;
mod error;
pub mod geometry;
pub mod matcher;
pub mod metrics;
pub mod phantom;
pub mod volume;

pub use error::{Error, Result};

/// Floating-point scalar the whole crate is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy cast from any primitive; panics only on values a float cannot
    /// represent at all (never for finite inputs).
    fn cast<U: ToPrimitive>(x: U) -> Self {
        Self::from_f64(x.to_f64().expect("numeric cast")).expect("numeric cast")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type Point3d = geometry::Point3<f64>;
pub type Segment3d = geometry::Segment3<f64>;
pub type PolarAngled = geometry::PolarAngle<f64>;
pub type UnitVec3d = geometry::UnitVec3<f64>;
pub type VoxelVolumed = volume::VoxelVolume<f64>;
pub type Slice2Dd = volume::Slice2D<f64>;
pub type Heatmap2Dd = detection::Heatmap2D<f64>;
pub type DetectionSet3Dd = detection::DetectionSet3D<f64>;
pub type GroundTruthd = phantom::GroundTruth<f64>;
pub type SceneSpecd = phantom::SceneSpec<f64>;
pub type MatchSolutiond = matcher::MatchSolution<f64>;
