//! Landmark-anchored attentive morphing of makeup fields.
//!
//! A reference face's makeup is summarized as spatial scale and shift fields,
//! carried onto a source face through a region-masked attention built from
//! relative positions to 68 landmarks and blurred color features, and applied
//! to the source's region-normalized colors.
//!
//! Containers are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, with `*F32` variants alongside.

pub mod amm;
pub mod color;
pub mod engine;
pub mod error;
pub mod face;
pub mod histmatch;
pub mod io;
pub mod metrics;
pub mod resample;
pub mod scalar;
pub mod synth;
pub mod warp;

pub use engine::{BlendMode, Engine, EngineConfig, TransferDiagnostics, TransferParams, TransferSpec};
pub use error::{Error, ErrorKind, Result};
pub use face::{ColorSpace, ParsingMap, Region, RegionSet, WorkingGrid};
pub use amm::FieldMode;
pub use scalar::Real;
pub use synth::SynthParams;
pub use warp::Affine2;

pub type Image = face::Image<f64>;
pub type ImageF32 = face::Image<f32>;
pub type LandmarkSet = face::LandmarkSet<f64>;
pub type LandmarkSetF32 = face::LandmarkSet<f32>;
pub type FaceBundle = face::FaceBundle<f64>;
pub type FaceBundleF32 = face::FaceBundle<f32>;
pub type FeatureGrid = amm::FeatureGrid<f64>;
pub type FeatureGridF32 = amm::FeatureGrid<f32>;
pub type MakeupField = amm::MakeupField<f64>;
pub type MakeupFieldF32 = amm::MakeupField<f32>;
pub type AttentionMatrix = amm::AttentionMatrix<f64>;
pub type AttentionMatrixF32 = amm::AttentionMatrix<f32>;
pub type RelPosField = amm::RelPosField<f64>;
pub type PreparedFace = engine::PreparedFace<f64>;
pub type TransferRequest = engine::TransferRequest<f64>;
pub type TransferResult = engine::TransferResult<f64>;
