//! Makeup transfer built on the attentive morphing core.

mod blend;
mod distill;
mod modulate;
mod pipeline;
mod request;

pub use blend::{blend_interpolate, blend_partial, shade, FieldShape};
pub use distill::{attention_features, distill_working, DistillConfig, GAMMA_MIN};
pub use modulate::{apply_makeup, denormalize, normalize_working, rebase_field, NormStats, NORM_STD_MIN};
pub use pipeline::{
    Engine, EngineConfig, PreparedFace, ReferenceDiagnostics, RegionDiagnostics, TransferDiagnostics, TransferResult,
};
pub use request::{BlendMode, TransferParams, TransferRequest, TransferSpec};
