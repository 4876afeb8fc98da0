//! Attentive morphing: relative positions, region-masked attention between a
//! source and a reference grid, and morphing of makeup fields through it.

mod attention;
pub mod dense;
mod field;
mod position;

pub use attention::{
    attention_row, attentive_matrix, morph_field, sparse_row, AttentionMatrix, AttentionSide, HeatMap, RowStatus,
    RowView, SparseRow,
};
pub use field::{expand_field, FeatureGrid, FieldMode, MakeupField};
pub use position::{rel_pos_features, RelPosField, REL_POS_DIM};
