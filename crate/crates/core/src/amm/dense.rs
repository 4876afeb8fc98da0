//! Dense all-pairs attention. Kept as the reference the bucketed path is checked
//! against, and as the baseline in benchmarks.

use rayon::prelude::*;

use super::attention::{validate_pair, AttentionSide};
use crate::error::Result;
use crate::scalar::Real;

/// One dense row: logits against every reference pixel, indicator applied
/// afterwards, then a max-subtracted softmax over the surviving entries.
pub fn dense_attention_row<T: Real>(source: &AttentionSide<'_, T>, reference: &AttentionSide<'_, T>, w: T, i: usize) -> Vec<T> {
    let n = reference.len();
    let mut query = Vec::new();
    source.joint_vector(i, w, &mut query);
    let mut key = Vec::with_capacity(query.len());
    let logits: Vec<T> = (0..n)
        .map(|j| {
            key.clear();
            reference.joint_vector(j, w, &mut key);
            let mut acc = T::zero();
            for k in 0..query.len() {
                acc += query[k] * key[k];
            }
            acc
        })
        .collect();
    let region = source.parsing.labels()[i];
    let indicator: Vec<bool> = reference.parsing.labels().iter().map(|&r| region.is_face() && r == region).collect();
    let mut max = T::neg_infinity();
    for j in 0..n {
        if indicator[j] && logits[j] > max {
            max = logits[j];
        }
    }
    let mut row = vec![T::zero(); n];
    if max == T::neg_infinity() {
        return row;
    }
    let mut denom = T::zero();
    for j in 0..n {
        if indicator[j] {
            row[j] = (logits[j] - max).exp();
            denom += row[j];
        }
    }
    for v in &mut row {
        *v /= denom;
    }
    row
}

/// Full dense matrix. Memory grows as `(HW)^2`; meant for small grids.
pub fn dense_attention<T: Real>(source: &AttentionSide<'_, T>, reference: &AttentionSide<'_, T>, w: T) -> Result<Vec<Vec<T>>> {
    validate_pair(source, reference, w)?;
    Ok((0..source.len()).into_par_iter().map(|i| dense_attention_row(source, reference, w, i)).collect())
}

/// Streams dense rows to `visit` without materializing the matrix.
pub fn for_each_dense_row<T: Real>(
    source: &AttentionSide<'_, T>,
    reference: &AttentionSide<'_, T>,
    w: T,
    visit: impl Fn(usize, &[T]) + Sync,
) -> Result<()> {
    validate_pair(source, reference, w)?;
    (0..source.len()).into_par_iter().for_each(|i| visit(i, &dense_attention_row(source, reference, w, i)));
    Ok(())
}
