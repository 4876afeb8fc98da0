//! Region-masked mixing and alpha interpolation of makeup fields.

use crate::amm::{FieldMode, MakeupField};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Shape of a field: mode, plane count and grid size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldShape {
    pub mode: FieldMode,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl FieldShape {
    pub fn of<T: Real>(field: &MakeupField<T>) -> Self {
        Self { mode: field.mode(), channels: field.channels(), height: field.height(), width: field.width() }
    }
}

/// `Gamma = sum_k m_k Gamma_k + (1 - sum_k m_k) * 1`, and the beta analogue
/// with 0. Masks are binary over the grid and must be disjoint.
pub fn blend_partial<T: Real>(shape: FieldShape, fields: &[(&MakeupField<T>, &[bool])]) -> Result<MakeupField<T>> {
    let n = shape.height * shape.width;
    for (field, mask) in fields {
        if FieldShape::of(field) != shape {
            return Err(Error::mismatch("blend field", shape, FieldShape::of(field)));
        }
        if mask.len() != n {
            return Err(Error::mismatch("blend mask", n, mask.len()));
        }
    }
    let mut gamma = Vec::with_capacity(shape.channels * n);
    let mut beta = Vec::with_capacity(shape.channels * n);
    for c in 0..shape.channels {
        for i in 0..n {
            let mut covered = T::zero();
            let (mut g, mut b) = (T::zero(), T::zero());
            for (field, mask) in fields {
                let m = if mask[i] { T::one() } else { T::zero() };
                covered += m;
                g += m * field.gamma_at(c, i);
                b += m * field.beta_at(c, i);
            }
            if covered > T::one() {
                return Err(Error::OverlappingMasks(i));
            }
            let rest = T::one() - covered;
            gamma.push(g + rest * T::one());
            beta.push(b + rest * T::zero());
        }
    }
    MakeupField::new(shape.mode, shape.channels, shape.height, shape.width, gamma, beta)
}

/// `alpha * first + (1 - alpha) * second` for both gamma and beta.
pub fn blend_interpolate<T: Real>(first: &MakeupField<T>, second: &MakeupField<T>, alpha: T) -> Result<MakeupField<T>> {
    let a = alpha.to_f64_lossy();
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidAlpha(a));
    }
    if !first.same_shape(second) {
        return Err(Error::mismatch("interpolated fields", first.shape_string(), second.shape_string()));
    }
    let rest = T::one() - alpha;
    let mix = |x: &[T], y: &[T]| x.iter().zip(y).map(|(&p, &q)| alpha * p + rest * q).collect::<Vec<T>>();
    MakeupField::new(
        first.mode(),
        first.channels(),
        first.height(),
        first.width(),
        mix(first.gamma(), second.gamma()),
        mix(first.beta(), second.beta()),
    )
}

/// Shade control with a single reference: interpolates between the reference
/// field and the source's own self-morphed field.
pub fn shade<T: Real>(reference: &MakeupField<T>, own: &MakeupField<T>, alpha: T) -> Result<MakeupField<T>> {
    blend_interpolate(reference, own, alpha)
}
