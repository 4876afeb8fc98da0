//! Landmark-relative position features.

use crate::face::{LandmarkSet, WorkingGrid, LANDMARK_COUNT};
use crate::scalar::Real;

/// Length of a relative position vector: x-differences then y-differences.
pub const REL_POS_DIM: usize = 2 * LANDMARK_COUNT;

/// Per-pixel relative position vectors over a grid, raw and unit-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RelPosField<T> {
    height: usize,
    width: usize,
    raw: Vec<T>,
    normalized: Vec<T>,
    degenerate: Vec<bool>,
}

impl<T: Real> RelPosField<T> {
    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn raw(&self, index: usize) -> &[T] {
        &self.raw[index * REL_POS_DIM..(index + 1) * REL_POS_DIM]
    }

    #[inline]
    pub fn normalized(&self, index: usize) -> &[T] {
        &self.normalized[index * REL_POS_DIM..(index + 1) * REL_POS_DIM]
    }

    /// True where the raw vector was zero (normalized copy left at zero).
    #[inline]
    pub fn is_degenerate(&self, index: usize) -> bool {
        self.degenerate[index]
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

/// Relative position features of every grid pixel against `landmarks`, which
/// must already be expressed in grid coordinates. Pixel `(row, col)` sits at
/// `x = col`, `y = row`.
pub fn rel_pos_features<T: Real>(landmarks: &LandmarkSet<T>, grid: WorkingGrid) -> RelPosField<T> {
    let (h, w) = (grid.height(), grid.width());
    let points = landmarks.points();
    let mut raw = Vec::with_capacity(h * w * REL_POS_DIM);
    let mut normalized = Vec::with_capacity(h * w * REL_POS_DIM);
    let mut degenerate = Vec::with_capacity(h * w);
    for row in 0..h {
        let y = T::lit(row as f64);
        for col in 0..w {
            let x = T::lit(col as f64);
            let start = raw.len();
            raw.extend(points.iter().map(|p| x - p[0]));
            raw.extend(points.iter().map(|p| y - p[1]));
            let v = &raw[start..];
            let norm = v.iter().map(|&d| d * d).sum::<T>().sqrt();
            if norm > T::zero() {
                normalized.extend(v.iter().map(|&d| d / norm));
                degenerate.push(false);
            } else {
                normalized.extend(std::iter::repeat_n(T::zero(), REL_POS_DIM));
                degenerate.push(true);
            }
        }
    }
    RelPosField { height: h, width: w, raw, normalized, degenerate }
}
