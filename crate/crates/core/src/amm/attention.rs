use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{FeatureGrid, MakeupField};
use super::position::{RelPosField, REL_POS_DIM};
use crate::error::{Error, Result};
use crate::face::{ParsingMap, Region};
use crate::scalar::Real;

/// One side of the attention computation: visual features, relative positions
/// and region labels over the same grid.
#[derive(Debug, Clone, Copy)]
pub struct AttentionSide<'a, T> {
    pub features: &'a FeatureGrid<T>,
    pub positions: &'a RelPosField<T>,
    pub parsing: &'a ParsingMap,
}

impl<'a, T: Real> AttentionSide<'a, T> {
    pub fn new(features: &'a FeatureGrid<T>, positions: &'a RelPosField<T>, parsing: &'a ParsingMap) -> Result<Self> {
        let dims = (parsing.height(), parsing.width());
        if (features.height(), features.width()) != dims {
            return Err(Error::mismatch("feature grid", dims, (features.height(), features.width())));
        }
        if (positions.height(), positions.width()) != dims {
            return Err(Error::mismatch("position field", dims, (positions.height(), positions.width())));
        }
        Ok(Self { features, positions, parsing })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.parsing.height(), self.parsing.width())
    }

    pub fn len(&self) -> usize {
        self.parsing.labels().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenated `[w * v, p / |p|]` vector of pixel `index`.
    pub(crate) fn joint_vector(&self, index: usize, w: T, out: &mut Vec<T>) {
        for c in 0..self.features.channels() {
            out.push(w * self.features.at(c, index));
        }
        out.extend_from_slice(self.positions.normalized(index));
    }
}

pub(crate) fn validate_pair<T: Real>(source: &AttentionSide<'_, T>, reference: &AttentionSide<'_, T>, w: T) -> Result<()> {
    let wf = w.to_f64_lossy();
    if !wf.is_finite() || wf < 0.0 {
        return Err(Error::InvalidWeight(wf));
    }
    if source.dims() != reference.dims() {
        return Err(Error::mismatch("attention grids", source.dims(), reference.dims()));
    }
    if source.features.channels() != reference.features.channels() {
        return Err(Error::mismatch(
            "feature channels",
            source.features.channels(),
            reference.features.channels(),
        ));
    }
    Ok(())
}

/// Whether a source row attends to anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    /// Source pixel is background; never attends.
    Background,
    /// Face pixel whose region is absent from the reference.
    Unmatched,
    Attended,
}

#[derive(Debug, Clone, PartialEq)]
struct Row<T> {
    region: Region,
    /// Aligned with the region's reference column list.
    weights: Vec<T>,
}

/// Sparse row-stochastic attention from source pixels to reference pixels.
///
/// Weights are only stored for same-region pairs. Every row of a face region
/// shares that region's reference column list, so a row is just a weight
/// vector aligned with it.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix<T> {
    source_dims: (usize, usize),
    reference_dims: (usize, usize),
    columns: [Vec<u32>; 4],
    rows: Vec<Row<T>>,
}

/// Borrowed view of one attention row.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a, T> {
    pub region: Region,
    pub indices: &'a [u32],
    pub weights: &'a [T],
}

impl<'a, T: Real> RowView<'a, T> {
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, T)> + 'a {
        self.indices.iter().zip(self.weights.iter()).map(|(&j, &w)| (j as usize, w))
    }

    pub fn sum(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Reference index of the largest weight; first index wins ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (j, w) in self.entries() {
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some((j, w));
            }
        }
        best.map(|(j, _)| j)
    }
}

impl<T: Real> AttentionMatrix<T> {
    /// `(height, width)` of the source grid.
    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    pub fn reference_dims(&self) -> (usize, usize) {
        self.reference_dims
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, index: usize) -> RowView<'_, T> {
        let row = &self.rows[index];
        let indices = if row.weights.is_empty() { &[][..] } else { &self.columns[row.region.label() as usize][..] };
        RowView { region: row.region, indices, weights: &row.weights }
    }

    pub fn row_status(&self, index: usize) -> RowStatus {
        let row = &self.rows[index];
        if !row.region.is_face() {
            RowStatus::Background
        } else if row.weights.is_empty() {
            RowStatus::Unmatched
        } else {
            RowStatus::Attended
        }
    }

    /// Stored (nonzero-capable) entries in the whole matrix.
    pub fn stored_entries(&self) -> usize {
        self.rows.iter().map(|r| r.weights.len()).sum()
    }

    /// Fraction of face rows that attend to something (1 when there are no face rows).
    pub fn coverage(&self) -> f64 {
        let face = self.rows.iter().filter(|r| r.region.is_face()).count();
        if face == 0 {
            return 1.0;
        }
        let attended = self.rows.iter().filter(|r| !r.weights.is_empty()).count();
        attended as f64 / face as f64
    }

    /// Densifies the matrix (tests and small grids only).
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.reference_dims.0 * self.reference_dims.1;
        (0..self.rows.len())
            .map(|i| {
                let mut dense = vec![T::zero(); n];
                for (j, w) in self.row(i).entries() {
                    dense[j] = w;
                }
                dense
            })
            .collect()
    }
}

/// Region-bucketed attention: for each source face pixel, a softmax over the
/// joint similarity `[w v_i, p_i/|p_i|] . [w v_j, p_j/|p_j|]` restricted to
/// reference pixels of the same region. Rows are computed independently with a
/// fixed summation order, so the result does not depend on the thread count.
pub fn attentive_matrix<T: Real>(
    source: &AttentionSide<'_, T>,
    reference: &AttentionSide<'_, T>,
    w: T,
) -> Result<AttentionMatrix<T>> {
    validate_pair(source, reference, w)?;
    let dim = source.features.channels() + REL_POS_DIM;

    let mut columns: [Vec<u32>; 4] = Default::default();
    for (j, &r) in reference.parsing.labels().iter().enumerate() {
        if r.is_face() {
            columns[r.label() as usize].push(j as u32);
        }
    }
    let packed: [Vec<T>; 4] = std::array::from_fn(|label| {
        let mut buf = Vec::with_capacity(columns[label].len() * dim);
        for &j in &columns[label] {
            reference.joint_vector(j as usize, w, &mut buf);
        }
        buf
    });

    let rows = (0..source.len())
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(dim), Vec::new()),
            |(query, logits), i| {
                let region = source.parsing.labels()[i];
                let label = region.label() as usize;
                if !region.is_face() || columns[label].is_empty() {
                    return Row { region, weights: Vec::new() };
                }
                query.clear();
                source.joint_vector(i, w, query);
                logits.clear();
                logits.extend(packed[label].chunks_exact(dim).map(|key| dot(query, key)));
                Row { region, weights: softmax(logits) }
            },
        )
        .collect();

    Ok(AttentionMatrix { source_dims: source.dims(), reference_dims: reference.dims(), columns, rows })
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Max-subtracted softmax, summed in index order.
fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total = out.iter().fold(T::zero(), |acc, &v| acc + v);
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Morphs a reference-grid field onto the source grid through `attention`.
/// Rows without attention produce gamma = 1, beta = 0.
pub fn morph_field<T: Real>(attention: &AttentionMatrix<T>, field: &MakeupField<T>) -> Result<MakeupField<T>> {
    if (field.height(), field.width()) != attention.reference_dims {
        return Err(Error::mismatch(
            "field vs attention reference grid",
            attention.reference_dims,
            (field.height(), field.width()),
        ));
    }
    let (h, w) = attention.source_dims;
    let n = h * w;
    let channels = field.channels();
    let mut gamma = vec![T::one(); channels * n];
    let mut beta = vec![T::zero(); channels * n];
    for i in 0..n {
        let row = attention.row(i);
        if row.is_empty() {
            continue;
        }
        for c in 0..channels {
            let (gp, bp) = (field.gamma_plane(c), field.beta_plane(c));
            let (mut g, mut b) = (T::zero(), T::zero());
            for (j, a) in row.entries() {
                g += a * gp[j];
                b += a * bp[j];
            }
            gamma[c * n + i] = g;
            beta[c * n + i] = b;
        }
    }
    MakeupField::new(field.mode(), channels, h, w, gamma, beta)
}

/// Dense `H x W` map of one attention row over the reference grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap<T> {
    pub height: usize,
    pub width: usize,
    pub values: Vec<T>,
}

impl<T: Real> HeatMap<T> {
    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// `(row, col)` of the maximum, `None` for an all-zero map.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, T)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if v > T::zero() && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| (i / self.width, i % self.width))
    }

    /// Gray levels scaled so the row maximum maps to 255.
    pub fn to_gray8(&self) -> Vec<u8> {
        let max = self.values.iter().copied().fold(T::zero(), T::max).to_f64_lossy();
        self.values
            .iter()
            .map(|v| if max > 0.0 { (v.to_f64_lossy() / max * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 })
            .collect()
    }
}

/// Row of `attention` for source pixel `(row, col)`, reshaped to the reference grid.
pub fn attention_row<T: Real>(attention: &AttentionMatrix<T>, pixel: (usize, usize)) -> Result<HeatMap<T>> {
    let index = pixel_index(attention.source_dims, pixel)?;
    let (height, width) = attention.reference_dims;
    let mut values = vec![T::zero(); height * width];
    for (j, w) in attention.row(index).entries() {
        values[j] = w;
    }
    Ok(HeatMap { height, width, values })
}

fn pixel_index((height, width): (usize, usize), (row, col): (usize, usize)) -> Result<usize> {
    if row >= height || col >= width {
        return Err(Error::PixelOutOfBounds { row, col, height, width });
    }
    Ok(row * width + col)
}

/// JSON export of one row: `{"pixel":[r,c],"entries":[[r',c',w],...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    pub pixel: [usize; 2],
    pub region: Region,
    pub status: RowStatus,
    pub entries: Vec<(usize, usize, f64)>,
}

pub fn sparse_row<T: Real>(attention: &AttentionMatrix<T>, pixel: (usize, usize)) -> Result<SparseRow> {
    let index = pixel_index(attention.source_dims, pixel)?;
    let width = attention.reference_dims.1;
    let row = attention.row(index);
    Ok(SparseRow {
        pixel: [pixel.0, pixel.1],
        region: row.region,
        status: attention.row_status(index),
        entries: row.entries().map(|(j, w)| (j / width, j % width, w.to_f64_lossy())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amm::dense::dense_attention;
    use crate::amm::field::FieldMode;
    use crate::amm::position::rel_pos_features;
    use crate::face::{LandmarkSet, WorkingGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Side {
        features: FeatureGrid<f64>,
        positions: RelPosField<f64>,
        parsing: ParsingMap,
    }

    impl Side {
        fn view(&self) -> AttentionSide<'_, f64> {
            AttentionSide::new(&self.features, &self.positions, &self.parsing).unwrap()
        }
    }

    fn random_side(rng: &mut ChaCha8Rng, side: usize, labels: Vec<Region>) -> Side {
        let grid = WorkingGrid::square(side).unwrap();
        let f = side as f64;
        let pts: Vec<[f64; 2]> = (0..68).map(|_| [rng.gen_range(0.0..f), rng.gen_range(0.0..f)]).collect();
        let positions = rel_pos_features(&LandmarkSet::new(pts).unwrap(), grid);
        let data: Vec<f64> = (0..3 * side * side).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let features = FeatureGrid::new(3, side, side, data).unwrap();
        Side { features, positions, parsing: ParsingMap::new(side, side, labels).unwrap() }
    }

    fn random_labels(rng: &mut ChaCha8Rng) -> Vec<Region> {
        (0..256)
            .map(|_| match rng.gen_range(0..4) {
                0 => Region::Background,
                1 => Region::Skin,
                2 => Region::Lip,
                _ => Region::Eyes,
            })
            .collect()
    }

    #[test]
    fn singleton_region_row_is_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut src_labels = vec![Region::Skin; 256];
        src_labels[40] = Region::Lip;
        let mut ref_labels = vec![Region::Skin; 256];
        ref_labels[77] = Region::Lip;
        let s = random_side(&mut rng, 16, src_labels);
        let r = random_side(&mut rng, 16, ref_labels);
        let a = attentive_matrix(&s.view(), &r.view(), 0.01).unwrap();
        let row: Vec<_> = a.row(40).entries().collect();
        assert_eq!(row, vec![(77, 1.0)]);
        let map = attention_row(&a, (2, 8)).unwrap();
        assert_eq!(map.argmax(), Some((4, 13)));
        assert_eq!(map.sum(), 1.0);
    }

    #[test]
    fn identical_candidates_split_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ls = vec![Region::Skin; 256];
        ls[9 * 16 + 3] = Region::Lip;
        let s = random_side(&mut rng, 16, ls);
        let mut lr = vec![Region::Skin; 256];
        // with every anchor at (4, 4), pixels (x6, y4) and (x8, y4) share p/|p|
        let (a_idx, b_idx) = (4 * 16 + 6, 4 * 16 + 8);
        lr[a_idx] = Region::Lip;
        lr[b_idx] = Region::Lip;
        let mut r = random_side(&mut rng, 16, lr);
        r.positions = rel_pos_features(&LandmarkSet::new(vec![[4.0, 4.0]; 68]).unwrap(), WorkingGrid::square(16).unwrap());
        for c in 0..3 {
            r.features.set(c, b_idx, r.features.at(c, a_idx));
        }
        let a = attentive_matrix(&s.view(), &r.view(), 0.01).unwrap();
        let row: Vec<_> = a.row(9 * 16 + 3).entries().collect();
        assert_eq!(row.len(), 2);
        assert!((row[0].1 - 0.5).abs() < 1e-12 && (row[1].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sparse_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let (ls, lr) = (random_labels(&mut rng), random_labels(&mut rng));
            let s = random_side(&mut rng, 16, ls);
            let r = random_side(&mut rng, 16, lr);
            let a = attentive_matrix(&s.view(), &r.view(), 0.01).unwrap();
            let dense = dense_attention(&s.view(), &r.view(), 0.01).unwrap();
            for (sparse_row, dense_row) in a.to_dense().iter().zip(&dense) {
                for (x, y) in sparse_row.iter().zip(dense_row) {
                    assert!((x - y).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn region_mismatch_has_no_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (ls, lr) = (random_labels(&mut rng), random_labels(&mut rng));
        let s = random_side(&mut rng, 16, ls);
        let r = random_side(&mut rng, 16, lr);
        let a = attentive_matrix(&s.view(), &r.view(), 0.01).unwrap();
        for i in 0..256 {
            let row = a.row(i);
            for (j, _) in row.entries() {
                assert_eq!(r.parsing.labels()[j], s.parsing.labels()[i]);
            }
            match s.parsing.labels()[i] {
                Region::Background => assert_eq!(a.row_status(i), RowStatus::Background),
                _ => assert!((row.sum() - 1.0).abs() < 1e-6),
            }
        }
    }

    #[test]
    fn unmatched_region_row_is_empty_and_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ls = vec![Region::Skin; 256];
        ls[0] = Region::Eyes;
        let s = random_side(&mut rng, 16, ls);
        let r = random_side(&mut rng, 16, vec![Region::Skin; 256]);
        let a = attentive_matrix(&s.view(), &r.view(), 0.01).unwrap();
        assert_eq!(a.row_status(0), RowStatus::Unmatched);
        assert!(a.coverage() < 1.0);
        let field = MakeupField::new(FieldMode::Broadcast, 1, 16, 16, vec![2.0; 256], vec![0.5; 256]).unwrap();
        let m = morph_field(&a, &field).unwrap();
        assert_eq!((m.gamma_at(0, 0), m.beta_at(0, 0)), (1.0, 0.0));
        assert!((m.gamma_at(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn negative_weight_and_mismatched_dims_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_side(&mut rng, 16, vec![Region::Skin; 256]);
        let r = random_side(&mut rng, 16, vec![Region::Skin; 256]);
        assert!(matches!(attentive_matrix(&s.view(), &r.view(), -0.1), Err(Error::InvalidWeight(_))));
        let feats = FeatureGrid::<f64>::zeros(2, 16, 16);
        let bad = AttentionSide::new(&feats, &r.positions, &r.parsing).unwrap();
        assert!(attentive_matrix(&s.view(), &bad, 0.01).is_err());
    }

    #[test]
    fn morph_with_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // every pixel its own region is impossible with 3 labels, so use a 3-pixel
        // face: one skin, one lip, one eye on each side
        let mut ls = vec![Region::Background; 256];
        let mut lr = vec![Region::Background; 256];
        let (src, dst) = ([3usize, 50, 100], [200usize, 7, 31]);
        for (k, r) in Region::FACE.iter().enumerate() {
            ls[src[k]] = *r;
            lr[dst[k]] = *r;
        }
        let s = random_side(&mut rng, 16, ls);
        let r = random_side(&mut rng, 16, lr);
        let a = attentive_matrix(&s.view(), &r.view(), 0.01).unwrap();
        let gamma: Vec<f64> = (0..256).map(|i| 1.0 + i as f64).collect();
        let beta: Vec<f64> = (0..256).map(|i| -(i as f64)).collect();
        let field = MakeupField::new(FieldMode::Broadcast, 1, 16, 16, gamma.clone(), beta.clone()).unwrap();
        let m = morph_field(&a, &field).unwrap();
        for k in 0..3 {
            assert_eq!(m.gamma_at(0, src[k]), gamma[dst[k]]);
            assert_eq!(m.beta_at(0, src[k]), beta[dst[k]]);
        }
    }

    #[test]
    fn heat_map_out_of_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_side(&mut rng, 16, vec![Region::Skin; 256]);
        let a = attentive_matrix(&s.view(), &s.view(), 0.0).unwrap();
        assert!(matches!(attention_row(&a, (16, 0)), Err(Error::PixelOutOfBounds { .. })));
    }

    #[test]
    fn gray_map_of_empty_row_is_black() {
        let map = HeatMap::<f64> { height: 2, width: 2, values: vec![0.0; 4] };
        assert_eq!(map.to_gray8(), vec![0; 4]);
        assert_eq!(map.argmax(), None);
    }
}
