//! Region-wise histogram matching: the pseudo ground truth for makeup.

use crate::error::{Error, Result};
use crate::face::{ColorSpace, FaceBundle, Image, Region};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct HistMatch<T> {
    pub image: Image<T>,
    /// Regions present in `x` but absent from `y`; copied from `x` unchanged.
    pub fallback_regions: Vec<Region>,
}

/// Index into a sorted target of length `m` for rank `k` out of `n`.
#[inline]
pub fn quantile_index(k: usize, n: usize, m: usize) -> usize {
    (((2 * k + 1) * m) / (2 * n)).min(m - 1)
}

/// Remaps `x` so that each face region and channel takes on `y`'s value
/// distribution for that region, by sorted rank. Ties are broken by pixel
/// index. Background is copied from `x`.
pub fn histogram_match<T: Real>(x: &FaceBundle<T>, y: &FaceBundle<T>) -> Result<HistMatch<T>> {
    let src = x.image().to_colorspace(ColorSpace::LinearRgb);
    let tgt = y.image().to_colorspace(ColorSpace::LinearRgb);
    let mut out = src.clone();
    let mut fallback_regions = Vec::new();
    for region in Region::FACE {
        let members: Vec<usize> = indices(x.parsing().labels(), region);
        if members.is_empty() {
            continue;
        }
        let targets: Vec<usize> = indices(y.parsing().labels(), region);
        if targets.is_empty() {
            fallback_regions.push(region);
            continue;
        }
        for c in 0..3 {
            let mut order = members.clone();
            order.sort_by(|&a, &b| src.pixel_at(a)[c].partial_cmp(&src.pixel_at(b)[c]).expect("finite samples").then(a.cmp(&b)));
            let mut values: Vec<T> = targets.iter().map(|&j| tgt.pixel_at(j)[c]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
            let (n, m) = (order.len(), values.len());
            for (k, &i) in order.iter().enumerate() {
                let mut p = out.pixel_at(i);
                p[c] = values[quantile_index(k, n, m)];
                out.set_pixel_at(i, p);
            }
        }
    }
    Ok(HistMatch { image: out, fallback_regions })
}

fn indices(labels: &[Region], region: Region) -> Vec<usize> {
    labels.iter().enumerate().filter(|(_, &r)| r == region).map(|(i, _)| i).collect()
}

/// Region-wise matching for raw value lists, used by the quantile oracle in tests and the CLI.
pub fn match_values<T: Real>(x: &[T], y: &[T]) -> Result<Vec<T>> {
    if y.is_empty() {
        return Err(Error::InvalidRequest("empty target distribution".into()));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite samples").then(a.cmp(&b)));
    let mut values = y.to_vec();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mut out = vec![T::zero(); x.len()];
    for (k, &i) in order.iter().enumerate() {
        out[i] = values[quantile_index(k, x.len(), values.len())];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_face, SynthParams};

    #[test]
    fn four_pixel_example() {
        let out = match_values(&[0.1, 0.4, 0.2, 0.3], &[0.5, 0.6, 0.7, 0.8]).unwrap();
        assert_eq!(out, vec![0.5, 0.8, 0.6, 0.7]);
    }

    #[test]
    fn ties_follow_pixel_order() {
        assert_eq!(match_values(&[0.3, 0.3, 0.3], &[0.1, 0.2, 0.9]).unwrap(), vec![0.1, 0.2, 0.9]);
    }

    #[test]
    fn constant_target() {
        assert_eq!(match_values(&[0.9, 0.1, 0.5], &[0.25; 7]).unwrap(), vec![0.25; 3]);
    }

    #[test]
    fn quantile_index_spans_target() {
        assert_eq!(quantile_index(0, 4, 4), 0);
        assert_eq!(quantile_index(3, 4, 4), 3);
        assert_eq!(quantile_index(0, 2, 10), 2);
        assert_eq!(quantile_index(1, 2, 10), 7);
        assert_eq!(quantile_index(5, 6, 1), 0);
    }

    #[test]
    fn self_match_is_identity() {
        let b: FaceBundle<f64> = synth_face(5, &SynthParams::default()).unwrap();
        let hm = histogram_match(&b, &b).unwrap();
        assert_eq!(hm.image, *b.image());
        assert!(hm.fallback_regions.is_empty());
    }

    #[test]
    fn missing_region_falls_back() {
        let x: FaceBundle<f64> = synth_face(5, &SynthParams::default()).unwrap();
        let closed = SynthParams { eye_open: 0.0, ..Default::default() };
        let y: FaceBundle<f64> = synth_face(6, &closed).unwrap();
        let hm = histogram_match(&x, &y).unwrap();
        assert_eq!(hm.fallback_regions, vec![Region::Eyes]);
        for i in indices(x.parsing().labels(), Region::Eyes) {
            assert_eq!(hm.image.pixel_at(i), x.image().pixel_at(i));
        }
    }
}
