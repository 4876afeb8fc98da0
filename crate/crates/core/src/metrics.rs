//! Evaluation metrics for transfers.

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, TransferParams, TransferRequest};
use crate::error::{Error, Result};
use crate::face::{ColorSpace, FaceBundle, Image, ParsingMap, Region};
use crate::scalar::Real;

/// Mean squared error per face region (over pixels and channels); `None` for absent regions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionMse {
    pub skin: Option<f64>,
    pub lip: Option<f64>,
    pub eyes: Option<f64>,
}

impl RegionMse {
    pub fn get(&self, region: Region) -> Option<f64> {
        match region {
            Region::Skin => self.skin,
            Region::Lip => self.lip,
            Region::Eyes => self.eyes,
            Region::Background => None,
        }
    }
}

fn check_dims<T: Real>(a: &Image<T>, b: &Image<T>, parsing: &ParsingMap) -> Result<()> {
    let dims = (a.width(), a.height());
    if dims != (b.width(), b.height()) || dims != (parsing.width(), parsing.height()) {
        return Err(Error::mismatch("metric inputs", dims, ((b.width(), b.height()), (parsing.width(), parsing.height()))));
    }
    Ok(())
}

pub fn makeup_distance<T: Real>(a: &Image<T>, b: &Image<T>, parsing: &ParsingMap) -> Result<RegionMse> {
    check_dims(a, b, parsing)?;
    let (a, b) = (a.to_colorspace(ColorSpace::LinearRgb), b.to_colorspace(ColorSpace::LinearRgb));
    let mse = |region: Region| {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, _) in parsing.labels().iter().enumerate().filter(|(_, &r)| r == region) {
            let (p, q) = (a.pixel_at(i), b.pixel_at(i));
            for c in 0..3 {
                sum += (p[c] - q[c]).to_f64_lossy().powi(2);
            }
            count += 3;
        }
        (count > 0).then(|| sum / count as f64)
    };
    Ok(RegionMse { skin: mse(Region::Skin), lip: mse(Region::Lip), eyes: mse(Region::Eyes) })
}

/// Per-channel mean absolute difference over pixels where `mask` holds (all pixels when `None`).
pub fn mean_abs_diff<T: Real>(a: &Image<T>, b: &Image<T>, mask: Option<&[bool]>) -> Result<[f64; 3]> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::mismatch("mean_abs_diff", (a.width(), a.height()), (b.width(), b.height())));
    }
    let (a, b) = (a.to_colorspace(ColorSpace::LinearRgb), b.to_colorspace(ColorSpace::LinearRgb));
    let n = a.width() * a.height();
    if mask.is_some_and(|m| m.len() != n) {
        return Err(Error::mismatch("mean_abs_diff mask", n, mask.map_or(0, <[bool]>::len)));
    }
    let mut sum = [0.0; 3];
    let mut count = 0usize;
    for i in (0..n).filter(|&i| mask.is_none_or(|m| m[i])) {
        let (p, q) = (a.pixel_at(i), b.pixel_at(i));
        for c in 0..3 {
            sum[c] += (p[c] - q[c]).to_f64_lossy().abs();
        }
        count += 1;
    }
    let count = count.max(1) as f64;
    Ok(sum.map(|s| s / count))
}

/// Per-channel mean over pixels of one region.
pub fn region_mean<T: Real>(image: &Image<T>, parsing: &ParsingMap, region: Region) -> Option<[f64; 3]> {
    let image = image.to_colorspace(ColorSpace::LinearRgb);
    let mut sum = [0.0; 3];
    let mut count = 0usize;
    for (i, _) in parsing.labels().iter().enumerate().filter(|(_, &r)| r == region) {
        let p = image.pixel_at(i);
        for c in 0..3 {
            sum[c] += p[c].to_f64_lossy();
        }
        count += 1;
    }
    (count > 0).then(|| sum.map(|s| s / count as f64))
}

/// Round-trip error: transfer `y`'s makeup onto `x`, transfer `x` back onto the
/// result (same landmarks and parsing, geometry is untouched), and report the
/// mean absolute difference to `x` over face pixels and channels.
pub fn cycle_metric<T: Real>(engine: &Engine, x: &FaceBundle<T>, y: &FaceBundle<T>, params: &TransferParams) -> Result<f64> {
    let forward = engine.transfer(&TransferRequest::new(x.clone(), vec![y.clone()], *params)?)?;
    let made_up = x.with_image(forward.output)?;
    let back = engine.transfer(&TransferRequest::new(made_up, vec![x.clone()], *params)?)?;
    let face = x.parsing().mask(crate::face::RegionSet::ALL);
    let per_channel = mean_abs_diff(&back.output, x.image(), Some(&face))?;
    Ok(per_channel.iter().sum::<f64>() / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_face, SynthParams};

    #[test]
    fn distance_zero_for_equal_images() {
        let b: FaceBundle<f64> = synth_face(1, &SynthParams { size: 64, ..Default::default() }).unwrap();
        let d = makeup_distance(b.image(), b.image(), b.parsing()).unwrap();
        assert_eq!(d, RegionMse { skin: Some(0.0), lip: Some(0.0), eyes: Some(0.0) });
    }

    #[test]
    fn lip_offset_shows_only_on_lip() {
        let b: FaceBundle<f64> = synth_face(1, &SynthParams { size: 64, ..Default::default() }).unwrap();
        let dark = Image::filled(64, 64, [0.2, 0.2, 0.2]).unwrap();
        let b = b.with_image(dark.clone()).unwrap();
        let mut data = dark.data().to_vec();
        for (i, &r) in b.parsing().labels().iter().enumerate() {
            if r == Region::Lip {
                for c in 0..3 {
                    data[3 * i + c] += 0.1;
                }
            }
        }
        let shifted = Image::new(64, 64, data, ColorSpace::LinearRgb).unwrap();
        let d = makeup_distance(&shifted, b.image(), b.parsing()).unwrap();
        assert!((d.lip.unwrap() - 0.01).abs() < 1e-12);
        assert_eq!((d.skin, d.eyes), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn mean_abs_with_mask() {
        let a = Image::filled(8, 8, [0.5, 0.5, 0.5]).unwrap();
        let b = Image::filled(8, 8, [0.25, 0.5, 0.75]).unwrap();
        assert_eq!(mean_abs_diff(&a, &b, None).unwrap(), [0.25, 0.0, 0.25]);
        let mask = vec![false; 64];
        assert_eq!(mean_abs_diff(&a, &b, Some(&mask)).unwrap(), [0.0; 3]);
    }
}
