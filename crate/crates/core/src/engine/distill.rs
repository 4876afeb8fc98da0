//! Statistics-based stand-in for the makeup distillation network.

use serde::{Deserialize, Serialize};

use crate::amm::{FeatureGrid, FieldMode, MakeupField};
use crate::error::{Error, Result};
use crate::face::{ColorSpace, Image, ParsingMap};
use crate::scalar::{Real, RunningMean};

/// Lower bound on gamma inside face regions.
pub const GAMMA_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    /// Radius of the square statistics window, in working cells.
    pub window: usize,
    pub mode: FieldMode,
    /// Gaussian sigma (cells) of the blur applied to attention features.
    pub feature_sigma: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self { window: 2, mode: FieldMode::PerChannel, feature_sigma: 1.0 }
    }
}

/// Region-masked local mean (beta) and standard deviation (gamma) of a
/// working-resolution image, plus standardized blurred attention features.
///
/// Background cells get gamma = 1, beta = 0. In broadcast mode the window
/// statistics pool all three channels.
pub fn distill_working<T: Real>(
    lab: &Image<T>,
    parsing: &ParsingMap,
    config: &DistillConfig,
) -> Result<(MakeupField<T>, FeatureGrid<T>)> {
    if config.window < 1 {
        return Err(Error::InvalidWindow(config.window));
    }
    if (lab.width(), lab.height()) != (parsing.width(), parsing.height()) {
        return Err(Error::mismatch("distill parsing", (lab.width(), lab.height()), (parsing.width(), parsing.height())));
    }
    debug_assert_eq!(lab.colorspace(), ColorSpace::DecorrelatedLab);
    let (w, h) = (lab.width(), lab.height());
    let n = w * h;
    let r = config.window;
    let planes = match config.mode {
        FieldMode::PerChannel => 3,
        FieldMode::Broadcast => 1,
    };
    let mut gamma = vec![T::one(); planes * n];
    let mut beta = vec![T::zero(); planes * n];
    let gamma_min = T::lit(GAMMA_MIN);
    let mut samples: Vec<[T; 3]> = Vec::with_capacity((2 * r + 1).pow(2));
    for y in 0..h {
        for x in 0..w {
            let region = parsing.at(x, y);
            if !region.is_face() {
                continue;
            }
            samples.clear();
            for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    if parsing.at(xx, yy) == region {
                        samples.push(lab.pixel(xx, yy));
                    }
                }
            }
            let i = y * w + x;
            match config.mode {
                FieldMode::PerChannel => {
                    for c in 0..3 {
                        let (mean, std) = mean_std(samples.iter().map(|s| s[c]));
                        beta[c * n + i] = mean;
                        gamma[c * n + i] = std.max(gamma_min);
                    }
                }
                FieldMode::Broadcast => {
                    let (mean, std) = mean_std(samples.iter().flatten().copied());
                    beta[i] = mean;
                    gamma[i] = std.max(gamma_min);
                }
            }
        }
    }
    let field = MakeupField::new(config.mode, planes, h, w, gamma, beta)?;
    let features = attention_features(lab, parsing, config.feature_sigma)?;
    Ok((field, features))
}

/// Two-pass population mean and standard deviation (exact for constant input).
pub(crate) fn mean_std<T: Real>(values: impl Iterator<Item = T> + Clone) -> (T, T) {
    let mut acc = RunningMean::new();
    for v in values.clone() {
        acc.push(v);
    }
    if acc.count == 0 {
        return (T::zero(), T::zero());
    }
    let n = T::lit(acc.count as f64);
    let mean = acc.mean;
    let var = values.map(|v| (v - mean) * (v - mean)).fold(T::zero(), |a, b| a + b) / n;
    (mean, var.sqrt())
}

/// Gaussian-blurred color channels, standardized per channel over face cells;
/// background cells are zero.
pub fn attention_features<T: Real>(lab: &Image<T>, parsing: &ParsingMap, sigma: f64) -> Result<FeatureGrid<T>> {
    let (w, h) = (lab.width(), lab.height());
    let n = w * h;
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let mut out = FeatureGrid::zeros(3, h, w);
    for c in 0..3 {
        let plane: Vec<f64> = (0..n).map(|i| lab.pixel_at(i)[c].to_f64_lossy()).collect();
        let blurred = blur_separable(&plane, w, h, &kernel, radius);
        let face: Vec<f64> = (0..n).filter(|&i| parsing.labels()[i].is_face()).map(|i| blurred[i]).collect();
        let (mean, std) = mean_std(face.iter().copied());
        let scale = if std > 1e-9 { 1.0 / std } else { 0.0 };
        for i in 0..n {
            if parsing.labels()[i].is_face() {
                out.set(c, i, T::lit((blurred[i] - mean) * scale));
            }
        }
    }
    Ok(out)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (2.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn blur_separable(plane: &[f64], w: usize, h: usize, kernel: &[f64], radius: usize) -> Vec<f64> {
    let clampi = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * plane[y * w + clampi(x as i64 + k as i64 - radius as i64, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * tmp[clampi(y as i64 + k as i64 - radius as i64, h) * w + x])
                .sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face::Region;

    fn lab_image(w: usize, h: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Image<f64> {
        let data = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).flat_map(|(x, y)| f(x, y)).collect();
        Image::new(w, h, data, ColorSpace::DecorrelatedLab).unwrap()
    }

    #[test]
    fn constant_region_has_min_gamma() {
        let img = lab_image(16, 16, |_, _| [0.4, 0.6, 0.3]);
        let parsing = ParsingMap::filled(16, 16, Region::Lip);
        let (field, _) = distill_working(&img, &parsing, &DistillConfig::default()).unwrap();
        for c in 0..3 {
            for i in 0..256 {
                assert!((field.beta_at(c, i) - [0.4, 0.6, 0.3][c]).abs() < 1e-12);
                assert_eq!(field.gamma_at(c, i), GAMMA_MIN);
            }
        }
    }

    #[test]
    fn checkerboard_with_full_window() {
        let (a, b) = (0.2, 0.7);
        let img = lab_image(16, 16, |x, y| if (x + y) % 2 == 0 { [a; 3] } else { [b; 3] });
        let parsing = ParsingMap::filled(16, 16, Region::Skin);
        let cfg = DistillConfig { window: 16, ..DistillConfig::default() };
        let (field, _) = distill_working(&img, &parsing, &cfg).unwrap();
        // oracle: direct mean / population std of the two-valued region
        let values: Vec<f64> = (0..256).map(|i| if (i % 16 + i / 16) % 2 == 0 { a } else { b }).collect();
        let mean = values.iter().sum::<f64>() / 256.0;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 256.0).sqrt();
        assert!((mean - (a + b) / 2.0).abs() < 1e-12 && (std - (b - a).abs() / 2.0).abs() < 1e-12);
        for i in 0..256 {
            assert!((field.beta_at(0, i) - mean).abs() < 1e-12);
            assert!((field.gamma_at(0, i) - std).abs() < 1e-12);
        }
    }

    #[test]
    fn window_is_masked_by_region() {
        // left half lip at 0.2, right half skin at 0.8
        let img = lab_image(16, 16, |x, _| if x < 8 { [0.2; 3] } else { [0.8; 3] });
        let labels = (0..256).map(|i| if i % 16 < 8 { Region::Lip } else { Region::Skin }).collect();
        let parsing = ParsingMap::new(16, 16, labels).unwrap();
        let (field, _) = distill_working(&img, &parsing, &DistillConfig { window: 3, ..Default::default() }).unwrap();
        let border_lip = 5 * 16 + 7;
        assert!((field.beta_at(0, border_lip) - 0.2).abs() < 1e-12);
        assert_eq!(field.gamma_at(0, border_lip), GAMMA_MIN);
    }

    #[test]
    fn broadcast_pools_channels() {
        let img = lab_image(16, 16, |_, _| [0.2, 0.4, 0.6]);
        let parsing = ParsingMap::filled(16, 16, Region::Skin);
        let cfg = DistillConfig { mode: FieldMode::Broadcast, ..Default::default() };
        let (field, _) = distill_working(&img, &parsing, &cfg).unwrap();
        assert_eq!(field.channels(), 1);
        assert!((field.beta_at(0, 0) - 0.4).abs() < 1e-12);
        assert!((field.gamma_at(0, 0) - (0.08f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_window_rejected() {
        let img = lab_image(16, 16, |_, _| [0.5; 3]);
        let parsing = ParsingMap::filled(16, 16, Region::Skin);
        let cfg = DistillConfig { window: 0, ..Default::default() };
        assert!(matches!(distill_working(&img, &parsing, &cfg), Err(Error::InvalidWindow(0))));
    }

    #[test]
    fn features_standardized_on_face() {
        let img = lab_image(16, 16, |x, y| [x as f64 / 16.0, y as f64 / 16.0, 0.5]);
        let labels = (0..256).map(|i| if i < 32 { Region::Background } else { Region::Skin }).collect();
        let parsing = ParsingMap::new(16, 16, labels).unwrap();
        let f = attention_features(&img, &parsing, 1.0).unwrap();
        for c in 0..2 {
            let face: Vec<f64> = (32..256).map(|i| f.at(c, i)).collect();
            let (m, s) = mean_std(face.iter().copied());
            assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
        }
        assert!((0..256).all(|i| f.at(2, i) == 0.0));
        assert!((0..32).all(|i| f.at(0, i) == 0.0));
    }
}
