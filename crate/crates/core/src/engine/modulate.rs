//! Affine-free normalization of source features and the scale/shift modulation.

use crate::amm::{FeatureGrid, FieldMode, MakeupField};
use crate::error::{Error, Result};
use crate::face::{Image, ParsingMap, Region};
use crate::scalar::Real;

use super::distill::mean_std;

/// Lower bound on the normalization standard deviation.
pub const NORM_STD_MIN: f64 = 1e-3;

/// Per-region, per-channel mean and standard deviation of the source.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<T> {
    mode: FieldMode,
    /// `[region label][channel] -> (mean, std)`; `None` for absent regions.
    stats: [Option<[(T, T); 3]>; 4],
}

impl<T: Real> NormStats<T> {
    pub fn get(&self, region: Region, channel: usize) -> Option<(T, T)> {
        self.stats[region.label() as usize].map(|s| s[channel])
    }

    pub fn mode(&self) -> FieldMode {
        self.mode
    }
}

/// Standardizes each face region of a working image (per channel, or pooled
/// over channels in broadcast mode). Background cells become zero.
pub fn normalize_working<T: Real>(
    lab: &Image<T>,
    parsing: &ParsingMap,
    mode: FieldMode,
) -> Result<(FeatureGrid<T>, NormStats<T>)> {
    parsing.ensure_face()?;
    if (lab.width(), lab.height()) != (parsing.width(), parsing.height()) {
        return Err(Error::mismatch("normalize parsing", (lab.width(), lab.height()), (parsing.width(), parsing.height())));
    }
    let n = lab.width() * lab.height();
    let std_min = T::lit(NORM_STD_MIN);
    let mut stats: [Option<[(T, T); 3]>; 4] = [None; 4];
    for region in Region::FACE {
        let members: Vec<usize> = (0..n).filter(|&i| parsing.labels()[i] == region).collect();
        if members.is_empty() {
            continue;
        }
        let per = match mode {
            FieldMode::PerChannel => std::array::from_fn(|c| {
                let (m, s) = mean_std(members.iter().map(|&i| lab.pixel_at(i)[c]));
                (m, s.max(std_min))
            }),
            FieldMode::Broadcast => {
                let (m, s) = mean_std(members.iter().flat_map(|&i| lab.pixel_at(i)));
                [(m, s.max(std_min)); 3]
            }
        };
        stats[region.label() as usize] = Some(per);
    }
    let mut features = FeatureGrid::zeros(3, lab.height(), lab.width());
    for i in 0..n {
        if let Some(s) = stats[parsing.labels()[i].label() as usize] {
            let p = lab.pixel_at(i);
            for c in 0..3 {
                features.set(c, i, (p[c] - s[c].0) / s[c].1);
            }
        }
    }
    Ok((features, NormStats { mode, stats }))
}

/// Inverse of [`normalize_working`] on face cells; background cells pass through.
pub fn denormalize<T: Real>(features: &FeatureGrid<T>, stats: &NormStats<T>, parsing: &ParsingMap) -> Result<FeatureGrid<T>> {
    check_grid(features, parsing)?;
    let mut out = features.clone();
    for (i, &region) in parsing.labels().iter().enumerate() {
        if let Some(s) = stats.stats[region.label() as usize] {
            for c in 0..features.channels().min(3) {
                out.set(c, i, features.at(c, i) * s[c].1 + s[c].0);
            }
        }
    }
    Ok(out)
}

fn check_grid<T: Real>(features: &FeatureGrid<T>, parsing: &ParsingMap) -> Result<()> {
    if (features.height(), features.width()) != (parsing.height(), parsing.width()) {
        return Err(Error::mismatch(
            "feature grid vs parsing",
            (parsing.height(), parsing.width()),
            (features.height(), features.width()),
        ));
    }
    Ok(())
}

/// Re-expresses an absolute field (defined over `labels`) in the source's
/// normalized units: `gamma / std`, `(beta - mean) / std`, using the source
/// statistics of each cell's region. Cells whose region the source lacks keep
/// the identity values.
pub fn rebase_field<T: Real>(field: &MakeupField<T>, labels: &ParsingMap, stats: &NormStats<T>) -> Result<MakeupField<T>> {
    if (field.height(), field.width()) != (labels.height(), labels.width()) {
        return Err(Error::mismatch("field vs parsing", (labels.height(), labels.width()), (field.height(), field.width())));
    }
    if field.mode() != stats.mode {
        return Err(Error::mismatch("field mode vs normalization mode", stats.mode, field.mode()));
    }
    let n = field.plane_len();
    let mut out = MakeupField::identity(field.mode(), field.channels(), field.height(), field.width());
    for (i, &region) in labels.labels().iter().enumerate() {
        let Some(s) = stats.stats[region.label() as usize] else { continue };
        for c in 0..field.channels() {
            let (mean, std) = s[c];
            out.gamma_mut()[c * n + i] = field.gamma_at(c, i) / std;
            out.beta_mut()[c * n + i] = (field.beta_at(c, i) - mean) / std;
        }
    }
    Ok(out)
}

/// `V' = Gamma * V + B`, elementwise. The field must already be per-channel
/// with the feature grid's channel count.
pub fn apply_makeup<T: Real>(features: &FeatureGrid<T>, field: &MakeupField<T>) -> Result<FeatureGrid<T>> {
    if field.mode() != FieldMode::PerChannel
        || field.channels() != features.channels()
        || (field.height(), field.width()) != (features.height(), features.width())
    {
        return Err(Error::mismatch(
            "apply_makeup field",
            format!("PerChannel {}x{}x{}", features.channels(), features.height(), features.width()),
            field.shape_string(),
        ));
    }
    let data = features
        .data()
        .iter()
        .zip(field.gamma().iter().zip(field.beta()))
        .map(|(&v, (&g, &b))| g * v + b)
        .collect();
    FeatureGrid::new(features.channels(), features.height(), features.width(), data)
}
