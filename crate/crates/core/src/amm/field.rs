use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Channel-major `C x H x W` grid of per-pixel feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> FeatureGrid<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::mismatch("feature channels", ">= 1", 0));
        }
        if data.len() != channels * height * width {
            return Err(Error::mismatch("feature data", channels * height * width, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature grid"));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels: channels.max(1), height, width, data: vec![T::zero(); channels.max(1) * height * width] }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn at(&self, channel: usize, index: usize) -> T {
        self.data[channel * self.plane_len() + index]
    }

    #[inline]
    pub(crate) fn set(&mut self, channel: usize, index: usize, value: T) {
        let n = self.plane_len();
        self.data[channel * n + index] = value;
    }

    pub fn plane(&self, channel: usize) -> &[T] {
        let n = self.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    /// Same shape, every value zero.
    pub fn zeroed(&self) -> Self {
        Self::zeros(self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FieldMode {
    /// One scale/shift plane shared by every channel.
    Broadcast,
    /// One scale/shift plane per channel.
    #[default]
    PerChannel,
}

impl std::str::FromStr for FieldMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "broadcast" => Ok(FieldMode::Broadcast),
            "per-channel" | "per_channel" => Ok(FieldMode::PerChannel),
            other => Err(Error::InvalidRequest(format!("unknown field mode '{other}'"))),
        }
    }
}

/// Spatial scale (`gamma`) and shift (`beta`) fields, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MakeupField<T> {
    mode: FieldMode,
    channels: usize,
    height: usize,
    width: usize,
    gamma: Vec<T>,
    beta: Vec<T>,
}

impl<T: Real> MakeupField<T> {
    pub fn new(mode: FieldMode, channels: usize, height: usize, width: usize, gamma: Vec<T>, beta: Vec<T>) -> Result<Self> {
        if mode == FieldMode::Broadcast && channels != 1 {
            return Err(Error::mismatch("broadcast field channels", 1, channels));
        }
        if channels == 0 {
            return Err(Error::mismatch("field channels", ">= 1", 0));
        }
        let n = channels * height * width;
        if gamma.len() != n || beta.len() != n {
            return Err(Error::mismatch("field data", n, (gamma.len(), beta.len())));
        }
        if gamma.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("makeup field"));
        }
        Ok(Self { mode, channels, height, width, gamma, beta })
    }

    /// Field that leaves features untouched: gamma = 1, beta = 0.
    pub fn identity(mode: FieldMode, channels: usize, height: usize, width: usize) -> Self {
        let channels = if mode == FieldMode::Broadcast { 1 } else { channels };
        let n = channels * height * width;
        Self { mode, channels, height, width, gamma: vec![T::one(); n], beta: vec![T::zero(); n] }
    }

    pub fn mode(&self) -> FieldMode {
        self.mode
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    #[inline]
    pub fn gamma_at(&self, channel: usize, index: usize) -> T {
        self.gamma[channel * self.plane_len() + index]
    }

    #[inline]
    pub fn beta_at(&self, channel: usize, index: usize) -> T {
        self.beta[channel * self.plane_len() + index]
    }

    pub fn gamma_plane(&self, channel: usize) -> &[T] {
        let n = self.plane_len();
        &self.gamma[channel * n..(channel + 1) * n]
    }

    pub fn beta_plane(&self, channel: usize) -> &[T] {
        let n = self.plane_len();
        &self.beta[channel * n..(channel + 1) * n]
    }

    pub(crate) fn gamma_mut(&mut self) -> &mut [T] {
        &mut self.gamma
    }

    pub(crate) fn beta_mut(&mut self) -> &mut [T] {
        &mut self.beta
    }

    pub fn same_shape(&self, other: &MakeupField<T>) -> bool {
        (self.mode, self.channels, self.height, self.width) == (other.mode, other.channels, other.height, other.width)
    }

    pub(crate) fn shape_string(&self) -> String {
        format!("{:?} {}x{}x{}", self.mode, self.channels, self.height, self.width)
    }
}

/// Replicates a broadcast field across `channels`; per-channel fields pass through.
pub fn expand_field<T: Real>(field: &MakeupField<T>, channels: usize) -> MakeupField<T> {
    match field.mode {
        FieldMode::PerChannel => field.clone(),
        FieldMode::Broadcast => {
            let replicate = |plane: &[T]| plane.iter().copied().cycle().take(plane.len() * channels).collect::<Vec<T>>();
            MakeupField {
                mode: FieldMode::PerChannel,
                channels,
                height: field.height,
                width: field.width,
                gamma: replicate(&field.gamma),
                beta: replicate(&field.beta),
            }
        }
    }
}
