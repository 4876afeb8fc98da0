//! Canonical face data: images, landmarks, parsing maps and the working grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::color;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of facial landmarks used as anchors.
pub const LANDMARK_COUNT: usize = 68;

/// Minimum accepted image side.
pub const MIN_IMAGE_SIDE: usize = 8;

/// Face-parsing label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Region {
    Background = 0,
    Skin = 1,
    Lip = 2,
    Eyes = 3,
}

impl Region {
    pub const FACE: [Region; 3] = [Region::Skin, Region::Lip, Region::Eyes];

    pub fn from_label(label: u8) -> Result<Self> {
        match label {
            0 => Ok(Region::Background),
            1 => Ok(Region::Skin),
            2 => Ok(Region::Lip),
            3 => Ok(Region::Eyes),
            other => Err(Error::UnknownLabel(other)),
        }
    }

    #[inline]
    pub fn label(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn is_face(self) -> bool {
        self != Region::Background
    }

    /// Tie-break priority for mode pooling: lip > eyes > skin > background.
    #[inline]
    pub(crate) fn pool_priority(self) -> u8 {
        match self {
            Region::Lip => 3,
            Region::Eyes => 2,
            Region::Skin => 1,
            Region::Background => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Background => "background",
            Region::Skin => "skin",
            Region::Lip => "lip",
            Region::Eyes => "eyes",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "skin" => Ok(Region::Skin),
            "lip" | "lips" => Ok(Region::Lip),
            "eyes" | "eye" => Ok(Region::Eyes),
            "background" => Ok(Region::Background),
            other => Err(Error::InvalidRequest(format!("unknown region '{other}'"))),
        }
    }
}

/// A subset of the three face regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RegionSet(u8);

impl RegionSet {
    pub const EMPTY: RegionSet = RegionSet(0);
    pub const ALL: RegionSet = RegionSet(0b1110);

    pub fn only(region: Region) -> Self {
        Self::EMPTY.with(region)
    }

    pub fn with(self, region: Region) -> Self {
        if region.is_face() {
            RegionSet(self.0 | (1 << region.label()))
        } else {
            self
        }
    }

    #[inline]
    pub fn contains(self, region: Region) -> bool {
        self.0 & (1 << region.label()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersection(self, other: RegionSet) -> RegionSet {
        RegionSet(self.0 & other.0)
    }

    pub fn union(self, other: RegionSet) -> RegionSet {
        RegionSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Region> {
        Region::FACE.into_iter().filter(move |r| self.contains(*r))
    }
}

impl FromIterator<Region> for RegionSet {
    fn from_iter<I: IntoIterator<Item = Region>>(iter: I) -> Self {
        iter.into_iter().fold(RegionSet::EMPTY, RegionSet::with)
    }
}

impl fmt::Display for RegionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(Region::name).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for RegionSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(RegionSet::ALL);
        }
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                let r: Region = p.parse()?;
                if r.is_face() {
                    Ok(r)
                } else {
                    Err(Error::InvalidRequest("background is not a selectable region".into()))
                }
            })
            .collect()
    }
}

impl Serialize for RegionSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for RegionSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let regions = Vec::<Region>::deserialize(d)?;
        Ok(regions.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorSpace {
    LinearRgb,
    DecorrelatedLab,
}

/// Three-channel raster, row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    colorspace: ColorSpace,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, data: Vec<T>, colorspace: ColorSpace) -> Result<Self> {
        Self::check_dims(width, height)?;
        if data.len() != width * height * 3 {
            return Err(Error::mismatch("image data", width * height * 3, data.len()));
        }
        for v in &data {
            let f = v.to_f64_lossy();
            if !f.is_finite() {
                return Err(Error::NonFinite("image"));
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::ValueOutOfRange(f));
            }
        }
        Ok(Self { width, height, colorspace, data })
    }

    pub fn filled(width: usize, height: usize, color: [T; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| color).collect();
        Self::new(width, height, data, ColorSpace::LinearRgb)
    }

    /// Builds an image without range validation; callers guarantee the invariant.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<T>, colorspace: ColorSpace) -> Self {
        debug_assert_eq!(data.len(), width * height * 3);
        Self { width, height, colorspace, data }
    }

    fn check_dims(width: usize, height: usize) -> Result<()> {
        if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
            return Err(Error::ImageTooSmall { width, height });
        }
        Ok(())
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::mismatch("rgb8 buffer", width * height * 3, bytes.len()));
        }
        Self::check_dims(width, height)?;
        let scale = T::lit(255.0);
        let data = bytes.iter().map(|&b| T::lit(f64::from(b)) / scale).collect();
        Ok(Self::from_raw(width, height, data, ColorSpace::LinearRgb))
    }

    /// Quantizes to 8 bits, clamping to the unit interval (RGB images only).
    pub fn to_rgb8(&self) -> Vec<u8> {
        let img = self.to_colorspace(ColorSpace::LinearRgb);
        img.data
            .iter()
            .map(|v| (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [T; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn pixel_at(&self, index: usize) -> [T; 3] {
        let i = index * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub(crate) fn set_pixel_at(&mut self, index: usize, value: [T; 3]) {
        self.data[index * 3..index * 3 + 3].copy_from_slice(&value);
    }

    pub fn to_colorspace(&self, target: ColorSpace) -> Image<T> {
        if target == self.colorspace {
            return self.clone();
        }
        let convert: fn([T; 3]) -> [T; 3] = match target {
            ColorSpace::DecorrelatedLab => color::rgb_to_lab,
            ColorSpace::LinearRgb => color::lab_to_rgb,
        };
        let data = self
            .data
            .chunks_exact(3)
            .flat_map(|c| convert([c[0], c[1], c[2]]))
            .collect();
        Image::from_raw(self.width, self.height, data, target)
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> Image<U> {
        Image::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            self.colorspace,
        )
    }
}

/// Ordered set of 68 landmark points `(x, y)` in pixel coordinates (x right, y down).
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet<T> {
    points: Vec<[T; 2]>,
}

impl<T: Real> LandmarkSet<T> {
    pub fn new(points: Vec<[T; 2]>) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::LandmarkCount(points.len()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("landmarks"));
        }
        Ok(Self { points })
    }

    #[inline]
    pub fn points(&self) -> &[[T; 2]] {
        &self.points
    }

    /// Checks every point lies in `[0, width) x [0, height)`.
    pub fn validate_bounds(&self, width: usize, height: usize) -> Result<()> {
        let (w, h) = (T::lit(width as f64), T::lit(height as f64));
        for (index, p) in self.points.iter().enumerate() {
            if p[0] < T::zero() || p[1] < T::zero() || p[0] >= w || p[1] >= h {
                return Err(Error::LandmarkOutOfBounds {
                    index,
                    x: p[0].to_f64_lossy(),
                    y: p[1].to_f64_lossy(),
                    width,
                    height,
                });
            }
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn([T; 2]) -> [T; 2]) -> Self {
        Self { points: self.points.iter().map(|&p| f(p)).collect() }
    }

    pub fn scaled(&self, sx: T, sy: T) -> Self {
        self.map(|[x, y]| [x * sx, y * sy])
    }

    pub fn centroid(&self) -> [T; 2] {
        let n = T::lit(self.points.len() as f64);
        let sx: T = self.points.iter().map(|p| p[0]).sum();
        let sy: T = self.points.iter().map(|p| p[1]).sum();
        [sx / n, sy / n]
    }

    pub fn cast<U: Real>(&self) -> LandmarkSet<U> {
        LandmarkSet {
            points: self
                .points
                .iter()
                .map(|p| [U::lit(p[0].to_f64_lossy()), U::lit(p[1].to_f64_lossy())])
                .collect(),
        }
    }
}

/// Per-pixel region labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsingMap {
    width: usize,
    height: usize,
    labels: Vec<Region>,
}

impl ParsingMap {
    /// Builds a map from region labels; no face-presence check.
    pub fn new(width: usize, height: usize, labels: Vec<Region>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::mismatch("parsing labels", width * height, labels.len()));
        }
        Ok(Self { width, height, labels })
    }

    pub fn from_raw_labels(width: usize, height: usize, raw: &[u8]) -> Result<Self> {
        let labels = raw.iter().map(|&l| Region::from_label(l)).collect::<Result<Vec<_>>>()?;
        Self::new(width, height, labels)
    }

    pub fn filled(width: usize, height: usize, region: Region) -> Self {
        Self { width, height, labels: vec![region; width * height] }
    }

    pub fn ensure_face(&self) -> Result<()> {
        if self.labels.iter().any(|r| r.is_face()) {
            Ok(())
        } else {
            Err(Error::EmptyFace)
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn labels(&self) -> &[Region] {
        &self.labels
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Region {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub(crate) fn set(&mut self, x: usize, y: usize, region: Region) {
        self.labels[y * self.width + x] = region;
    }

    pub fn to_raw_labels(&self) -> Vec<u8> {
        self.labels.iter().map(|r| r.label()).collect()
    }

    pub fn count(&self, region: Region) -> usize {
        self.labels.iter().filter(|&&r| r == region).count()
    }

    pub fn mask(&self, regions: RegionSet) -> Vec<bool> {
        self.labels.iter().map(|&r| regions.contains(r)).collect()
    }

    /// Relabels skin pixels within `radius` (Chebyshev distance) of an eye pixel as eyes.
    pub fn dilate_eyes(&self, radius: usize) -> ParsingMap {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width, self.height);
        let eye: Vec<bool> = self.labels.iter().map(|&r| r == Region::Eyes).collect();
        // separable max filter with a square structuring element
        let mut horiz = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let lo = x.saturating_sub(radius);
                let hi = (x + radius).min(w - 1);
                horiz[y * w + x] = (lo..=hi).any(|xx| eye[y * w + xx]);
            }
        }
        let mut out = self.clone();
        for y in 0..h {
            let lo = y.saturating_sub(radius);
            let hi = (y + radius).min(h - 1);
            for x in 0..w {
                if out.labels[y * w + x] == Region::Skin && (lo..=hi).any(|yy| horiz[yy * w + x]) {
                    out.labels[y * w + x] = Region::Eyes;
                }
            }
        }
        out
    }
}

/// Image, landmarks and parsing map of one face, all at the same resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceBundle<T> {
    image: Image<T>,
    landmarks: LandmarkSet<T>,
    parsing: ParsingMap,
}

impl<T: Real> FaceBundle<T> {
    pub fn new(image: Image<T>, landmarks: LandmarkSet<T>, parsing: ParsingMap) -> Result<Self> {
        if (image.width(), image.height()) != (parsing.width(), parsing.height()) {
            return Err(Error::mismatch(
                "bundle parsing map",
                (image.width(), image.height()),
                (parsing.width(), parsing.height()),
            ));
        }
        landmarks.validate_bounds(image.width(), image.height())?;
        parsing.ensure_face()?;
        Ok(Self { image, landmarks, parsing })
    }

    pub fn image(&self) -> &Image<T> {
        &self.image
    }

    pub fn landmarks(&self) -> &LandmarkSet<T> {
        &self.landmarks
    }

    pub fn parsing(&self) -> &ParsingMap {
        &self.parsing
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Same geometry, different pixels (the image must match in size).
    pub fn with_image(&self, image: Image<T>) -> Result<Self> {
        Self::new(image, self.landmarks.clone(), self.parsing.clone())
    }

    pub fn into_parts(self) -> (Image<T>, LandmarkSet<T>, ParsingMap) {
        (self.image, self.landmarks, self.parsing)
    }

    pub fn cast<U: Real>(&self) -> FaceBundle<U> {
        FaceBundle {
            image: self.image.cast(),
            landmarks: self.landmarks.cast(),
            parsing: self.parsing.clone(),
        }
    }
}

/// Resolution of the processing grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorkingGrid {
    height: usize,
    width: usize,
}

impl Default for WorkingGrid {
    fn default() -> Self {
        Self { height: 64, width: 64 }
    }
}

impl WorkingGrid {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        let ok = |s: usize| s.is_power_of_two() && (16..=256).contains(&s);
        if ok(height) && ok(width) {
            Ok(Self { height, width })
        } else {
            Err(Error::InvalidGrid { height, width })
        }
    }

    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, side)
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
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(sx, sy)` factors mapping input pixel coordinates onto the grid.
    pub fn scale_factors<T: Real>(&self, input_width: usize, input_height: usize) -> (T, T) {
        (
            T::lit(self.width as f64 / input_width as f64),
            T::lit(self.height as f64 / input_height as f64),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_points(n: usize) -> Vec<[f64; 2]> {
        (0..n).map(|i| [i as f64 % 10.0, (i / 10) as f64]).collect()
    }

    #[test]
    fn landmark_count_enforced() {
        assert!(matches!(LandmarkSet::new(square_points(67)), Err(Error::LandmarkCount(67))));
        assert!(LandmarkSet::new(square_points(68)).is_ok());
    }

    #[test]
    fn landmark_bounds() {
        let lm = LandmarkSet::new(square_points(68)).unwrap();
        assert!(lm.validate_bounds(16, 16).is_ok());
        assert!(matches!(lm.validate_bounds(8, 16), Err(Error::LandmarkOutOfBounds { .. })));
    }

    #[test]
    fn unknown_label_rejected() {
        let err = ParsingMap::from_raw_labels(2, 1, &[1, 7]).unwrap_err();
        assert!(err.to_string().contains("unknown label"));
    }

    #[test]
    fn empty_face_rejected() {
        let img = Image::<f64>::filled(8, 8, [0.5; 3]).unwrap();
        let lm = LandmarkSet::new(vec![[1.0, 1.0]; 68]).unwrap();
        let err = FaceBundle::new(img, lm, ParsingMap::filled(8, 8, Region::Background));
        assert!(matches!(err, Err(Error::EmptyFace)));
    }

    #[test]
    fn bundle_dimension_mismatch() {
        let img = Image::<f64>::filled(8, 8, [0.5; 3]).unwrap();
        let lm = LandmarkSet::new(vec![[1.0, 1.0]; 68]).unwrap();
        let err = FaceBundle::new(img, lm, ParsingMap::filled(9, 8, Region::Skin));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn image_rejects_small_and_out_of_range() {
        assert!(matches!(Image::<f64>::filled(7, 8, [0.0; 3]), Err(Error::ImageTooSmall { .. })));
        assert!(matches!(Image::<f64>::filled(8, 8, [1.5, 0.0, 0.0]), Err(Error::ValueOutOfRange(_))));
    }

    #[test]
    fn image_lab_round_trip() {
        let data: Vec<f64> = (0..8 * 8 * 3).map(|i| (i % 17) as f64 / 16.0).collect();
        let img = Image::new(8, 8, data, ColorSpace::LinearRgb).unwrap();
        let back = img.to_colorspace(ColorSpace::DecorrelatedLab).to_colorspace(ColorSpace::LinearRgb);
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(WorkingGrid::new(64, 64).is_ok());
        assert!(WorkingGrid::new(16, 256).is_ok());
        assert!(WorkingGrid::new(8, 64).is_err());
        assert!(WorkingGrid::new(48, 64).is_err());
        assert!(WorkingGrid::new(512, 64).is_err());
    }

    #[test]
    fn region_set_parsing() {
        let s: RegionSet = "lip, eyes".parse().unwrap();
        assert!(s.contains(Region::Lip) && s.contains(Region::Eyes) && !s.contains(Region::Skin));
        assert_eq!("all".parse::<RegionSet>().unwrap(), RegionSet::ALL);
        assert!("nose".parse::<RegionSet>().is_err());
        assert_eq!(s.to_string(), "lip,eyes");
    }

    #[test]
    fn eye_dilation_only_touches_skin() {
        let mut p = ParsingMap::filled(9, 9, Region::Skin);
        p.set(4, 4, Region::Eyes);
        p.set(6, 4, Region::Lip);
        let d = p.dilate_eyes(2);
        assert_eq!(d.count(Region::Eyes), 24);
        assert_eq!(d.at(6, 4), Region::Lip);
        assert_eq!(d.at(7, 4), Region::Skin);
    }
}
