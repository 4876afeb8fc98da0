//! Bundle files on disk: `image.png`, `landmarks.json` (`[[x, y], ...]`) and
//! `parsing.png` (8-bit grayscale labels 0..=3).

use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ColorType, DynamicImage, ImageEncoder};

use crate::error::{Error, Result};
use crate::face::{FaceBundle, Image, LandmarkSet, ParsingMap};
use crate::scalar::Real;

pub const IMAGE_FILE: &str = "image.png";
pub const LANDMARKS_FILE: &str = "landmarks.json";
pub const PARSING_FILE: &str = "parsing.png";

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn decode_image<T: Real>(bytes: &[u8]) -> Result<Image<T>> {
    let rgb = image::load_from_memory(bytes)?.into_rgb8();
    Image::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
}

pub fn decode_landmarks<T: Real>(bytes: &[u8]) -> Result<LandmarkSet<T>> {
    let points: Vec<[f64; 2]> = serde_json::from_slice(bytes)?;
    LandmarkSet::new(points.into_iter().map(|[x, y]| [T::lit(x), T::lit(y)]).collect())
}

pub fn encode_landmarks<T: Real>(landmarks: &LandmarkSet<T>) -> String {
    let points: Vec<[f64; 2]> =
        landmarks.points().iter().map(|p| [p[0].to_f64_lossy(), p[1].to_f64_lossy()]).collect();
    serde_json::to_string(&points).expect("plain numbers serialize")
}

pub fn decode_parsing(bytes: &[u8]) -> Result<ParsingMap> {
    match image::load_from_memory(bytes)? {
        DynamicImage::ImageLuma8(gray) => {
            ParsingMap::from_raw_labels(gray.width() as usize, gray.height() as usize, gray.as_raw())
        }
        other => Err(Error::InvalidRequest(format!(
            "parsing map must be an 8-bit grayscale PNG, got {:?}",
            other.color()
        ))),
    }
}

pub fn bundle_from_bytes<T: Real>(image: &[u8], landmarks: &[u8], parsing: &[u8]) -> Result<FaceBundle<T>> {
    FaceBundle::new(decode_image(image)?, decode_landmarks(landmarks)?, decode_parsing(parsing)?)
}

pub fn load_bundle<T: Real>(image: &Path, landmarks: &Path, parsing: &Path) -> Result<FaceBundle<T>> {
    bundle_from_bytes(&read(image)?, &read(landmarks)?, &read(parsing)?)
}

pub fn load_bundle_dir<T: Real>(dir: &Path) -> Result<FaceBundle<T>> {
    load_bundle(&dir.join(IMAGE_FILE), &dir.join(LANDMARKS_FILE), &dir.join(PARSING_FILE))
}

pub fn save_bundle_dir<T: Real>(bundle: &FaceBundle<T>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    write(&dir.join(IMAGE_FILE), &encode_png_rgb(bundle.image())?)?;
    write(&dir.join(LANDMARKS_FILE), encode_landmarks(bundle.landmarks()).as_bytes())?;
    let p = bundle.parsing();
    write(&dir.join(PARSING_FILE), &encode_png_gray(p.width(), p.height(), &p.to_raw_labels())?)
}

pub fn encode_png_rgb<T: Real>(image: &Image<T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(
        &image.to_rgb8(),
        image.width() as u32,
        image.height() as u32,
        ColorType::Rgb8.into(),
    )?;
    Ok(out)
}

pub fn encode_png_gray(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::mismatch("gray buffer", width * height, pixels.len()));
    }
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(pixels, width as u32, height as u32, ColorType::L8.into())?;
    Ok(out)
}

pub fn write_png<T: Real>(path: &Path, image: &Image<T>) -> Result<()> {
    write(path, &encode_png_rgb(image)?)
}
