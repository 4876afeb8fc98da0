//! Affine warping of whole bundles, used to build references with known correspondence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::face::{FaceBundle, Image, LandmarkSet, ParsingMap, Region};
use crate::scalar::{lerp, Real};

/// `(x, y) -> (a x + b y + tx, c x + d y + ty)` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for Affine2 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Affine2 {
    pub const fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0, tx: 0.0, ty: 0.0 }
    }

    pub const fn translation(tx: f64, ty: f64) -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0, tx, ty }
    }

    /// Rotation by `radians` about `center`. With y pointing down, positive
    /// angles turn clockwise on screen.
    pub fn rotation_about(center: [f64; 2], radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        Self::about(center, c, -s, s, c)
    }

    pub fn scale_about(center: [f64; 2], sx: f64, sy: f64) -> Self {
        Self::about(center, sx, 0.0, 0.0, sy)
    }

    fn about(center: [f64; 2], a: f64, b: f64, c: f64, d: f64) -> Self {
        let [cx, cy] = center;
        Self { a, b, c, d, tx: cx - a * cx - b * cy, ty: cy - c * cx - d * cy }
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Affine2) -> Affine2 {
        Affine2 {
            a: self.a * first.a + self.b * first.c,
            b: self.a * first.b + self.b * first.d,
            c: self.c * first.a + self.d * first.c,
            d: self.c * first.b + self.d * first.d,
            tx: self.a * first.tx + self.b * first.ty + self.tx,
            ty: self.c * first.tx + self.d * first.ty + self.ty,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Result<Affine2> {
        let det = self.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::NonInvertible);
        }
        let (a, b, c, d) = (self.d / det, -self.b / det, -self.c / det, self.a / det);
        Ok(Affine2 { a, b, c, d, tx: -(a * self.tx + b * self.ty), ty: -(c * self.tx + d * self.ty) })
    }

    #[inline]
    pub fn apply(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        [self.a * x + self.b * y + self.tx, self.c * x + self.d * y + self.ty]
    }

    pub fn apply_t<T: Real>(&self, [x, y]: [T; 2]) -> [T; 2] {
        let [u, v] = self.apply([x.to_f64_lossy(), y.to_f64_lossy()]);
        [T::lit(u), T::lit(v)]
    }
}

fn sample_bilinear<T: Real>(image: &Image<T>, x: f64, y: f64) -> [T; 3] {
    let (w, h) = (image.width(), image.height());
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (xc.floor() as usize, yc.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (tx, ty) = (T::lit(xc - x0 as f64), T::lit(yc - y0 as f64));
    let (p00, p10, p01, p11) = (image.pixel(x0, y0), image.pixel(x1, y0), image.pixel(x0, y1), image.pixel(x1, y1));
    std::array::from_fn(|c| lerp(lerp(p00[c], p10[c], tx), lerp(p01[c], p11[c], tx), ty))
}

/// Warps image (inverse-mapped, bilinear, edge clamped), parsing map (nearest,
/// background outside) and landmarks (forward-mapped) by `transform`.
pub fn warp_bundle<T: Real>(bundle: &FaceBundle<T>, transform: &Affine2) -> Result<FaceBundle<T>> {
    let inverse = transform.inverse()?;
    let (w, h) = (bundle.width(), bundle.height());
    let mut data = Vec::with_capacity(w * h * 3);
    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let [sx, sy] = inverse.apply([x as f64, y as f64]);
            data.extend(sample_bilinear(bundle.image(), sx, sy));
            let (nx, ny) = (sx.round(), sy.round());
            let label = if nx >= 0.0 && ny >= 0.0 && (nx as usize) < w && (ny as usize) < h {
                bundle.parsing().at(nx as usize, ny as usize)
            } else {
                Region::Background
            };
            labels.push(label);
        }
    }
    let image = Image::from_raw(w, h, data, bundle.image().colorspace());
    let landmarks = LandmarkSet::new(bundle.landmarks().points().iter().map(|&p| transform.apply_t(p)).collect())?;
    FaceBundle::new(image, landmarks, ParsingMap::new(w, h, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_face, SynthParams};

    fn face() -> FaceBundle<f64> {
        synth_face(3, &SynthParams::default()).unwrap()
    }

    #[test]
    fn identity_is_noop() {
        let b = face();
        assert_eq!(warp_bundle(&b, &Affine2::identity()).unwrap(), b);
    }

    #[test]
    fn translation_moves_landmarks_exactly() {
        let b = face();
        let t = warp_bundle(&b, &Affine2::translation(8.0, 4.0)).unwrap();
        for (p, q) in b.landmarks().points().iter().zip(t.landmarks().points()) {
            assert_eq!([q[0] - p[0], q[1] - p[1]], [8.0, 4.0]);
        }
        // integer shifts move pixels exactly
        assert_eq!(t.image().pixel(108, 104), b.image().pixel(100, 100));
        assert_eq!(t.parsing().at(108, 104), b.parsing().at(100, 100));
    }

    #[test]
    fn rotation_round_trip() {
        let b = face();
        let center = [128.0, 128.0];
        let fwd = warp_bundle(&b, &Affine2::rotation_about(center, 15f64.to_radians())).unwrap();
        let back = warp_bundle(&fwd, &Affine2::rotation_about(center, -15f64.to_radians())).unwrap();
        for (p, q) in b.landmarks().points().iter().zip(back.landmarks().points()) {
            assert!((p[0] - q[0]).abs() < 1e-6 && (p[1] - q[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_transform_rejected() {
        let t = Affine2 { a: 1.0, b: 2.0, c: 2.0, d: 4.0, tx: 0.0, ty: 0.0 };
        assert!(matches!(warp_bundle(&face(), &t), Err(Error::NonInvertible)));
    }

    #[test]
    fn compose_and_inverse() {
        let r = Affine2::rotation_about([10.0, 20.0], 0.3);
        let s = Affine2::scale_about([5.0, 5.0], 0.8, 1.25);
        let m = s.compose(&r);
        let p = [3.0, -7.0];
        let q = m.apply(p);
        let direct = s.apply(r.apply(p));
        assert!((q[0] - direct[0]).abs() < 1e-12 && (q[1] - direct[1]).abs() < 1e-12);
        let back = m.inverse().unwrap().apply(q);
        assert!((back[0] - p[0]).abs() < 1e-12 && (back[1] - p[1]).abs() < 1e-12);
    }

    #[test]
    fn region_areas_roughly_preserved() {
        let b = face();
        let center = [128.0, 128.0];
        let transforms = [
            Affine2::rotation_about(center, 20f64.to_radians()),
            Affine2::translation(-9.0, 6.0),
            Affine2::scale_about(center, 0.9, 1.0 / 0.9),
        ];
        for t in transforms {
            let out = warp_bundle(&b, &t).unwrap();
            for r in Region::FACE {
                let (before, after) = (b.parsing().count(r) as f64, out.parsing().count(r) as f64);
                assert!((after - before).abs() <= 0.1 * before, "{r}: {before} -> {after}");
            }
        }
    }
}
