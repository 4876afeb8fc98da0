//! Procedural faces with known geometry.
//!
//! A face is an ellipse of skin holding two eye ellipses and one lip ellipse.
//! The 68 landmarks follow the usual jaw / brows / nose / eyes / mouth ordering
//! and sit at fixed parametric positions on those shapes, so any pose applied
//! through [`SynthParams`] moves landmarks and pixels consistently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::face::{ColorSpace, FaceBundle, Image, LandmarkSet, ParsingMap, Region, LANDMARK_COUNT};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Output side length in pixels.
    pub size: usize,
    /// In-plane rotation about the face center.
    pub rotation_deg: f64,
    pub scale: f64,
    /// Horizontal / vertical stretch applied before rotation (expression-like distortion).
    pub stretch: [f64; 2],
    pub offset: [f64; 2],
    /// 0 = closed-lip default, 1 = lips twice as tall.
    pub mouth_open: f64,
    /// 1 = default eye opening, 0 = closed (no eye pixels).
    pub eye_open: f64,
    pub skin: [f64; 3],
    pub lip: [f64; 3],
    pub eyes: [f64; 3],
    pub background: [f64; 3],
    /// Tint applied to the skin ring around the eyes.
    pub eye_shadow: Option<[f64; 3]>,
    pub eye_shadow_strength: f64,
    /// Half-width of the uniform per-sample noise.
    pub noise: f64,
    /// Scale of the seeded geometric jitter.
    pub jitter: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            size: 256,
            rotation_deg: 0.0,
            scale: 1.0,
            stretch: [1.0, 1.0],
            offset: [0.0, 0.0],
            mouth_open: 0.0,
            eye_open: 1.0,
            skin: [0.87, 0.70, 0.58],
            lip: [0.80, 0.56, 0.53],
            eyes: [0.30, 0.22, 0.20],
            background: [0.20, 0.30, 0.45],
            eye_shadow: None,
            eye_shadow_strength: 0.6,
            noise: 2.0 / 255.0,
            jitter: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    center: [f64; 2],
    radii: [f64; 2],
}

impl Ellipse {
    fn contains(&self, p: [f64; 2]) -> bool {
        if self.radii[0] <= 0.0 || self.radii[1] <= 0.0 {
            return false;
        }
        let dx = (p[0] - self.center[0]) / self.radii[0];
        let dy = (p[1] - self.center[1]) / self.radii[1];
        dx * dx + dy * dy <= 1.0
    }

    fn point(&self, degrees: f64, shrink: [f64; 2]) -> [f64; 2] {
        let (s, c) = degrees.to_radians().sin_cos();
        [self.center[0] + shrink[0] * self.radii[0] * c, self.center[1] + shrink[1] * self.radii[1] * s]
    }

    fn grown(&self, by: f64) -> Ellipse {
        Ellipse { center: self.center, radii: [self.radii[0] + by, self.radii[1] + by] }
    }
}

/// Seeded geometry of a synthetic face in its canonical (unposed) frame.
#[derive(Debug, Clone)]
pub struct SynthLayout {
    params: SynthParams,
    center: [f64; 2],
    face: Ellipse,
    eyes: [Ellipse; 2],
    lip: Ellipse,
    canonical_landmarks: Vec<[f64; 2]>,
}

impl SynthLayout {
    pub fn new(seed: u64, params: &SynthParams) -> Result<Self> {
        let s = params.size as f64;
        let pose_ok = params.scale.is_finite()
            && params.scale > 0.0
            && params.stretch.iter().all(|v| v.is_finite() && *v > 0.0)
            && params.rotation_deg.is_finite();
        if params.size < 32 || !pose_ok {
            return Err(Error::DegenerateParams("zero-area face".into()));
        }
        if !(0.0..=1.0).contains(&params.eye_open) || !(0.0..=1.0).contains(&params.mouth_open) {
            return Err(Error::DegenerateParams("eye_open and mouth_open must lie in [0, 1]".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = params.jitter;
        let mut jit = |amp: f64| rng.gen_range(-1.0..=1.0) * amp * j;

        let center = [s / 2.0 + params.offset[0] + jit(0.02 * s), s / 2.0 + params.offset[1] + jit(0.02 * s)];
        let face = Ellipse { center: [0.0, 0.0], radii: [0.30 * s * (1.0 + jit(0.05)), 0.38 * s * (1.0 + jit(0.05))] };
        let eye_dx = 0.11 * s + jit(0.01 * s);
        let eye_y = -0.08 * s + jit(0.01 * s);
        let eye_radii = [0.05 * s * (1.0 + jit(0.08)), 0.024 * s * params.eye_open];
        let eyes = [
            Ellipse { center: [-eye_dx, eye_y], radii: eye_radii },
            Ellipse { center: [eye_dx, eye_y], radii: eye_radii },
        ];
        let lip = Ellipse {
            center: [jit(0.005 * s), 0.19 * s + jit(0.01 * s)],
            radii: [0.09 * s * (1.0 + jit(0.08)), 0.035 * s * (1.0 + params.mouth_open)],
        };
        let brow_y = eye_y - 0.07 * s + jit(0.005 * s);

        let mut pts = Vec::with_capacity(LANDMARK_COUNT);
        // jaw 0..=16, left ear through chin to right ear
        for k in 0..17 {
            pts.push(face.point(180.0 - k as f64 * 180.0 / 16.0, [0.92, 0.92]));
        }
        // brows 17..=26
        for side in [-1.0, 1.0] {
            for k in 0..5 {
                let t = k as f64 / 4.0;
                let x = if side < 0.0 { -0.19 + 0.14 * t } else { 0.05 + 0.14 * t } * s;
                let arch = -0.015 * s * (std::f64::consts::PI * t).sin();
                pts.push([x, brow_y + arch]);
            }
        }
        // nose bridge 27..=30 and base 31..=35
        for k in 0..4 {
            pts.push([0.0, (-0.07 + 0.035 * k as f64) * s]);
        }
        for k in 0..5 {
            let t = k as f64 - 2.0;
            pts.push([0.022 * s * t, 0.07 * s + 0.006 * s * (2.0 - t.abs())]);
        }
        // eyes 36..=47
        for eye in &eyes {
            for deg in [180.0, 225.0, 315.0, 0.0, 45.0, 135.0] {
                pts.push(eye.point(deg, [0.85, 0.85]));
            }
        }
        // outer lip 48..=59, inner lip 60..=67
        for k in 0..12 {
            pts.push(lip.point(180.0 + 30.0 * k as f64, [0.9, 0.9]));
        }
        for k in 0..8 {
            pts.push(lip.point(180.0 + 45.0 * k as f64, [0.6, 0.45]));
        }
        debug_assert_eq!(pts.len(), LANDMARK_COUNT);

        Ok(Self { params: params.clone(), center, face, eyes, lip, canonical_landmarks: pts })
    }

    /// Pose center in image pixel coordinates.
    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    fn linear(&self) -> [f64; 4] {
        let p = &self.params;
        let (s, c) = p.rotation_deg.to_radians().sin_cos();
        let (kx, ky) = (p.scale * p.stretch[0], p.scale * p.stretch[1]);
        [c * kx, -s * ky, s * kx, c * ky]
    }

    fn to_image(&self, q: [f64; 2]) -> [f64; 2] {
        let m = self.linear();
        [self.center[0] + m[0] * q[0] + m[1] * q[1], self.center[1] + m[2] * q[0] + m[3] * q[1]]
    }

    fn to_canonical(&self, p: [f64; 2]) -> [f64; 2] {
        let m = self.linear();
        let det = m[0] * m[3] - m[1] * m[2];
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        [(m[3] * dx - m[1] * dy) / det, (-m[2] * dx + m[0] * dy) / det]
    }

    pub fn landmarks(&self) -> Vec<[f64; 2]> {
        self.canonical_landmarks.iter().map(|&q| self.to_image(q)).collect()
    }

    fn region_at(&self, q: [f64; 2]) -> Region {
        if self.lip.contains(q) {
            Region::Lip
        } else if self.eyes.iter().any(|e| e.contains(q)) {
            Region::Eyes
        } else if self.face.contains(q) {
            Region::Skin
        } else {
            Region::Background
        }
    }

    pub fn render<T: Real>(&self, seed: u64) -> Result<FaceBundle<T>> {
        let p = &self.params;
        let n = p.size;
        let shadow_ring = 0.035 * n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_fa_ce);
        let mut labels = Vec::with_capacity(n * n);
        let mut data = Vec::with_capacity(n * n * 3);
        for y in 0..n {
            for x in 0..n {
                let q = self.to_canonical([x as f64, y as f64]);
                let region = self.region_at(q);
                let base = match region {
                    Region::Background => p.background,
                    Region::Lip => p.lip,
                    Region::Eyes => p.eyes,
                    Region::Skin => match p.eye_shadow {
                        Some(tint) if self.eyes.iter().any(|e| e.grown(shadow_ring).contains(q)) => {
                            std::array::from_fn(|c| p.skin[c] + (tint[c] - p.skin[c]) * p.eye_shadow_strength)
                        }
                        _ => p.skin,
                    },
                };
                for v in base {
                    let noisy = if p.noise > 0.0 { v + rng.gen_range(-p.noise..=p.noise) } else { v };
                    data.push(T::lit((noisy.clamp(0.0, 1.0) * 255.0).round() / 255.0));
                }
                labels.push(region);
            }
        }
        let image = Image::new(n, n, data, ColorSpace::LinearRgb)?;
        let landmarks = LandmarkSet::new(self.landmarks().into_iter().map(|[x, y]| [T::lit(x), T::lit(y)]).collect())?;
        let parsing = ParsingMap::new(n, n, labels)?;
        if parsing.count(Region::Skin) == 0 {
            return Err(Error::DegenerateParams("zero-area face".into()));
        }
        FaceBundle::new(image, landmarks, parsing)
    }
}

/// Deterministic synthetic face for `seed` and `params`.
pub fn synth_face<T: Real>(seed: u64, params: &SynthParams) -> Result<FaceBundle<T>> {
    SynthLayout::new(seed, params)?.render(seed)
}
