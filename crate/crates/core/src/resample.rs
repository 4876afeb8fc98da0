//! Moving between input resolution and the working grid.

use crate::error::Result;
use crate::face::{ColorSpace, FaceBundle, Image, ParsingMap, Region, WorkingGrid};
use crate::scalar::{lerp, Real, RunningMean};

/// How image samples are pooled into a working-grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Plain area average over the cell.
    #[default]
    Area,
    /// Average over the cell's pixels that carry the cell's pooled label.
    RegionAware,
}

/// Input pixel range `[start, end)` covered by cell `index` along one axis.
#[inline]
fn cell_span(index: usize, cells: usize, pixels: usize) -> (usize, usize) {
    let start = index * pixels / cells;
    let end = ((index + 1) * pixels / cells).max(start + 1).min(pixels);
    (start.min(pixels - 1), end)
}

/// Mode-pools a parsing map onto `grid`; ties go to lip > eyes > skin > background.
pub fn pool_parsing(parsing: &ParsingMap, grid: WorkingGrid) -> ParsingMap {
    let (gw, gh) = (grid.width(), grid.height());
    let mut out = ParsingMap::filled(gw, gh, Region::Background);
    for gy in 0..gh {
        let (y0, y1) = cell_span(gy, gh, parsing.height());
        for gx in 0..gw {
            let (x0, x1) = cell_span(gx, gw, parsing.width());
            let mut counts = [0usize; 4];
            for y in y0..y1 {
                for x in x0..x1 {
                    counts[parsing.at(x, y).label() as usize] += 1;
                }
            }
            let best = [Region::Background, Region::Skin, Region::Lip, Region::Eyes]
                .into_iter()
                .max_by_key(|r| (counts[r.label() as usize], r.pool_priority()))
                .unwrap_or(Region::Background);
            out.set(gx, gy, best);
        }
    }
    out
}

/// Pools an image onto the grid. `pooled` must be the pooled parsing map when
/// `pooling` is region aware.
pub fn pool_image<T: Real>(
    image: &Image<T>,
    parsing: &ParsingMap,
    pooled: &ParsingMap,
    pooling: Pooling,
) -> Image<T> {
    let (gw, gh) = (pooled.width(), pooled.height());
    let mut data = Vec::with_capacity(gw * gh * 3);
    for gy in 0..gh {
        let (y0, y1) = cell_span(gy, gh, image.height());
        for gx in 0..gw {
            let (x0, x1) = cell_span(gx, gw, image.width());
            let target = pooled.at(gx, gy);
            let mut means = [RunningMean::<T>::new(); 3];
            let mut fallback = [RunningMean::<T>::new(); 3];
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = image.pixel(x, y);
                    for c in 0..3 {
                        fallback[c].push(p[c]);
                    }
                    if pooling == Pooling::RegionAware && parsing.at(x, y) == target {
                        for c in 0..3 {
                            means[c].push(p[c]);
                        }
                    }
                }
            }
            let chosen = if pooling == Pooling::RegionAware && means[0].count > 0 {
                means
            } else {
                fallback
            };
            data.extend(chosen.iter().map(|m| m.mean));
        }
    }
    Image::from_raw(gw, gh, data, image.colorspace())
}

/// Brings a bundle to working resolution: area-averaged image, mode-pooled
/// parsing, landmarks scaled by the resolution ratio.
pub fn downsample_bundle<T: Real>(bundle: &FaceBundle<T>, grid: WorkingGrid) -> Result<FaceBundle<T>> {
    downsample_bundle_with(bundle, grid, Pooling::Area)
}

pub fn downsample_bundle_with<T: Real>(
    bundle: &FaceBundle<T>,
    grid: WorkingGrid,
    pooling: Pooling,
) -> Result<FaceBundle<T>> {
    let parsing = pool_parsing(bundle.parsing(), grid);
    let image = pool_image(bundle.image(), bundle.parsing(), &parsing, pooling);
    let (sx, sy) = grid.scale_factors::<T>(bundle.width(), bundle.height());
    let landmarks = bundle.landmarks().scaled(sx, sy);
    FaceBundle::new(image, landmarks, parsing)
}

/// Continuous working-grid coordinate of an output pixel center.
#[inline]
fn source_coord(index: usize, out: usize, cells: usize) -> f64 {
    (index as f64 + 0.5) * cells as f64 / out as f64 - 0.5
}

#[inline]
fn neighbours(coord: f64, cells: usize) -> (usize, usize, f64) {
    let c = coord.clamp(0.0, (cells - 1) as f64);
    let i0 = c.floor() as usize;
    let i1 = (i0 + 1).min(cells - 1);
    (i0, i1, c - i0 as f64)
}

/// Plain bilinear upsampling (pixel-center aligned, edge clamped).
pub fn upsample_bilinear<T: Real>(image: &Image<T>, width: usize, height: usize) -> Image<T> {
    let mut data = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        let (y0, y1, ty) = neighbours(source_coord(y, height, image.height()), image.height());
        let ty = T::lit(ty);
        for x in 0..width {
            let (x0, x1, tx) = neighbours(source_coord(x, width, image.width()), image.width());
            let tx = T::lit(tx);
            let (a, b) = (image.pixel(x0, y0), image.pixel(x1, y0));
            let (c, d) = (image.pixel(x0, y1), image.pixel(x1, y1));
            for ch in 0..3 {
                data.push(lerp(lerp(a[ch], b[ch], tx), lerp(c[ch], d[ch], tx), ty));
            }
        }
    }
    Image::from_raw(width, height, data, image.colorspace())
}

/// Upsamples a per-cell signed residual (three channels, `cells` labelled by
/// `grid_labels`) to full resolution. Each output pixel only draws from cells of
/// its own region: bilinear weights restricted to matching cells, else the
/// nearest matching cell within two cells, else zero.
pub fn upsample_residual_by_region<T: Real>(
    residual: &[[T; 3]],
    grid_labels: &ParsingMap,
    full_labels: &ParsingMap,
) -> Vec<[T; 3]> {
    let (gw, gh) = (grid_labels.width(), grid_labels.height());
    let (w, h) = (full_labels.width(), full_labels.height());
    debug_assert_eq!(residual.len(), gw * gh);
    let mut out = vec![[T::zero(); 3]; w * h];
    for y in 0..h {
        let (y0, y1, ty) = neighbours(source_coord(y, h, gh), gh);
        let fy = source_coord(y, h, gh);
        for x in 0..w {
            let region = full_labels.at(x, y);
            if !region.is_face() {
                continue;
            }
            let (x0, x1, tx) = neighbours(source_coord(x, w, gw), gw);
            let taps = [
                (x0, y0, (1.0 - tx) * (1.0 - ty)),
                (x1, y0, tx * (1.0 - ty)),
                (x0, y1, (1.0 - tx) * ty),
                (x1, y1, tx * ty),
            ];
            let mut acc = [0.0f64; 3];
            let mut total = 0.0f64;
            for &(cx, cy, wt) in &taps {
                if wt <= 0.0 || grid_labels.at(cx, cy) != region {
                    continue;
                }
                let r = residual[cy * gw + cx];
                for c in 0..3 {
                    acc[c] += wt * r[c].to_f64_lossy();
                }
                total += wt;
            }
            let value = if total > 1e-12 {
                [acc[0] / total, acc[1] / total, acc[2] / total]
            } else if let Some((cx, cy)) =
                nearest_cell(grid_labels, region, source_coord(x, w, gw), fy, 2)
            {
                let r = residual[cy * gw + cx];
                [r[0].to_f64_lossy(), r[1].to_f64_lossy(), r[2].to_f64_lossy()]
            } else {
                [0.0; 3]
            };
            out[y * w + x] = [T::lit(value[0]), T::lit(value[1]), T::lit(value[2])];
        }
    }
    out
}

fn nearest_cell(labels: &ParsingMap, region: Region, fx: f64, fy: f64, radius: usize) -> Option<(usize, usize)> {
    let (gw, gh) = (labels.width(), labels.height());
    let cx = fx.round().clamp(0.0, (gw - 1) as f64) as usize;
    let cy = fy.round().clamp(0.0, (gh - 1) as f64) as usize;
    let mut best: Option<((usize, usize), f64)> = None;
    for y in cy.saturating_sub(radius)..=(cy + radius).min(gh - 1) {
        for x in cx.saturating_sub(radius)..=(cx + radius).min(gw - 1) {
            if labels.at(x, y) != region {
                continue;
            }
            let d = (x as f64 - fx).powi(2) + (y as f64 - fy).powi(2);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some(((x, y), d));
            }
        }
    }
    best.map(|(c, _)| c)
}

/// Working-resolution copy of `image` in the decorrelated space.
pub(crate) fn to_lab<T: Real>(image: &Image<T>) -> Image<T> {
    image.to_colorspace(ColorSpace::DecorrelatedLab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face::{LandmarkSet, Region};

    fn bundle(size: usize, color: [f64; 3], region: Region) -> FaceBundle<f64> {
        let img = Image::filled(size, size, color).unwrap();
        let mut pts = vec![[size as f64 / 2.0; 2]; 68];
        pts[0] = [128.0, 128.0];
        let lm = LandmarkSet::new(pts).unwrap();
        FaceBundle::new(img, lm, ParsingMap::filled(size, size, region)).unwrap()
    }

    #[test]
    fn landmark_scaling() {
        let b = bundle(256, [0.3, 0.4, 0.5], Region::Skin);
        let d = downsample_bundle(&b, WorkingGrid::default()).unwrap();
        assert_eq!(d.landmarks().points()[0], [32.0, 32.0]);
        assert_eq!((d.width(), d.height()), (64, 64));
    }

    #[test]
    fn constant_parsing_pools_to_constant() {
        let b = bundle(256, [0.3, 0.4, 0.5], Region::Skin);
        let d = downsample_bundle(&b, WorkingGrid::default()).unwrap();
        assert!(d.parsing().labels().iter().all(|&r| r == Region::Skin));
    }

    #[test]
    fn mode_pool_majority_and_ties() {
        let mut p = ParsingMap::filled(32, 32, Region::Skin);
        // cell (0,0) of a 16x16 grid covers 2x2 pixels
        p.set(0, 0, Region::Lip);
        let pooled = pool_parsing(&p, WorkingGrid::square(16).unwrap());
        assert_eq!(pooled.at(0, 0), Region::Skin);

        p.set(1, 0, Region::Lip);
        let pooled = pool_parsing(&p, WorkingGrid::square(16).unwrap());
        assert_eq!(pooled.at(0, 0), Region::Lip, "2-2 tie resolves to lip");

        let mut q = ParsingMap::filled(32, 32, Region::Background);
        q.set(2, 0, Region::Skin);
        q.set(3, 0, Region::Skin);
        q.set(2, 1, Region::Eyes);
        q.set(3, 1, Region::Eyes);
        let pooled = pool_parsing(&q, WorkingGrid::square(16).unwrap());
        assert_eq!(pooled.at(1, 0), Region::Eyes);
    }

    #[test]
    fn constant_round_trip_is_exact() {
        let b = bundle(256, [0.1, 0.7, 0.3], Region::Skin);
        let d = downsample_bundle(&b, WorkingGrid::default()).unwrap();
        let up = upsample_bilinear(d.image(), 256, 256);
        assert_eq!(up.data(), b.image().data());
    }

    #[test]
    fn region_aware_pooling_ignores_other_labels() {
        let mut data: Vec<f64> = vec![0.9; 32 * 32 * 3];
        let mut p = ParsingMap::filled(32, 32, Region::Skin);
        // cell (0,0): three lip pixels at 0.2, one skin pixel at 0.9 -> lip cell valued 0.2
        for (x, y) in [(0, 0), (1, 0), (0, 1)] {
            p.set(x, y, Region::Lip);
            data[(y * 32 + x) * 3..(y * 32 + x) * 3 + 3].copy_from_slice(&[0.2; 3]);
        }
        let img = Image::new(32, 32, data, ColorSpace::LinearRgb).unwrap();
        let grid = WorkingGrid::square(16).unwrap();
        let pooled = pool_parsing(&p, grid);
        let area = pool_image(&img, &p, &pooled, Pooling::Area);
        let aware = pool_image(&img, &p, &pooled, Pooling::RegionAware);
        assert!((area.pixel(0, 0)[0] - 0.375).abs() < 1e-12);
        assert!((aware.pixel(0, 0)[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn residual_never_crosses_regions() {
        let grid_labels = {
            let mut p = ParsingMap::filled(16, 16, Region::Skin);
            for y in 6..10 {
                for x in 4..12 {
                    p.set(x, y, Region::Lip);
                }
            }
            p
        };
        let full = {
            let mut p = ParsingMap::filled(64, 64, Region::Skin);
            for y in 24..40 {
                for x in 16..48 {
                    p.set(x, y, Region::Lip);
                }
            }
            p
        };
        let residual: Vec<[f64; 3]> = grid_labels
            .labels()
            .iter()
            .map(|&r| if r == Region::Lip { [0.3; 3] } else { [0.0; 3] })
            .collect();
        let up = upsample_residual_by_region(&residual, &grid_labels, &full);
        for (i, &r) in full.labels().iter().enumerate() {
            let expect = if r == Region::Lip { 0.3 } else { 0.0 };
            assert!((up[i][0] - expect).abs() < 1e-12, "pixel {i}");
        }
    }
}
