//! The full transfer: working-grid preparation, attention, morphing, blending,
//! modulation and compositing back at source resolution.

use serde::{Deserialize, Serialize};

use crate::amm::{
    attention_row, attentive_matrix, expand_field, morph_field, rel_pos_features, sparse_row, AttentionMatrix,
    AttentionSide, FeatureGrid, FieldMode, HeatMap, MakeupField, RelPosField, SparseRow,
};
use crate::color::lab_delta_to_rgb;
use crate::error::{Error, Result};
use crate::face::{ColorSpace, FaceBundle, Image, ParsingMap, Region, WorkingGrid};
use crate::resample::{downsample_bundle_with, to_lab, upsample_residual_by_region, Pooling};
use crate::scalar::Real;

use super::blend::{blend_interpolate, blend_partial, shade, FieldShape};
use super::distill::{distill_working, DistillConfig};
use super::modulate::{apply_makeup, denormalize, normalize_working, rebase_field, NormStats};
use super::request::{BlendMode, TransferParams, TransferRequest};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Radius (cells) of the statistics window used by distillation.
    pub window: usize,
    /// Width (working cells) of the skin ring folded into the eye region.
    pub eye_ring: usize,
    /// Blur sigma (cells) of the attention features.
    pub feature_sigma: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { window: 2, eye_ring: 2, feature_sigma: 1.0 }
    }
}

/// Immutable transfer engine; cheap to clone and safe to share across threads.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Engine {
    config: EngineConfig,
}

/// Everything the engine derives from one bundle at a given grid and mode.
/// Preparing a face is the expensive, reusable part of a transfer.
#[derive(Debug, Clone)]
pub struct PreparedFace<T> {
    grid: WorkingGrid,
    mode: FieldMode,
    /// Input-resolution labels with the eye ring applied.
    full_labels: ParsingMap,
    working: FaceBundle<T>,
    lab: Image<T>,
    positions: RelPosField<T>,
    features: FeatureGrid<T>,
    field: MakeupField<T>,
}

impl<T: Real> PreparedFace<T> {
    pub fn grid(&self) -> WorkingGrid {
        self.grid
    }

    pub fn mode(&self) -> FieldMode {
        self.mode
    }

    /// Working-resolution bundle (region-aware pooled image, ringed labels).
    pub fn working(&self) -> &FaceBundle<T> {
        &self.working
    }

    pub fn labels(&self) -> &ParsingMap {
        self.working.parsing()
    }

    pub fn full_labels(&self) -> &ParsingMap {
        &self.full_labels
    }

    pub fn lab(&self) -> &Image<T> {
        &self.lab
    }

    pub fn positions(&self) -> &RelPosField<T> {
        &self.positions
    }

    pub fn features(&self) -> &FeatureGrid<T> {
        &self.features
    }

    /// Distilled field in absolute color units.
    pub fn field(&self) -> &MakeupField<T> {
        &self.field
    }

    pub fn attention_side(&self) -> AttentionSide<'_, T> {
        AttentionSide::new(&self.features, &self.positions, self.working.parsing())
            .expect("prepared face components share one grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDiagnostics {
    pub region: Region,
    /// Source working cells in the region.
    pub cells: usize,
    /// Cells whose attention row is nonempty.
    pub attended: usize,
    /// Mean total weight of the attended rows (1 up to rounding).
    pub mean_row_mass: f64,
    /// Mean of the largest weight per attended row.
    pub mean_peak_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDiagnostics {
    pub coverage: f64,
    pub regions: Vec<RegionDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferDiagnostics {
    pub grid: usize,
    pub mode: FieldMode,
    /// True when per-channel fields are used instead of a single broadcast plane.
    pub per_channel_fields: bool,
    pub w: f64,
    pub alpha: f64,
    pub blend: BlendMode,
    pub coverage: f64,
    /// Source cells whose relative position vector was zero.
    pub degenerate_positions: usize,
    pub references: Vec<ReferenceDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct TransferResult<T> {
    pub output: Image<T>,
    /// Fraction of source face cells attended by every reference used.
    pub coverage: f64,
    pub diagnostics: TransferDiagnostics,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        if config.window < 1 {
            return Err(Error::InvalidWindow(config.window));
        }
        if !config.feature_sigma.is_finite() || config.feature_sigma < 0.0 {
            return Err(Error::DegenerateParams(format!("feature sigma {}", config.feature_sigma)));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Eye ring radius in input pixels for a bundle of the given size.
    fn full_res_ring(&self, width: usize, height: usize, grid: WorkingGrid) -> usize {
        if self.config.eye_ring == 0 {
            return 0;
        }
        let scale = 0.5 * (width as f64 / grid.width() as f64 + height as f64 / grid.height() as f64);
        ((self.config.eye_ring as f64 * scale).round() as usize).max(1)
    }

    pub fn prepare<T: Real>(&self, bundle: &FaceBundle<T>, grid: WorkingGrid, mode: FieldMode) -> Result<PreparedFace<T>> {
        let ring = self.full_res_ring(bundle.width(), bundle.height(), grid);
        let full_labels = bundle.parsing().dilate_eyes(ring);
        let rgb = bundle.image().to_colorspace(ColorSpace::LinearRgb);
        let ringed = FaceBundle::new(rgb, bundle.landmarks().clone(), full_labels.clone())?;
        let working = downsample_bundle_with(&ringed, grid, Pooling::RegionAware)?;
        working.parsing().ensure_face()?;
        let lab = to_lab(working.image());
        let cfg = DistillConfig { window: self.config.window, mode, feature_sigma: self.config.feature_sigma };
        let (field, features) = distill_working(&lab, working.parsing(), &cfg)?;
        let positions = rel_pos_features(working.landmarks(), grid);
        Ok(PreparedFace { grid, mode, full_labels, working, lab, positions, features, field })
    }

    /// Surrogate makeup distillation of one bundle: absolute field plus attention features.
    pub fn distill<T: Real>(
        &self,
        bundle: &FaceBundle<T>,
        grid: WorkingGrid,
        mode: FieldMode,
    ) -> Result<(MakeupField<T>, FeatureGrid<T>)> {
        let p = self.prepare(bundle, grid, mode)?;
        Ok((p.field, p.features))
    }

    /// Region-standardized working features of a source plus the statistics to invert them.
    pub fn normalize_source<T: Real>(
        &self,
        bundle: &FaceBundle<T>,
        grid: WorkingGrid,
        mode: FieldMode,
    ) -> Result<(FeatureGrid<T>, NormStats<T>)> {
        let p = self.prepare(bundle, grid, mode)?;
        normalize_working(&p.lab, p.labels(), mode)
    }

    pub fn transfer<T: Real>(&self, request: &TransferRequest<T>) -> Result<TransferResult<T>> {
        let params = &request.params;
        params.validate(request.references.len())?;
        let grid = params.working_grid()?;
        let source = self.prepare(&request.source, grid, params.mode)?;
        let refs = request
            .references
            .iter()
            .map(|r| self.prepare(r, grid, params.mode))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&PreparedFace<T>> = refs.iter().collect();
        self.transfer_prepared(&request.source, &source, &refs, params)
    }

    /// Field the source receives after morphing and blending, in its own
    /// normalized units, along with the attention matrices used.
    pub fn morphed_field<T: Real>(
        &self,
        source: &PreparedFace<T>,
        references: &[&PreparedFace<T>],
        params: &TransferParams,
    ) -> Result<(MakeupField<T>, NormStats<T>, Vec<AttentionMatrix<T>>)> {
        params.validate(references.len())?;
        let grid = params.working_grid()?;
        for p in std::iter::once(&source).chain(references) {
            if p.grid != grid || p.mode != params.mode {
                return Err(Error::mismatch("prepared face", (grid, params.mode), (p.grid, p.mode)));
            }
        }
        let (_, stats) = normalize_working(&source.lab, source.labels(), params.mode)?;
        let w = T::lit(params.w);
        let alpha = T::lit(params.alpha);
        let src_side = source.attention_side();

        let mut attentions = Vec::with_capacity(references.len());
        let mut morphed = Vec::with_capacity(references.len());
        for r in references {
            let a = attentive_matrix(&src_side, &r.attention_side(), w)?;
            morphed.push(morph_field(&a, &rebase_field(&r.field, r.labels(), &stats)?)?);
            attentions.push(a);
        }

        let own = || -> Result<MakeupField<T>> {
            let a = attentive_matrix(&src_side, &src_side, w)?;
            morph_field(&a, &rebase_field(&source.field, source.labels(), &stats)?)
        };
        let shape = FieldShape::of(&morphed[0]);
        let labels = source.labels();
        let field = match (params.blend, morphed.as_slice()) {
            (BlendMode::Interpolate, [first, second]) => {
                let mixed = blend_interpolate(first, second, alpha)?;
                blend_partial(shape, &[(&mixed, &labels.mask(params.regions))])?
            }
            (_, fields) => {
                let shaded: Vec<MakeupField<T>> = if params.alpha < 1.0 {
                    let own = own()?;
                    fields.iter().map(|f| shade(f, &own, alpha)).collect::<Result<_>>()?
                } else {
                    fields.to_vec()
                };
                let selections = [Some(params.regions), params.regions2];
                let masks: Vec<Vec<bool>> =
                    selections.iter().flatten().take(shaded.len()).map(|&r| labels.mask(r)).collect();
                let pairs: Vec<(&MakeupField<T>, &[bool])> =
                    shaded.iter().zip(&masks).map(|(f, m)| (f, m.as_slice())).collect();
                blend_partial(shape, &pairs)?
            }
        };
        Ok((field, stats, attentions))
    }

    pub fn transfer_prepared<T: Real>(
        &self,
        source_bundle: &FaceBundle<T>,
        source: &PreparedFace<T>,
        references: &[&PreparedFace<T>],
        params: &TransferParams,
    ) -> Result<TransferResult<T>> {
        if source.full_labels.width() != source_bundle.width() || source.full_labels.height() != source_bundle.height() {
            return Err(Error::mismatch(
                "prepared source",
                (source_bundle.width(), source_bundle.height()),
                (source.full_labels.width(), source.full_labels.height()),
            ));
        }
        let (field, stats, attentions) = self.morphed_field(source, references, params)?;
        let (normalized, _) = normalize_working(&source.lab, source.labels(), params.mode)?;
        let modulated = apply_makeup(&normalized, &expand_field(&field, 3))?;
        let restored = denormalize(&modulated, &stats, source.labels())?;

        let labels = source.labels();
        let residual: Vec<[T; 3]> = (0..labels.labels().len())
            .map(|i| {
                if !labels.labels()[i].is_face() {
                    return [T::zero(); 3];
                }
                let before = source.lab.pixel_at(i);
                lab_delta_to_rgb(std::array::from_fn(|c| restored.at(c, i) - before[c]))
            })
            .collect();
        let up = upsample_residual_by_region(&residual, labels, &source.full_labels);

        let original = source_bundle.image();
        let rgb = original.to_colorspace(ColorSpace::LinearRgb);
        let mut output = rgb.clone();
        for (i, delta) in up.iter().enumerate() {
            if !source.full_labels.labels()[i].is_face() || delta.iter().all(|d| d.is_zero()) {
                continue;
            }
            let p = rgb.pixel_at(i);
            output.set_pixel_at(i, std::array::from_fn(|c| (p[c] + delta[c]).max(T::zero()).min(T::one())));
        }

        let diagnostics = diagnose(source, &attentions, params);
        Ok(TransferResult { output, coverage: diagnostics.coverage, diagnostics })
    }
}

impl Engine {
    /// One row of the source-to-reference attention, as a sparse list and a
    /// dense map over the reference grid. `pixel` is `(row, col)` on the
    /// working grid; `zero_features` leaves only the position term.
    pub fn inspect_attention<T: Real>(
        &self,
        source: &PreparedFace<T>,
        reference: &PreparedFace<T>,
        pixel: (usize, usize),
        w: f64,
        zero_features: bool,
    ) -> Result<(SparseRow, HeatMap<T>)> {
        let grid = source.grid;
        if pixel.0 >= grid.height() || pixel.1 >= grid.width() {
            return Err(Error::PixelOutOfBounds { row: pixel.0, col: pixel.1, height: grid.height(), width: grid.width() });
        }
        if reference.grid != grid {
            return Err(Error::mismatch("reference grid", grid, reference.grid));
        }
        let w = T::lit(w);
        let a = if zero_features {
            let (zs, zr) = (source.features.zeroed(), reference.features.zeroed());
            let s = AttentionSide::new(&zs, &source.positions, source.labels())?;
            let r = AttentionSide::new(&zr, &reference.positions, reference.labels())?;
            attentive_matrix(&s, &r, w)?
        } else {
            attentive_matrix(&source.attention_side(), &reference.attention_side(), w)?
        };
        Ok((sparse_row(&a, pixel)?, attention_row(&a, pixel)?))
    }
}

fn diagnose<T: Real>(source: &PreparedFace<T>, attentions: &[AttentionMatrix<T>], params: &TransferParams) -> TransferDiagnostics {
    let labels = source.labels().labels();
    let face_cells = labels.iter().filter(|r| r.is_face()).count();
    let covered = (0..labels.len())
        .filter(|&i| labels[i].is_face() && attentions.iter().all(|a| !a.row(i).is_empty()))
        .count();
    let references = attentions
        .iter()
        .map(|a| ReferenceDiagnostics {
            coverage: a.coverage(),
            regions: Region::FACE
                .iter()
                .map(|&region| {
                    let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == region).collect();
                    let attended: Vec<usize> = rows.iter().copied().filter(|&i| !a.row(i).is_empty()).collect();
                    let mean = |f: &dyn Fn(usize) -> f64| {
                        if attended.is_empty() {
                            0.0
                        } else {
                            attended.iter().map(|&i| f(i)).sum::<f64>() / attended.len() as f64
                        }
                    };
                    RegionDiagnostics {
                        region,
                        cells: rows.len(),
                        attended: attended.len(),
                        mean_row_mass: mean(&|i| a.row(i).sum().to_f64_lossy()),
                        mean_peak_weight: mean(&|i| {
                            a.row(i).entries().map(|(_, w)| w.to_f64_lossy()).fold(0.0, f64::max)
                        }),
                    }
                })
                .collect(),
        })
        .collect();
    TransferDiagnostics {
        grid: params.grid,
        mode: params.mode,
        per_channel_fields: params.mode == FieldMode::PerChannel,
        w: params.w,
        alpha: params.alpha,
        blend: params.blend,
        coverage: if face_cells == 0 { 1.0 } else { covered as f64 / face_cells as f64 },
        degenerate_positions: source.positions.degenerate_count(),
        references,
    }
}
