//! Transfer parameters and requests, including the JSON form used by the CLI and service.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::amm::FieldMode;
use crate::error::{Error, Result};
use crate::face::{FaceBundle, RegionSet, WorkingGrid};
use crate::io::load_bundle_dir;
use crate::scalar::Real;

/// How two references are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BlendMode {
    /// Each reference drives its own disjoint set of regions.
    #[default]
    Partial,
    /// The two references are mixed by `alpha` over a shared region set.
    Interpolate,
}

impl std::str::FromStr for BlendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "partial" => Ok(BlendMode::Partial),
            "interpolate" => Ok(BlendMode::Interpolate),
            other => Err(Error::InvalidRequest(format!("unknown blend mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferParams {
    /// Shade (one reference, or partial mixing) or mixing coefficient (interpolation).
    pub alpha: f64,
    pub regions: RegionSet,
    /// Regions taken from the second reference; required for partial mixing.
    pub regions2: Option<RegionSet>,
    pub blend: BlendMode,
    pub mode: FieldMode,
    /// Side of the square working grid.
    pub grid: usize,
    /// Weight of the visual features in the attention.
    pub w: f64,
}

impl Default for TransferParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            regions: RegionSet::ALL,
            regions2: None,
            blend: BlendMode::Partial,
            mode: FieldMode::PerChannel,
            grid: 64,
            w: 0.01,
        }
    }
}

impl TransferParams {
    pub fn working_grid(&self) -> Result<WorkingGrid> {
        WorkingGrid::square(self.grid)
    }

    /// Checks the parameters against the number of references supplied.
    pub fn validate(&self, references: usize) -> Result<()> {
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if !self.w.is_finite() || self.w < 0.0 {
            return Err(Error::InvalidWeight(self.w));
        }
        self.working_grid()?;
        if self.regions.is_empty() {
            return Err(Error::InvalidRequest("region selection is empty".into()));
        }
        match (references, self.blend) {
            (1, _) => {
                if self.regions2.is_some() {
                    return Err(Error::InvalidRequest("regions2 given without a second reference".into()));
                }
            }
            (2, BlendMode::Partial) => {
                let second = self
                    .regions2
                    .ok_or_else(|| Error::InvalidRequest("partial mixing needs regions2 for the second reference".into()))?;
                if second.is_empty() {
                    return Err(Error::InvalidRequest("regions2 selection is empty".into()));
                }
                let shared = self.regions.intersection(second);
                if !shared.is_empty() {
                    return Err(Error::OverlappingRegions(shared.to_string()));
                }
            }
            (2, BlendMode::Interpolate) => {
                if self.regions2.is_some_and(|r| r != self.regions) {
                    return Err(Error::InvalidRequest("interpolation uses one region set; regions2 must be omitted or equal".into()));
                }
            }
            (n, _) => return Err(Error::InvalidRequest(format!("expected 1 or 2 references, got {n}"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TransferRequest<T> {
    pub source: FaceBundle<T>,
    pub references: Vec<FaceBundle<T>>,
    pub params: TransferParams,
}

impl<T: Real> TransferRequest<T> {
    pub fn new(source: FaceBundle<T>, references: Vec<FaceBundle<T>>, params: TransferParams) -> Result<Self> {
        params.validate(references.len())?;
        Ok(Self { source, references, params })
    }
}

/// Serialized request: bundle directories plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub source: PathBuf,
    pub references: Vec<PathBuf>,
    #[serde(default)]
    pub params: TransferParams,
}

impl TransferSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a spec file; relative bundle paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let mut spec = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.source = base.join(&spec.source);
        for r in &mut spec.references {
            *r = base.join(&*r);
        }
        Ok(spec)
    }

    pub fn into_request<T: Real>(self) -> Result<TransferRequest<T>> {
        let source = load_bundle_dir(&self.source)?;
        let references = self.references.iter().map(|p| load_bundle_dir(p)).collect::<Result<Vec<_>>>()?;
        TransferRequest::new(source, references, self.params)
    }
}
