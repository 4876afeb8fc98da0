//! Transfer parameters from flags, config files and request files.

use std::path::{Path, PathBuf};

use amorph::{BlendMode, Error, FieldMode, RegionSet, TransferParams};
use clap::Args;
use serde_json::{Map, Value};

use crate::CliError;

/// Parameter flags shared by the transfer-like subcommands. Precedence is
/// flags, then request file, then config file, then built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Shade / mixing coefficient in [0,1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Regions taken from the reference: `all` or a list such as `lip,eyes`.
    #[arg(long)]
    pub regions: Option<String>,
    /// Regions taken from the second reference.
    #[arg(long)]
    pub regions2: Option<String>,
    /// How two references combine: partial or interpolate.
    #[arg(long)]
    pub blend: Option<String>,
    /// Field layout: per-channel or broadcast.
    #[arg(long)]
    pub mode: Option<String>,
    /// Working grid side (power of two, 16..=256).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Weight of visual features in the attention.
    #[arg(short = 'w', long = "weight", visible_alias = "w")]
    pub w: Option<f64>,
    /// JSON file with default parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CliError::from(Error::Io { path: path.to_path_buf(), source }))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage("config", format!("{}: {e}", path.display())))
}

fn merge(base: &mut Map<String, Value>, layer: &Value, origin: &str) -> Result<(), CliError> {
    let Value::Object(layer) = layer else {
        return Err(CliError::usage("config", format!("{origin}: parameters must be a JSON object")));
    };
    for (k, v) in layer {
        base.insert(k.clone(), v.clone());
    }
    Ok(())
}

impl ParamArgs {
    /// Resolves the final parameters. `request_params` is the raw `params`
    /// object of a request file, if any.
    pub fn resolve(&self, request_params: Option<&Value>, references: usize) -> Result<TransferParams, CliError> {
        let mut merged = match serde_json::to_value(TransferParams::default()) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("params serialize to an object"),
        };
        if let Some(path) = &self.config {
            merge(&mut merged, &read_json(path)?, &path.display().to_string())?;
        }
        if let Some(layer) = request_params {
            merge(&mut merged, layer, "request params")?;
        }
        let mut params: TransferParams = serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::usage("config", format!("parameters: {e}")))?;

        if let Some(a) = self.alpha {
            params.alpha = a;
        }
        if let Some(r) = &self.regions {
            params.regions = parse_regions(r).map_err(|e| CliError::flag("--regions", e))?;
        }
        if let Some(r) = &self.regions2 {
            params.regions2 = Some(parse_regions(r).map_err(|e| CliError::flag("--regions2", e))?);
        }
        if let Some(b) = &self.blend {
            params.blend = b.parse::<BlendMode>().map_err(|e| CliError::flag("--blend", e))?;
        }
        if let Some(m) = &self.mode {
            params.mode = m.parse::<FieldMode>().map_err(|e| CliError::flag("--mode", e))?;
        }
        if let Some(g) = self.grid {
            params.grid = g;
        }
        if let Some(w) = self.w {
            params.w = w;
        }
        params.validate(references).map_err(|e| {
            let flag = match &e {
                Error::InvalidAlpha(_) => "--alpha",
                Error::InvalidWeight(_) => "--weight",
                Error::InvalidGrid { .. } => "--grid",
                Error::OverlappingRegions(_) => "--regions2",
                _ => "arguments",
            };
            CliError::flag(flag, e)
        })?;
        Ok(params)
    }
}

pub fn parse_regions(s: &str) -> Result<RegionSet, Error> {
    s.parse()
}

pub fn parse_pixel(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(',').ok_or_else(|| format!("expected row,col, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    Ok((parse(r)?, parse(c)?))
}

pub fn parse_rgb(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [r, g, b] if parts.iter().all(|v| (0.0..=1.0).contains(v)) => Ok([*r, *g, *b]),
        _ => Err(format!("expected r,g,b in [0,1], got '{s}'")),
    }
}
