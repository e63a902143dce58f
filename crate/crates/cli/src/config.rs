use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use radlabel::eval::PdPfaOptions;
use radlabel::segmath::LossConfig;
use radlabel::voxel::{self, Axis, GridSpec};
use radlabel::PipelineConfig;

/// Polar grid as written in config files (angles in degrees, symmetric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub range_bins: usize,
    pub azimuth_bins: usize,
    pub elevation_bins: usize,
    pub range_max: f64,
    pub azimuth_max_deg: f64,
    pub elevation_max_deg: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            range_bins: voxel::DEFAULT_N_RANGE,
            azimuth_bins: voxel::DEFAULT_N_AZIMUTH,
            elevation_bins: voxel::DEFAULT_N_ELEVATION,
            range_max: voxel::DEFAULT_RANGE_MAX,
            azimuth_max_deg: voxel::DEFAULT_AZIMUTH_SPAN_DEG,
            elevation_max_deg: voxel::DEFAULT_ELEVATION_SPAN_DEG,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        let sym = |count, deg: f64| Axis {
            count,
            min: -deg.to_radians(),
            max: deg.to_radians(),
        };
        let g = GridSpec {
            range: Axis {
                count: self.range_bins,
                min: 0.0,
                max: self.range_max,
            },
            azimuth: sym(self.azimuth_bins, self.azimuth_max_deg),
            elevation: sym(self.elevation_bins, self.elevation_max_deg),
        };
        g.validate().map_err(anyhow::Error::msg)?;
        Ok(g)
    }
}

/// Everything `--config` can set. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub labelling: PipelineConfig,
    pub grid: GridConfig,
    pub eval: PdPfaOptions,
    pub loss: LossConfig,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.labelling
            .validate()
            .with_context(|| format!("config {}", path.display()))?;
        cfg.grid.spec().with_context(|| format!("config {}", path.display()))?;
        Ok(cfg)
    }
}
