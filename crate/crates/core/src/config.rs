//! Run configuration read by the command-line tool.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ball_expansion::FitWindow;
use crate::error::{Error, Result};
use crate::tolerances::Tolerances;
use crate::warp_metric::WarpingSpec;

pub const MIN_PROFILE_SIZE: usize = 128;
pub const MIN_CURVATURE_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct GridConfig {
    /// Volume intervals of the candidate profile.
    pub profile_size: usize,
    /// Radial intervals of the curvature sampling grid.
    pub curvature_size: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            profile_size: 512,
            curvature_size: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub metric: WarpingSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Absolute fit window; defaults to `(0.02 L, 0.25 L)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<FitWindow>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(metric: WarpingSpec) -> Self {
        Self {
            metric,
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
            fit_window: None,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.profile_size < MIN_PROFILE_SIZE {
            return Err(Error::Config(format!(
                "profileSize {} is below {MIN_PROFILE_SIZE}",
                self.grid.profile_size
            )));
        }
        if self.grid.curvature_size < MIN_CURVATURE_SIZE {
            return Err(Error::Config(format!(
                "curvatureSize {} is below {MIN_CURVATURE_SIZE}",
                self.grid.curvature_size
            )));
        }
        if let Some(w) = self.fit_window {
            if !(w.r_min > 0.0 && w.r_min < w.r_max && w.r_max.is_finite()) {
                return Err(Error::Config(format!(
                    "fitWindow ({}, {}) is not an interval in (0, inf)",
                    w.r_min, w.r_max
                )));
            }
        }
        self.tolerances.validate()
    }

    /// Overlays the fields present in a JSON object onto the tolerances.
    pub fn apply_tolerance_overrides(&mut self, text: &str) -> Result<()> {
        let overrides: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let serde_json::Value::Object(fields) = overrides else {
            return Err(Error::Config("tolerance overrides must be a JSON object".into()));
        };
        let mut merged = serde_json::to_value(self.tolerances)?;
        if let serde_json::Value::Object(base) = &mut merged {
            base.extend(fields);
        }
        self.tolerances = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        self.tolerances.validate()
    }
}
