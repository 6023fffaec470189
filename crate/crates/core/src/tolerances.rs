//! Named tolerances shared across the laboratory.
//!
//! Every field can be overridden from the run configuration; the defaults are
//! the values the acceptance suite is pinned to.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct Tolerances {
    /// Slack on `R >= 6` separating roundoff from genuine violations.
    pub scalar_slack: f64,
    /// Allowed `|f'(L)|` for a boundary to count as totally geodesic.
    pub totally_geodesic: f64,
    /// Half-width of the excluded seam notch, relative to the doubled length.
    pub seam_notch_rel: f64,
    /// Monotonicity slack relative to the scale of the mass values.
    pub monotonicity_rel: f64,
    /// Rigidity threshold relative to `4 pi`.
    pub rigidity_rel: f64,
    /// Slack used by the pointwise curvature bound checks.
    pub bound_slack: f64,
    /// Closure residual accepted for a closed CMC solution.
    pub closure: f64,
    /// Relative volume window when matching CMC competitors to a target.
    pub volume_match: f64,
    /// Relative area margin by which a competitor must beat the profile.
    pub competitor_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            scalar_slack: 1e-9,
            totally_geodesic: 1e-10,
            seam_notch_rel: 1e-2,
            monotonicity_rel: 1e-6,
            rigidity_rel: 1e-4,
            bound_slack: 1e-6,
            closure: 1e-8,
            volume_match: 1e-2,
            competitor_rel: 1e-3,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("scalarSlack", self.scalar_slack),
            ("totallyGeodesic", self.totally_geodesic),
            ("seamNotchRel", self.seam_notch_rel),
            ("monotonicityRel", self.monotonicity_rel),
            ("rigidityRel", self.rigidity_rel),
            ("boundSlack", self.bound_slack),
            ("closure", self.closure),
            ("volumeMatch", self.volume_match),
            ("competitorRel", self.competitor_rel),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("tolerance {name} must be positive, got {value}")));
            }
        }
        if self.seam_notch_rel >= 0.5 {
            return Err(Error::Config("seamNotchRel must be below 0.5".into()));
        }
        Ok(())
    }
}
