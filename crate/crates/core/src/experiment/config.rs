use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::contrast::LocalizationRule;
use crate::error::{Error, Result};
use crate::levy::LevyRegime;
use crate::model::DriftGenConfig;
use crate::solver::{SolverConfig, TuningConfig};

/// Pilot-based calibration of `c_op` and `c_one`: each pilot draws a fresh
/// model and path at `horizon`, and the constants are the `quantile` of the
/// gradient ratios at the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub pilots: usize,
    pub quantile: f64,
    /// `None` means the largest horizon of the sweep.
    pub horizon: Option<f64>,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            pilots: 40,
            quantile: 0.97,
            horizon: None,
            seed: 0xCA11_B8A7E,
        }
    }
}

/// Reference covariance for the RSC check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RscReferenceConfig {
    /// Monte-Carlo draws from the Gaussian stationary law (continuous regime).
    pub gaussian_samples: usize,
    /// Long-run path length as a multiple of the horizon (jump regimes).
    pub horizon_multiplier: f64,
}

impl Default for RscReferenceConfig {
    fn default() -> Self {
        Self {
            gaussian_samples: 20_000,
            horizon_multiplier: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub regime: LevyRegime,
    pub d: usize,
    pub r: usize,
    pub s: usize,
    pub t_sweep: Vec<f64>,
    pub delta_n: f64,
    pub substeps: usize,
    pub replicates: usize,
    pub seed_base: u64,
    #[serde(default)]
    pub burn_in_time: Option<f64>,
    #[serde(default)]
    pub drift: DriftGenConfig,
    #[serde(default)]
    pub localization: LocalizationRule,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub calibration: Option<CalibrationConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub rsc_reference: RscReferenceConfig,
    /// Random samples for the incoherence diagnostic; `0` skips it.
    #[serde(default)]
    pub incoherence_samples: usize,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return fail("name must be a nonempty file stem");
        }
        if self.replicates == 0 {
            return fail("replicates must be at least 1");
        }
        if self.t_sweep.is_empty() {
            return fail("t_sweep must be nonempty");
        }
        if self.t_sweep.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return fail("every horizon must be positive and finite");
        }
        if !(self.delta_n > 0.0) {
            return fail("delta_n must be positive");
        }
        if self.substeps == 0 {
            return fail("substeps must be at least 1");
        }
        if self.d < 2 || self.r > self.d || self.s > self.d * (self.d - 1) {
            return fail("need d >= 2, r <= d and s <= d(d-1)");
        }
        if self.regime.dim() != self.d {
            return fail("regime dimension differs from d");
        }
        self.regime.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.localization.validate()?;
        self.tuning.validate()?;
        self.solver.validate()?;
        if let Some(c) = &self.calibration {
            if c.pilots == 0 || !(0.0..=1.0).contains(&c.quantile) || c.horizon.is_some_and(|h| !(h > 0.0)) {
                return fail("calibration needs pilots >= 1, quantile in [0, 1] and a positive horizon");
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
