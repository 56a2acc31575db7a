use std::path::PathBuf;

use super::config::{CalibrationConfig, ExperimentConfig, RscReferenceConfig};
use crate::contrast::LocalizationRule;
use crate::error::{Error, Result};
use crate::levy::{JumpLaw, LevyRegime};
use crate::model::DriftGenConfig;
use crate::solver::{gamma_rule, SolverConfig, TuningConfig};
use crate::Mat;

pub const PRESET_NAMES: [&str; 4] = ["continuous", "bounded", "subweibull", "polymoment"];

const D: usize = 20;
const DELTA_N: f64 = 0.05;

/// Pilot-chosen floor: faster mean reversion lifts the signal above the
/// calibrated thresholds, while larger drifts let the discretization bias
/// of the contrast dominate at `T = 2000`.
fn preset_drift() -> DriftGenConfig {
    DriftGenConfig {
        spectral_floor: 1.0,
        ..DriftGenConfig::default()
    }
}

/// Default experiment for a named regime: `d = 20`, `r = 2`, `s = 20`,
/// `Δn = 0.05`, horizons `250..2000` with 20 replicates each.
pub fn regime_preset(name: &str) -> Result<ExperimentConfig> {
    let regime = match name {
        "continuous" => LevyRegime::continuous(Mat::identity(D, D)),
        "bounded" => LevyRegime::with_jumps(JumpLaw::BoundedJumps { z0: 2.0 }, Mat::identity(D, D) * 0.5, 1.0, 3.0),
        "subweibull" => LevyRegime::with_jumps(JumpLaw::SubWeibull { alpha: 1.0 }, Mat::identity(D, D) * 0.5, 1.0, 1.0),
        "polymoment" => LevyRegime::with_jumps(JumpLaw::PolyMoment { p: 4.0 }, Mat::identity(D, D) * 0.5, 1.0, 0.5),
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    let tuning = TuningConfig {
        gamma_value: gamma_rule(&regime.law, DELTA_N),
        ..TuningConfig::default()
    };
    let cfg = ExperimentConfig {
        name: name.to_string(),
        regime,
        d: D,
        r: 2,
        s: 20,
        t_sweep: vec![250.0, 500.0, 1000.0, 2000.0],
        delta_n: DELTA_N,
        substeps: 10,
        replicates: 20,
        seed_base: 20_240_601,
        burn_in_time: None,
        drift: preset_drift(),
        localization: LocalizationRule::default(),
        tuning,
        calibration: Some(CalibrationConfig::default()),
        solver: SolverConfig::default(),
        rsc_reference: RscReferenceConfig::default(),
        incoherence_samples: 0,
        output_dir: PathBuf::from("out"),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESET_NAMES {
            let cfg = regime_preset(name).unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn polymoment_gamma_follows_rule() {
        let cfg = regime_preset("polymoment").unwrap();
        assert!((cfg.tuning.gamma_value - DELTA_N.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(regime_preset("gaussian").is_err());
    }
}
