//! JSON scenario files.
//!
//! ```json
//! {
//!   "num_cells": 2,
//!   "alphabet_size": 2,
//!   "lambda": 4.0,
//!   "snr_db": -1.0,
//!   "mu_h": 1.0, "sigma2_h": 1.0,
//!   "mu_g": 0.0, "sigma2_g": 0.0,
//!   "capacity_bps_hz": 2.0,
//!   "measurement_model": [
//!     { "p0": [0.9, 0.1], "p1": [0.1, 0.9] },
//!     { "p0": [0.9, 0.1], "p1": [0.1, 0.9] }
//!   ],
//!   "prior": { "rho": 0.8 },
//!   "signal_field": "real"
//! }
//! ```
//!
//! `prior` is either `{"rho": r}` (two cells only) or `{"table": [...]}` with
//! `2^K` entries in lexicographic hypothesis order; omitted means uniform.
//! `capacity_bps_hz` defaults to 0 and `signal_field` to `"real"`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{db_to_linear, linear_to_db, CellModel, QoIPrior, SignalField, SystemConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Rho { rho: f64 },
    Table { table: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub num_cells: usize,
    pub alphabet_size: usize,
    pub lambda: f64,
    pub snr_db: f64,
    pub mu_h: f64,
    pub sigma2_h: f64,
    pub mu_g: f64,
    pub sigma2_g: f64,
    #[serde(default)]
    pub capacity_bps_hz: f64,
    pub measurement_model: Vec<CellModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub signal_field: SignalField,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Converts units without validating. A rho outside [0, 1] is kept so that
    /// validation can report it.
    pub fn to_config(&self) -> SystemConfig {
        let prior = match &self.prior {
            None => QoIPrior::uniform(self.num_cells.min(16)),
            Some(PriorSpec::Table { table }) => QoIPrior::from_table(table.clone()),
            Some(PriorSpec::Rho { rho }) => {
                QoIPrior::from_rho(*rho).unwrap_or_else(|_| QoIPrior::from_table(vec![f64::NAN; 4]))
            }
        };
        SystemConfig {
            cells: self.num_cells,
            alphabet: self.alphabet_size,
            lambda: self.lambda,
            snr: db_to_linear(self.snr_db),
            mu_h: self.mu_h,
            sigma2_h: self.sigma2_h,
            mu_g: self.mu_g,
            sigma2_g: self.sigma2_g,
            capacity: self.capacity_bps_hz,
            measurement: self.measurement_model.clone(),
            prior,
            signal_field: self.signal_field,
        }
    }

    pub fn from_config(config: &SystemConfig) -> Self {
        let prior = match config.prior.rho() {
            Some(rho) => Some(PriorSpec::Rho { rho }),
            None => Some(PriorSpec::Table {
                table: config.prior.table().to_vec(),
            }),
        };
        Self {
            num_cells: config.cells,
            alphabet_size: config.alphabet,
            lambda: config.lambda,
            snr_db: linear_to_db(config.snr),
            mu_h: config.mu_h,
            sigma2_h: config.sigma2_h,
            mu_g: config.mu_g,
            sigma2_g: config.sigma2_g,
            capacity_bps_hz: config.capacity,
            measurement_model: config.measurement.clone(),
            prior,
            signal_field: config.signal_field,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads, converts and validates a scenario file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SystemConfig> {
    let config = ConfigFile::read(path)?.to_config();
    config.check()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn parses_documented_example() {
        let text = r#"{
          "num_cells": 2, "alphabet_size": 2, "lambda": 4.0, "snr_db": -1.0,
          "mu_h": 1.0, "sigma2_h": 1.0, "mu_g": 0.0, "sigma2_g": 0.0,
          "capacity_bps_hz": 2.0,
          "measurement_model": [
            { "p0": [0.9, 0.1], "p1": [0.1, 0.9] },
            { "p0": [0.9, 0.1], "p1": [0.1, 0.9] }
          ],
          "prior": { "rho": 0.8 },
          "signal_field": "real"
        }"#;
        let cfg = ConfigFile::from_json(text).unwrap().to_config();
        assert!(cfg.validate().is_empty());
        assert!((cfg.snr - 10f64.powf(-0.1)).abs() < 1e-15);
        assert_eq!(cfg.prior.rho(), Some(0.8));
    }

    #[test]
    fn table_prior_and_defaults() {
        let text = r#"{
          "num_cells": 1, "alphabet_size": 3, "lambda": 2.0, "snr_db": 0.0,
          "mu_h": 0.0, "sigma2_h": 1.0, "mu_g": 0.0, "sigma2_g": 0.0,
          "measurement_model": [ { "p0": [0.5, 0.25, 0.25], "p1": [0.2, 0.2, 0.6] } ],
          "prior": { "table": [0.3, 0.7] }
        }"#;
        let cfg = ConfigFile::from_json(text).unwrap().to_config();
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        assert_eq!(cfg.capacity, 0.0);
        assert_eq!(cfg.signal_field, SignalField::Real);
        assert_eq!(cfg.prior.table(), &[0.3, 0.7]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(
            &ConfigFile::from_config(&presets::fig2_config(0.0)).to_json_pretty(),
        )
        .unwrap();
        v["snr"] = 3.0.into();
        assert!(ConfigFile::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn round_trips_presets() {
        let cfg = presets::fig3_config(4.0);
        let back = ConfigFile::from_json(&ConfigFile::from_config(&cfg).to_json_pretty())
            .unwrap()
            .to_config();
        assert!((back.snr - cfg.snr).abs() < 1e-14);
        assert_eq!(back.prior, cfg.prior);
        assert_eq!(back.measurement, cfg.measurement);
    }

    #[test]
    fn out_of_range_rho_is_reported_by_validation() {
        let mut file = ConfigFile::from_config(&presets::fig2_config(0.0));
        file.prior = Some(PriorSpec::Rho { rho: 1.5 });
        assert!(!file.to_config().validate().is_empty());
    }
}
