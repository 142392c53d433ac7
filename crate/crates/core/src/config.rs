//! TOML experiment files.
//!
//! Top-level keys are the [`TrialConfig`] fields; an optional `[sweep]`
//! table lists the axis values. Omitted keys take their defaults.
//!
//! ```toml
//! n_tones = 6
//! m_order = 4
//! delta_deg = 360.0
//! p_in_dbm = 0.0
//! streams = 100
//! seed = 1
//!
//! [rectifier]
//! model = "diode_ode"
//! r_load = 4400.0
//!
//! [impairments]
//! attenuation_db = 0.0
//!
//! [sweep]
//! delta_deg = [0.0, 90.0, 180.0, 360.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{SweepAxes, TrialConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub trial: TrialConfig,
    pub sweep: Option<SweepAxes>,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse()?;
        let sweep = match table.remove("sweep") {
            Some(v) => Some(v.try_into::<SweepAxes>()?),
            None => None,
        };
        let trial: TrialConfig = toml::Value::Table(table).try_into()?;
        Ok(ExperimentFile { trial, sweep })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        let mut table = toml::Table::try_from(&self.trial).map_err(|e| Error::Consistency(e.to_string()))?;
        if let Some(s) = &self.sweep {
            let v = toml::Value::try_from(s).map_err(|e| Error::Consistency(e.to_string()))?;
            table.insert("sweep".into(), v);
        }
        toml::to_string(&table).map_err(|e| Error::Consistency(e.to_string()))
    }
}
