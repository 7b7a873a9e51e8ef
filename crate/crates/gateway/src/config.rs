//! Gateway configuration file (TOML).
//!
//! ```toml
//! port = 8080
//! data_dir = "meter-data"
//! msisdn = "+60123456789"
//! tick_seconds = 1.0
//!
//! [pacing]
//! mode = "wall_clock"     # or "as_fast_as_possible"
//! multiplier = 1.0
//!
//! [meter]
//! low_credit_threshold_sen = 50
//!
//! [[loads]]
//! name = "bulb60"
//! rated_watts = 60.0
//! measured_watts = 57.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use meter_core::meter::MeterConfig;
use meter_core::sim::scenario::ConfigOverrides;
use meter_core::sim::LoadProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Pacing {
    /// Simulated seconds advance `multiplier` times faster than wall time
    /// while the relay is closed; with no supply the meter clock is paused.
    WallClock { multiplier: f64 },
    /// Ticks run back to back while the relay is closed and a load is on;
    /// otherwise simulated time stands still.
    AsFastAsPossible,
}

impl Default for Pacing {
    fn default() -> Self {
        Pacing::WallClock { multiplier: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msisdn: Option<String>,
    #[serde(default = "default_tick")]
    pub tick_seconds: f64,
    #[serde(default)]
    pub pacing: Pacing,
    #[serde(default)]
    pub meter: ConfigOverrides,
    #[serde(default = "default_loads")]
    pub loads: Vec<LoadProfile>,
}

fn default_port() -> u16 {
    8080
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("meter-data")
}

fn default_tick() -> f64 {
    1.0
}

/// The three bulbs from the light-bulb experiment, at their measured wattage.
pub fn default_loads() -> Vec<LoadProfile> {
    [("bulb60", 60.0, 57.0), ("bulb25", 25.0, 24.0), ("bulb15", 15.0, 14.0)]
        .into_iter()
        .map(|(name, rated_watts, measured_watts)| LoadProfile { name: name.into(), rated_watts, measured_watts })
        .collect()
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            port: default_port(),
            data_dir: default_data_dir(),
            msisdn: None,
            tick_seconds: default_tick(),
            pacing: Pacing::default(),
            meter: ConfigOverrides::default(),
            loads: default_loads(),
        }
    }
}

impl GatewayConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Loads a config file; relative paths inside it resolve against the file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading config {}: {e}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            if cfg.data_dir.is_relative() {
                cfg.data_dir = dir.join(&cfg.data_dir);
            }
            if let Some(csv) = cfg.meter.calibration_csv.as_mut().filter(|p| p.is_relative()) {
                *csv = dir.join(&*csv);
            }
        }
        Ok(cfg)
    }

    pub fn meter_config(&self) -> anyhow::Result<MeterConfig> {
        let mut overrides = self.meter.clone();
        if let Some(m) = &self.msisdn {
            overrides.alert_msisdn = Some(m.clone());
        }
        let cfg = overrides.apply(self.tick_seconds)?;
        if let Pacing::WallClock { multiplier } = self.pacing {
            anyhow::ensure!(multiplier > 0.0 && multiplier.is_finite(), "pacing multiplier must be positive");
        }
        let mut names = std::collections::HashSet::new();
        for load in &self.loads {
            anyhow::ensure!(names.insert(load.name.as_str()), "duplicate load name {:?}", load.name);
            anyhow::ensure!(load.measured_watts >= 0.0, "load {:?} has negative measured_watts", load.name);
        }
        Ok(cfg)
    }
}
