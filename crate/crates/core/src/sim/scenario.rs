//! Declarative scenario files (TOML).
//!
//! ```toml
//! name = "table1-bulb1"
//! initial_credit_sen = 500
//! tick_seconds = 1.0
//! duration_seconds = 60.0
//!
//! [[loads]]
//! name = "bulb60"
//! rated_watts = 60.0
//! measured_watts = 57.0
//!
//! [[schedule]]
//! t = 0.0
//! load = "bulb60"
//! on = true
//!
//! [config]
//! low_credit_threshold_sen = 50
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fit::{table1_credit, table1_tariff};
use super::SimError;
use crate::analog::CalibrationTable;
use crate::meter::{MeterConfig, Tariff};
use crate::money::Money;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub name: String,
    pub rated_watts: f64,
    /// True consumption driving the simulation.
    pub measured_watts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub t: f64,
    pub load: String,
    pub on: bool,
}

/// Optional overrides of [`MeterConfig::default`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mains_voltage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_credit_threshold_sen: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tariff: Option<Tariff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert_msisdn: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert_template: Option<String>,
    /// `vout_volts,current_amps` CSV, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_csv: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn apply(&self, tick_seconds: f64) -> Result<MeterConfig, SimError> {
        let mut cfg = MeterConfig { tick_seconds, ..MeterConfig::default() };
        if let Some(v) = self.mains_voltage {
            cfg.mains_voltage = v;
        }
        if let Some(sen) = self.low_credit_threshold_sen {
            cfg.low_credit_threshold =
                Money::from_sen(sen).map_err(|e| SimError::invalid("config.low_credit_threshold_sen", e))?;
        }
        if let Some(t) = self.tariff {
            cfg.tariff = t;
        }
        if let Some(m) = &self.alert_msisdn {
            cfg.alert_msisdn = m.clone();
        }
        if let Some(t) = &self.alert_template {
            cfg.alert_template = t.clone();
        }
        if let Some(path) = &self.calibration_csv {
            cfg.calibration =
                CalibrationTable::from_csv_path(path).map_err(|e| SimError::invalid("config.calibration_csv", e))?;
        }
        cfg.validate().map_err(|e| SimError::invalid("config", e))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub initial_credit_sen: u64,
    #[serde(default = "default_tick")]
    pub tick_seconds: f64,
    pub duration_seconds: f64,
    #[serde(default)]
    pub loads: Vec<LoadProfile>,
    #[serde(default)]
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default)]
    pub config: ConfigOverrides,
}

fn default_tick() -> f64 {
    1.0
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::invalid("scenario", e.message()))
    }

    /// Reads a scenario file, resolving a relative calibration path against it.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let mut scenario = Self::from_toml(&text)?;
        if let (Some(csv), Some(dir)) = (&scenario.config.calibration_csv, path.parent()) {
            if csv.is_relative() {
                scenario.config.calibration_csv = Some(dir.join(csv));
            }
        }
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn initial_credit(&self) -> Result<Money, SimError> {
        Money::from_sen(self.initial_credit_sen).map_err(|e| SimError::invalid("initial_credit_sen", e))
    }

    /// Number of ticks; duration must be a whole multiple of the tick.
    pub fn steps(&self) -> Result<u64, SimError> {
        let steps = (self.duration_seconds / self.tick_seconds).round();
        if (steps * self.tick_seconds - self.duration_seconds).abs() > 1e-9 * self.duration_seconds.max(1.0) {
            return Err(SimError::invalid("duration_seconds", "must be a whole number of ticks"));
        }
        Ok(steps as u64)
    }

    /// Checks every field and builds the meter config.
    pub fn validate(&self) -> Result<MeterConfig, SimError> {
        if !(self.tick_seconds > 0.0 && self.tick_seconds.is_finite()) {
            return Err(SimError::invalid("tick_seconds", "must be positive"));
        }
        if !(self.duration_seconds > 0.0 && self.duration_seconds.is_finite()) {
            return Err(SimError::invalid("duration_seconds", "must be positive"));
        }
        self.steps()?;
        self.initial_credit()?;
        let cfg = self.config.apply(self.tick_seconds)?;
        let max_watts = cfg.mains_voltage * cfg.calibration.max_current();

        let mut names = HashSet::new();
        for (i, load) in self.loads.iter().enumerate() {
            if !names.insert(load.name.as_str()) {
                return Err(SimError::invalid("loads", format!("duplicate load name {:?}", load.name)));
            }
            if !(load.measured_watts >= 0.0 && load.measured_watts <= max_watts) {
                return Err(SimError::invalid(
                    "loads",
                    format!("loads[{i}].measured_watts must be within [0, {max_watts}]"),
                ));
            }
        }
        for (i, entry) in self.schedule.iter().enumerate() {
            if !(entry.t >= 0.0 && entry.t <= self.duration_seconds) {
                return Err(SimError::invalid("schedule", format!("schedule[{i}].t outside [0, duration]")));
            }
            if !names.contains(entry.load.as_str()) {
                return Err(SimError::invalid(
                    "schedule",
                    format!("schedule[{i}] names unknown load {:?}", entry.load),
                ));
            }
        }
        Ok(cfg)
    }
}

/// The three light-bulb runs: RM5 of credit, one bulb switched on at t=0,
/// 60 s at 1 s ticks. Loads are driven at their measured wattage; bulb 2 is
/// the 15 W bulb (reads 14 W) and bulb 3 the 25 W bulb (reads 24 W).
pub fn table1_scenarios() -> Vec<Scenario> {
    [
        ("table1-bulb1", "bulb60", 60.0, 57.0),
        ("table1-bulb2", "bulb15", 15.0, 14.0),
        ("table1-bulb3", "bulb25", 25.0, 24.0),
    ]
    .into_iter()
    .map(|(name, load, rated, measured)| Scenario {
        name: name.to_string(),
        initial_credit_sen: table1_credit().sen(),
        tick_seconds: 1.0,
        duration_seconds: 60.0,
        loads: vec![LoadProfile { name: load.to_string(), rated_watts: rated, measured_watts: measured }],
        schedule: vec![ScheduleEntry { t: 0.0, load: load.to_string(), on: true }],
        config: ConfigOverrides { tariff: Some(table1_tariff()), ..Default::default() },
    })
    .collect()
}

pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    table1_scenarios().into_iter().find(|s| s.name == name)
}
