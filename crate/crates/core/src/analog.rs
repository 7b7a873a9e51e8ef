//! Current-sensing front end: shunt stage and the V_out → current calibration table.
//!
//! The firmware side converts a sensed DC voltage to amperes with
//! [`CalibrationTable::lookup_current`]; the simulation side goes the other
//! way with [`sense_vout`] so that a load's true power produces the voltage
//! the meter would see.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalogError {
    #[error("negative current {0} A")]
    NegativeCurrent(f64),
    #[error("negative power {0} W")]
    NegativePower(f64),
    #[error("shunt resistance must be positive, got {0} ohm")]
    InvalidShunt(f64),
    #[error("mains voltage must be positive, got {0} V")]
    InvalidMains(f64),
    #[error("current {current} A exceeds calibrated maximum {max} A")]
    CurrentAboveCalibration { current: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration table is empty")]
    Empty,
    #[error("calibration table must start with the (0 V, 0 A) anchor")]
    MissingAnchor,
    #[error("row {row}: values must be finite and non-negative")]
    InvalidValue { row: usize },
    #[error("row {row}: vout and current must both strictly increase")]
    NotIncreasing { row: usize },
    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("expected header `vout_volts,current_amps`, got {0:?}")]
    BadHeader(String),
    #[error("reading calibration: {0}")]
    Io(String),
}

/// One calibration point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalPoint {
    pub vout: f64,
    pub current: f64,
}

/// Monotone (V_out, current) table. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    points: Vec<CalPoint>,
}

/// Measured points for the 15/25/60 W bulbs plus the zero anchor.
pub fn default_calibration() -> CalibrationTable {
    CalibrationTable::new(vec![(0.0, 0.0), (1.2, 0.0625), (2.2, 0.1042), (3.5, 0.250)])
        .expect("default calibration is valid")
}

impl CalibrationTable {
    /// Builds a table from `(vout, current)` pairs. Row numbers in errors are 1-based.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, CalibrationError> {
        let points: Vec<CalPoint> = points.into_iter().map(|(vout, current)| CalPoint { vout, current }).collect();
        Self::validate(&points, 1)?;
        Ok(CalibrationTable { points })
    }

    fn validate(points: &[CalPoint], first_row: usize) -> Result<(), CalibrationError> {
        let first = points.first().ok_or(CalibrationError::Empty)?;
        for (i, p) in points.iter().enumerate() {
            let ok = p.vout.is_finite() && p.current.is_finite() && p.vout >= 0.0 && p.current >= 0.0;
            if !ok {
                return Err(CalibrationError::InvalidValue { row: first_row + i });
            }
        }
        if first.vout != 0.0 || first.current != 0.0 {
            return Err(CalibrationError::MissingAnchor);
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].vout > w[0].vout && w[1].current > w[0].current) {
                return Err(CalibrationError::NotIncreasing { row: first_row + i + 1 });
            }
        }
        Ok(())
    }

    /// Reads `vout_volts,current_amps` CSV. Errors carry the file line number.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self, CalibrationError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| CalibrationError::Io(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "vout_volts" || &headers[1] != "current_amps" {
            return Err(CalibrationError::BadHeader(headers.iter().collect::<Vec<_>>().join(",")));
        }
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            // header is line 1
            let row = i + 2;
            let rec = rec.map_err(|e| CalibrationError::Csv { row, message: e.to_string() })?;
            let parse = |field: &str| {
                field.parse::<f64>().map_err(|e| CalibrationError::Csv { row, message: format!("{field:?}: {e}") })
            };
            points.push(CalPoint { vout: parse(&rec[0])?, current: parse(&rec[1])? });
        }
        Self::validate(&points, 2)?;
        Ok(CalibrationTable { points })
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, CalibrationError> {
        let file = std::fs::File::open(path).map_err(|e| CalibrationError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn points(&self) -> &[CalPoint] {
        &self.points
    }

    pub fn max_current(&self) -> f64 {
        self.points.last().expect("table is nonempty").current
    }

    pub fn max_vout(&self) -> f64 {
        self.points.last().expect("table is nonempty").vout
    }

    /// Piecewise-linear V_out → amperes. Exact at nodes, clamped to the last
    /// node above range and to zero at or below 0 V.
    pub fn lookup_current(&self, vout: f64) -> f64 {
        interpolate(&self.points, vout, |p| p.vout, |p| p.current)
    }

    /// Piecewise-linear amperes → V_out; the inverse of [`Self::lookup_current`].
    pub fn vout_for_current(&self, current: f64) -> Result<f64, AnalogError> {
        if current < 0.0 {
            return Err(AnalogError::NegativeCurrent(current));
        }
        if current > self.max_current() {
            return Err(AnalogError::CurrentAboveCalibration { current, max: self.max_current() });
        }
        Ok(interpolate(&self.points, current, |p| p.current, |p| p.vout))
    }
}

fn interpolate(points: &[CalPoint], x: f64, key: impl Fn(&CalPoint) -> f64, val: impl Fn(&CalPoint) -> f64) -> f64 {
    if x.is_nan() || x <= key(&points[0]) {
        return val(&points[0]);
    }
    let last = points.last().expect("table is nonempty");
    if x >= key(last) {
        return val(last);
    }
    // first node with key > x; x lies in [hi-1, hi)
    let hi = points.partition_point(|p| key(p) <= x);
    let (a, b) = (&points[hi - 1], &points[hi]);
    if x == key(a) {
        return val(a);
    }
    let t = (x - key(a)) / (key(b) - key(a));
    val(a) + t * (val(b) - val(a))
}

/// Series shunt resistor of the sensing stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuntConfig {
    r_shunt: f64,
}

impl ShuntConfig {
    pub fn new(r_shunt: f64) -> Result<Self, AnalogError> {
        if !(r_shunt > 0.0 && r_shunt.is_finite()) {
            return Err(AnalogError::InvalidShunt(r_shunt));
        }
        Ok(ShuntConfig { r_shunt })
    }

    pub fn r_shunt(&self) -> f64 {
        self.r_shunt
    }
}

/// Voltage drop across the shunt, `V = I * R`.
pub fn shunt_voltage(current: f64, cfg: &ShuntConfig) -> Result<f64, AnalogError> {
    if current < 0.0 {
        return Err(AnalogError::NegativeCurrent(current));
    }
    Ok(current * cfg.r_shunt)
}

/// Sensed DC voltage for a load drawing `true_power` watts from `mains` volts.
pub fn sense_vout(true_power: f64, table: &CalibrationTable, mains: f64) -> Result<f64, AnalogError> {
    if true_power < 0.0 || true_power.is_nan() {
        return Err(AnalogError::NegativePower(true_power));
    }
    if mains.is_nan() || mains <= 0.0 {
        return Err(AnalogError::InvalidMains(mains));
    }
    table.vout_for_current(true_power / mains)
}
