//! Least-squares tariff fit from observed cutoff times.
//!
//! A card holding `credit` runs a constant load of `P` watts until cutoff at
//! `T` seconds, so `credit / T = base + rate * P`. Each observation gives one
//! point on that line; the fit minimises the squared error in that
//! per-second space subject to `base, rate >= 0`.

use thiserror::Error;

use crate::meter::Tariff;
use crate::money::Money;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need observations at two or more distinct powers")]
    Underdetermined,
    #[error("no non-negative tariff fits the observations")]
    InfeasibleFit,
    #[error("observation {index}: power must be >= 0 and cutoff time > 0")]
    InvalidObservation { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffObservation {
    pub watts: f64,
    pub cutoff_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TariffFit {
    /// Coefficients in micro-RM units.
    pub tariff: Tariff,
    /// Predicted minus observed cutoff time, per observation, in seconds.
    pub residuals: Vec<f64>,
}

impl TariffFit {
    pub fn base_rm_per_second(&self) -> f64 {
        self.tariff.base_per_second / 1e6
    }

    pub fn rate_rm_per_watt_second(&self) -> f64 {
        self.tariff.rate_per_watt_second / 1e6
    }

    /// Cutoff time a constant `watts` load would see for `credit`.
    pub fn predict_cutoff(&self, credit: Money, watts: f64) -> f64 {
        credit.micro() as f64 / self.tariff.charge(watts, 1.0)
    }
}

/// Cutoff observations from the light-bulb experiment: the middle of the
/// 5 s sampling window in which each bulb first reads zero.
pub fn table1_observations() -> Vec<CutoffObservation> {
    [(57.0, 32.5), (24.0, 42.5), (14.0, 47.5)]
        .into_iter()
        .map(|(watts, cutoff_seconds)| CutoffObservation { watts, cutoff_seconds })
        .collect()
}

pub fn table1_credit() -> Money {
    Money::from_rm(5).expect("RM5 within cap")
}

/// Tariff fitted to [`table1_observations`] with RM5 of credit.
pub fn table1_tariff() -> Tariff {
    fit_tariff(&table1_observations(), table1_credit()).expect("table 1 observations are well posed").tariff
}

pub fn fit_tariff(observations: &[CutoffObservation], credit: Money) -> Result<TariffFit, FitError> {
    for (index, o) in observations.iter().enumerate() {
        let ok = o.watts.is_finite() && o.watts >= 0.0 && o.cutoff_seconds.is_finite() && o.cutoff_seconds > 0.0;
        if !ok {
            return Err(FitError::InvalidObservation { index });
        }
    }
    let first = observations.first().ok_or(FitError::Underdetermined)?;
    if observations.iter().all(|o| o.watts == first.watts) {
        return Err(FitError::Underdetermined);
    }

    let c = credit.micro() as f64;
    let pts: Vec<(f64, f64)> = observations.iter().map(|o| (o.watts, c / o.cutoff_seconds)).collect();
    let n = pts.len() as f64;
    let sp: f64 = pts.iter().map(|(p, _)| p).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let spp: f64 = pts.iter().map(|(p, _)| p * p).sum();
    let spy: f64 = pts.iter().map(|(p, y)| p * y).sum();
    let sse = |b: f64, r: f64| pts.iter().map(|(p, y)| (y - b - r * p).powi(2)).sum::<f64>();

    let det = n * spp - sp * sp;
    let rate = (n * spy - sp * sy) / det;
    let base = (sy - rate * sp) / n;

    let (base, rate) = if base >= 0.0 && rate >= 0.0 {
        (base, rate)
    } else {
        // optimum lies on the boundary of the feasible quadrant
        let rate_only = (0.0, if spp > 0.0 { (spy / spp).max(0.0) } else { 0.0 });
        let base_only = ((sy / n).max(0.0), 0.0);
        if sse(rate_only.0, rate_only.1) <= sse(base_only.0, base_only.1) {
            rate_only
        } else {
            base_only
        }
    };
    let tariff = Tariff::new(base, rate).map_err(|_| FitError::InfeasibleFit)?;
    let residuals = observations.iter().map(|o| c / tariff.charge(o.watts, 1.0) - o.cutoff_seconds).collect();
    Ok(TariffFit { tariff, residuals })
}
