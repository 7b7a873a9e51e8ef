//! Meter controller: card acceptance, per-tick metering, low-credit alert and cutoff.
//!
//! ```text
//! AwaitingCard --card--> Active --threshold--> LowCredit
//!                          |                      |
//!                          +----zero credit-------+--> CutOff --card--> Active
//! ```
//!
//! The relay is closed exactly in `Active` and `LowCredit`; the buzzer sounds
//! exactly in `LowCredit`. Side effects are returned as [`Effect`] values for
//! the peripherals to execute in order.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analog::{default_calibration, CalibrationTable};
use crate::card::RfidCard;
use crate::money::Money;
use crate::peripherals::{render_alert, validate_msisdn, DEFAULT_ALERT_TEMPLATE, SMS_MAX_CHARS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeterState {
    AwaitingCard,
    Active,
    LowCredit,
    CutOff,
}

impl MeterState {
    pub fn relay_closed(self) -> bool {
        matches!(self, MeterState::Active | MeterState::LowCredit)
    }

    pub fn buzzer_active(self) -> bool {
        self == MeterState::LowCredit
    }

    /// Whether `self -> next` is a legal controller transition.
    pub fn can_transition_to(self, next: MeterState) -> bool {
        use MeterState::*;
        matches!(
            (self, next),
            (AwaitingCard, Active) | (Active, LowCredit) | (Active, CutOff) | (LowCredit, CutOff) | (CutOff, Active)
        )
    }
}

impl fmt::Display for MeterState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeterError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("card failed its integrity check")]
    InvalidCard,
    #[error("operation not allowed in state {0}")]
    WrongState(MeterState),
    #[error("negative current {0} A")]
    NegativeCurrent(String),
    #[error("tick length must be positive, got {0} s")]
    InvalidTick(String),
}

/// Affine deduction rule: `(base + rate * P) * dt` micro-RM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    /// micro-RM per second while the relay is closed
    pub base_per_second: f64,
    /// micro-RM per watt-second
    pub rate_per_watt_second: f64,
}

impl Tariff {
    pub fn new(base_per_second: f64, rate_per_watt_second: f64) -> Result<Self, MeterError> {
        let t = Tariff { base_per_second, rate_per_watt_second };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), MeterError> {
        let bad = |reason: &str| Err(MeterError::InvalidConfig { field: "tariff", reason: reason.to_string() });
        let (b, r) = (self.base_per_second, self.rate_per_watt_second);
        if !(b.is_finite() && r.is_finite()) || b < 0.0 || r < 0.0 {
            return bad("coefficients must be finite and non-negative");
        }
        if b == 0.0 && r == 0.0 {
            return bad("base and rate cannot both be zero");
        }
        Ok(())
    }

    /// Exact (unrounded) charge in micro-RM.
    pub fn charge(&self, power_w: f64, dt: f64) -> f64 {
        (self.base_per_second + self.rate_per_watt_second * power_w) * dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeterConfig {
    pub mains_voltage: f64,
    pub low_credit_threshold: Money,
    pub tariff: Tariff,
    pub tick_seconds: f64,
    pub alert_msisdn: String,
    /// `{credit}` is replaced with e.g. `RM0.50`.
    pub alert_template: String,
    pub calibration: CalibrationTable,
}

impl Default for MeterConfig {
    fn default() -> Self {
        MeterConfig {
            mains_voltage: 240.0,
            low_credit_threshold: Money::from_sen(50).expect("RM0.50 within cap"),
            tariff: crate::sim::fit::table1_tariff(),
            tick_seconds: 1.0,
            alert_msisdn: "+60123456789".to_string(),
            alert_template: DEFAULT_ALERT_TEMPLATE.to_string(),
            calibration: default_calibration(),
        }
    }
}

impl MeterConfig {
    pub fn validate(&self) -> Result<(), MeterError> {
        let bad = |field, reason: &str| Err(MeterError::InvalidConfig { field, reason: reason.to_string() });
        if !(self.mains_voltage > 0.0 && self.mains_voltage.is_finite()) {
            return bad("mains_voltage", "must be positive");
        }
        if !(self.tick_seconds > 0.0 && self.tick_seconds.is_finite()) {
            return bad("tick_seconds", "must be positive");
        }
        self.tariff.validate()?;
        if let Err(e) = validate_msisdn(&self.alert_msisdn) {
            return bad("alert_msisdn", &e.to_string());
        }
        if render_alert(&self.alert_template, Money::CAP).chars().count() > SMS_MAX_CHARS {
            return bad("alert_template", "rendered alert exceeds 160 characters");
        }
        Ok(())
    }
}

/// Commands for the peripherals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Effect {
    RelaySet(bool),
    BuzzerSet(bool),
    DisplaySet { power_w: u32, credit: Money },
    SendSms { msisdn: String, body: String },
}

/// Observable meter state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterSnapshot {
    pub state: MeterState,
    pub displayed_power: u32,
    pub credit: Money,
    pub relay_closed: bool,
    pub buzzer_active: bool,
    pub elapsed: f64,
}

/// Result of one controller step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub snapshot: MeterSnapshot,
    pub effects: Vec<Effect>,
    pub transitions: Vec<(MeterState, MeterState)>,
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// `mains * current`
pub fn compute_power(current: f64, mains: f64) -> Result<f64, MeterError> {
    if current < 0.0 || current.is_nan() {
        return Err(MeterError::NegativeCurrent(current.to_string()));
    }
    Ok(mains * current)
}

/// One-shot deduction: the charge is rounded half-up to whole micro-RM and
/// the result floors at zero.
pub fn deduct(credit: Money, power_w: f64, dt: f64, tariff: &Tariff) -> Money {
    let charge = round_half_up(tariff.charge(power_w, dt));
    credit.saturating_sub_micro(charge as u64)
}

#[derive(Debug, Clone)]
pub struct Meter {
    config: MeterConfig,
    state: MeterState,
    credit: Money,
    displayed_power: u32,
    elapsed: f64,
    // Exact charge accrued since the last card, and the whole micro-RM
    // already taken from credit. Per-tick deduction is the difference of the
    // rounded running total, so rounding error never accumulates.
    accrued_exact: f64,
    charged_micro: u64,
}

impl Meter {
    pub fn new(config: MeterConfig) -> Result<Self, MeterError> {
        config.validate()?;
        Ok(Meter {
            config,
            state: MeterState::AwaitingCard,
            credit: Money::ZERO,
            displayed_power: 0,
            elapsed: 0.0,
            accrued_exact: 0.0,
            charged_micro: 0,
        })
    }

    pub fn config(&self) -> &MeterConfig {
        &self.config
    }

    pub fn state(&self) -> MeterState {
        self.state
    }

    pub fn credit(&self) -> Money {
        self.credit
    }

    pub fn snapshot(&self) -> MeterSnapshot {
        MeterSnapshot {
            state: self.state,
            displayed_power: self.displayed_power,
            credit: self.credit,
            relay_closed: self.state.relay_closed(),
            buzzer_active: self.state.buzzer_active(),
            elapsed: self.elapsed,
        }
    }

    fn display(&self) -> Effect {
        Effect::DisplaySet { power_w: self.displayed_power, credit: self.credit }
    }

    /// Loads a card's balance into the meter. The returned card has been
    /// written down to zero; a zero-balance card is returned untouched.
    pub fn insert_card(&mut self, card: &RfidCard) -> Result<(RfidCard, Step), MeterError> {
        if !matches!(self.state, MeterState::AwaitingCard | MeterState::CutOff) {
            return Err(MeterError::WrongState(self.state));
        }
        if !card.is_intact() {
            return Err(MeterError::InvalidCard);
        }
        if card.credit().is_zero() {
            let step = Step { snapshot: self.snapshot(), effects: vec![], transitions: vec![] };
            return Ok((card.clone(), step));
        }
        let from = self.state;
        self.credit = card.credit();
        self.state = MeterState::Active;
        self.displayed_power = 0;
        self.accrued_exact = 0.0;
        self.charged_micro = 0;
        let effects = vec![Effect::RelaySet(true), self.display()];
        let step = Step { snapshot: self.snapshot(), effects, transitions: vec![(from, MeterState::Active)] };
        Ok((card.with_credit(Money::ZERO), step))
    }

    /// Advances the controller by `dt` seconds with `vout` on the sensing input.
    pub fn tick(&mut self, vout: f64, dt: f64) -> Result<Step, MeterError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(MeterError::InvalidTick(dt.to_string()));
        }
        self.elapsed += dt;
        let mut effects = Vec::new();
        let mut transitions = Vec::new();

        if !self.state.relay_closed() {
            self.displayed_power = 0;
            effects.push(self.display());
            return Ok(Step { snapshot: self.snapshot(), effects, transitions });
        }

        let current = self.config.calibration.lookup_current(vout);
        let power = compute_power(current, self.config.mains_voltage)?;
        self.accrued_exact += self.config.tariff.charge(power, dt);
        let target = round_half_up(self.accrued_exact) as u64;
        let step_charge = target.saturating_sub(self.charged_micro);
        self.charged_micro = target;
        self.credit = self.credit.saturating_sub_micro(step_charge);
        self.displayed_power = round_half_up(power) as u32;

        let alert = |credit| Effect::SendSms {
            msisdn: self.config.alert_msisdn.clone(),
            body: render_alert(&self.config.alert_template, credit),
        };

        if self.credit.is_zero() {
            // alert before cut when the threshold was skipped in one tick
            if self.state == MeterState::Active {
                effects.push(alert(self.credit));
            }
            if self.state == MeterState::LowCredit {
                effects.push(Effect::BuzzerSet(false));
            }
            effects.push(Effect::RelaySet(false));
            transitions.push((self.state, MeterState::CutOff));
            self.state = MeterState::CutOff;
            self.displayed_power = 0;
        } else if self.state == MeterState::Active && self.credit <= self.config.low_credit_threshold {
            effects.push(Effect::BuzzerSet(true));
            effects.push(alert(self.credit));
            transitions.push((MeterState::Active, MeterState::LowCredit));
            self.state = MeterState::LowCredit;
        }
        effects.push(self.display());
        Ok(Step { snapshot: self.snapshot(), effects, transitions })
    }
}
