//! Deterministic discrete-time driver.
//!
//! Each tick: total switched-on load watts → [`sense_vout`] → meter tick →
//! peripherals → event records.

pub mod fit;
pub mod scenario;
pub mod trace;

use std::fmt::Display;

use thiserror::Error;

use crate::analog::{sense_vout, AnalogError};
use crate::card::{RfidCard, Uid};
use crate::event::{EventKind, EventRecord};
use crate::meter::{Effect, Meter, MeterError, Step};
use crate::peripherals::{LcdDisplay, PeripheralError, Peripherals};

pub use scenario::{builtin_scenario, table1_scenarios, LoadProfile, Scenario, ScheduleEntry};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario field `{field}`: {reason}")]
    ScenarioInvalid { field: &'static str, reason: String },
    #[error("{watts} W from loads {loads:?} exceeds the calibrated range")]
    CurrentAboveCalibration { loads: Vec<String>, watts: f64 },
    #[error(transparent)]
    Meter(#[from] MeterError),
    #[error(transparent)]
    Peripheral(#[from] PeripheralError),
    #[error(transparent)]
    Analog(#[from] AnalogError),
    #[error("{0}")]
    Io(String),
}

impl SimError {
    pub(crate) fn invalid(field: &'static str, reason: impl Display) -> Self {
        SimError::ScenarioInvalid { field, reason: reason.to_string() }
    }
}

/// A meter wired to its peripherals, recording everything that happens.
#[derive(Debug, Clone)]
pub struct Rig {
    meter: Meter,
    peripherals: Peripherals,
    next_seq: u64,
    t0: f64,
    last_lcd: Option<LcdDisplay>,
}

impl Rig {
    pub fn new(meter: Meter, peripherals: Peripherals) -> Self {
        Self::resume(meter, peripherals, 0, 0.0)
    }

    /// Continues event numbering from `next_seq`, stamping events at
    /// `t0 + meter elapsed`.
    pub fn resume(meter: Meter, peripherals: Peripherals, next_seq: u64, t0: f64) -> Self {
        Rig { meter, peripherals, next_seq, t0, last_lcd: None }
    }

    pub fn meter(&self) -> &Meter {
        &self.meter
    }

    pub fn peripherals(&self) -> &Peripherals {
        &self.peripherals
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn now(&self) -> f64 {
        self.t0 + self.meter.snapshot().elapsed
    }

    /// Records an out-of-band event at the current simulated time.
    pub fn note(&mut self, kind: EventKind) -> EventRecord {
        let rec = EventRecord { seq: self.next_seq, t: self.now(), kind };
        self.next_seq += 1;
        rec
    }

    pub fn insert_card(&mut self, card: &RfidCard) -> Result<(RfidCard, Vec<EventRecord>), SimError> {
        let (returned, step) = self.meter.insert_card(card)?;
        let events = self.apply(&step, false)?;
        Ok((returned, events))
    }

    pub fn tick(&mut self, vout: f64) -> Result<Vec<EventRecord>, SimError> {
        let dt = self.meter.config().tick_seconds;
        let step = self.meter.tick(vout, dt)?;
        self.apply(&step, true)
    }

    fn apply(&mut self, step: &Step, is_tick: bool) -> Result<Vec<EventRecord>, SimError> {
        let now = self.t0 + step.snapshot.elapsed;
        self.peripherals.apply_effects(&step.effects, now)?;

        let mut kinds = Vec::new();
        for &(from, to) in &step.transitions {
            kinds.push(EventKind::StateChange { from, to });
        }
        let outbox = self.peripherals.modem.outbox();
        let mut sent = outbox.len() - step.effects.iter().filter(|e| matches!(e, Effect::SendSms { .. })).count();
        for effect in &step.effects {
            match effect {
                Effect::RelaySet(closed) => kinds.push(EventKind::Relay { closed: *closed }),
                Effect::BuzzerSet(active) => kinds.push(EventKind::Buzzer { active: *active }),
                Effect::SendSms { .. } => {
                    let m = &outbox[sent];
                    sent += 1;
                    kinds.push(EventKind::Sms { msisdn: m.msisdn.clone(), body: m.body.clone(), sequence: m.sequence });
                }
                Effect::DisplaySet { .. } => {
                    let lcd = &self.peripherals.lcd;
                    if self.last_lcd.as_ref() != Some(lcd) {
                        kinds.push(EventKind::Display { line1: lcd.line1.clone(), line2: lcd.line2.clone() });
                        self.last_lcd = Some(lcd.clone());
                    }
                }
            }
        }
        if is_tick {
            let s = &step.snapshot;
            kinds.push(EventKind::Tick {
                state: s.state,
                power_w: s.displayed_power,
                credit_micro: s.credit.micro(),
                relay: s.relay_closed,
                buzzer: s.buzzer_active,
            });
        }
        Ok(kinds
            .into_iter()
            .map(|kind| {
                let rec = EventRecord { seq: self.next_seq, t: now, kind };
                self.next_seq += 1;
                rec
            })
            .collect())
    }
}

/// Uid of the card a scenario starts with.
pub const SCENARIO_CARD_UID: Uid = Uid([0x5C, 0xE0, 0, 0, 0, 0, 0, 0x01]);

/// Runs a scenario to completion and returns its event trace.
pub fn run_scenario(scenario: &Scenario) -> Result<Vec<EventRecord>, SimError> {
    let config = scenario.validate()?;
    let steps = scenario.steps()?;
    let mains = config.mains_voltage;
    let table = config.calibration.clone();
    let mut rig = Rig::new(Meter::new(config)?, Peripherals::new());

    let card = RfidCard::new(SCENARIO_CARD_UID, scenario.initial_credit()?, 0);
    let (_, mut trace) = rig.insert_card(&card)?;

    let mut schedule: Vec<&ScheduleEntry> = scenario.schedule.iter().collect();
    schedule.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut pending = schedule.into_iter().peekable();
    let mut on = vec![false; scenario.loads.len()];

    for k in 0..steps {
        let tick_start = k as f64 * scenario.tick_seconds;
        while let Some(entry) = pending.next_if(|e| e.t <= tick_start + 1e-9) {
            let idx = scenario.loads.iter().position(|l| l.name == entry.load).expect("validated load name");
            on[idx] = entry.on;
        }
        let watts: f64 = scenario.loads.iter().zip(&on).filter(|(_, &o)| o).map(|(l, _)| l.measured_watts).sum();
        let vout = match sense_vout(watts, &table, mains) {
            Ok(v) => v,
            Err(AnalogError::CurrentAboveCalibration { .. }) => {
                let loads = scenario.loads.iter().zip(&on).filter(|(_, &o)| o).map(|(l, _)| l.name.clone()).collect();
                return Err(SimError::CurrentAboveCalibration { loads, watts });
            }
            Err(e) => return Err(e.into()),
        };
        trace.extend(rig.tick(vout)?);
    }
    Ok(trace)
}
