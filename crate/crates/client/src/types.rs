//! JSON bodies exchanged with the gateway. Amounts travel as integer sen;
//! `credit_rm` strings are for display.

use serde::{Deserialize, Serialize};

use meter_core::card::{RfidCard, Uid};
use meter_core::meter::{MeterSnapshot, MeterState};
use meter_core::peripherals::LcdDisplay;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterView {
    pub state: MeterState,
    pub displayed_power: u32,
    pub credit_sen: u64,
    pub credit_rm: String,
    pub relay_closed: bool,
    pub buzzer_active: bool,
    pub elapsed: f64,
    pub lcd_line1: String,
    pub lcd_line2: String,
}

impl MeterView {
    pub fn new(snapshot: &MeterSnapshot, lcd: &LcdDisplay) -> Self {
        MeterView {
            state: snapshot.state,
            displayed_power: snapshot.displayed_power,
            credit_sen: snapshot.credit.sen(),
            credit_rm: snapshot.credit.to_rm_string(),
            relay_closed: snapshot.relay_closed,
            buzzer_active: snapshot.buzzer_active,
            elapsed: snapshot.elapsed,
            lcd_line1: lcd.line1.clone(),
            lcd_line2: lcd.line2.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardView {
    pub uid: Uid,
    pub credit_sen: u64,
    pub credit_rm: String,
    pub write_count: u64,
}

impl From<&RfidCard> for CardView {
    fn from(card: &RfidCard) -> Self {
        CardView {
            uid: card.uid(),
            credit_sen: card.credit().sen(),
            credit_rm: card.credit().to_rm_string(),
            write_count: card.write_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadView {
    pub name: String,
    pub rated_watts: f64,
    pub measured_watts: f64,
    pub on: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertCardRequest {
    pub card_uid: Uid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadRequest {
    pub on: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopupRequest {
    pub card_uid: Uid,
    pub amount_sen: u64,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}
