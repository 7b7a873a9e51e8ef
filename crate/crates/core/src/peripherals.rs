//! Emulated relay, buzzer, 16x2 LCD and AT-command GSM modem.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meter::Effect;
use crate::money::Money;

pub const LCD_WIDTH: usize = 16;
pub const SMS_MAX_CHARS: usize = 160;
pub const MAX_DISPLAY_WATTS: u32 = 9999;
pub const CTRL_Z: char = '\u{1A}';

pub const DEFAULT_ALERT_TEMPLATE: &str =
    "ALERT: prepaid meter credit low. {credit} remaining. Supply cuts off at RM0.00.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PeripheralError {
    #[error("value out of display range: {0}")]
    ValueOutOfRange(String),
    #[error("sms body is {0} characters, limit is {SMS_MAX_CHARS}")]
    BodyTooLong(usize),
    #[error("invalid msisdn {0:?}")]
    InvalidMsisdn(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LcdDisplay {
    pub line1: String,
    pub line2: String,
}

impl Default for LcdDisplay {
    fn default() -> Self {
        LcdDisplay { line1: " ".repeat(LCD_WIDTH), line2: " ".repeat(LCD_WIDTH) }
    }
}

fn pad16(s: String) -> String {
    format!("{s:<width$}", width = LCD_WIDTH)
}

/// `PWR:   57W      ` / `CR: RM005.00    `
pub fn lcd_render(power_w: u32, credit: Money) -> Result<LcdDisplay, PeripheralError> {
    if power_w > MAX_DISPLAY_WATTS {
        return Err(PeripheralError::ValueOutOfRange(format!("{power_w} W")));
    }
    let sen = credit.sen();
    let line1 = pad16(format!("PWR:{power_w:>5}W"));
    let line2 = pad16(format!("CR: RM{:03}.{:02}", sen / 100, sen % 100));
    debug_assert_eq!(line1.chars().count(), LCD_WIDTH);
    debug_assert_eq!(line2.chars().count(), LCD_WIDTH);
    Ok(LcdDisplay { line1, line2 })
}

/// Substitutes `{credit}` (rendered as `RM0.50`) into an alert template.
pub fn render_alert(template: &str, credit: Money) -> String {
    template.replace("{credit}", &credit.to_string())
}

pub fn default_alert_body(credit: Money) -> String {
    render_alert(DEFAULT_ALERT_TEMPLATE, credit)
}

pub fn validate_msisdn(msisdn: &str) -> Result<(), PeripheralError> {
    let digits = msisdn.strip_prefix('+').unwrap_or(msisdn);
    if digits.is_empty() || digits.len() > 15 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(PeripheralError::InvalidMsisdn(msisdn.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmsMessage {
    pub msisdn: String,
    pub body: String,
    pub sent_at: f64,
    pub sequence: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineDir {
    Tx,
    Rx,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptLine {
    pub dir: LineDir,
    pub text: String,
}

impl fmt::Display for TranscriptLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arrow = match self.dir {
            LineDir::Tx => ">>",
            LineDir::Rx => "<<",
        };
        write!(f, "{arrow} {}", self.text.replace(CTRL_Z, "^Z"))
    }
}

/// Text-mode SMS modem. The outbox only grows.
#[derive(Debug, Clone, Default)]
pub struct GsmModem {
    outbox: Vec<SmsMessage>,
    transcript: Vec<TranscriptLine>,
    next_ref: u64,
}

impl GsmModem {
    pub fn new() -> Self {
        GsmModem { outbox: Vec::new(), transcript: Vec::new(), next_ref: 1 }
    }

    /// Restores a modem from a persisted outbox; message references continue
    /// after the highest stored sequence.
    pub fn with_outbox(outbox: Vec<SmsMessage>) -> Self {
        let next_ref = outbox.iter().map(|m| m.sequence).max().unwrap_or(0) + 1;
        GsmModem { outbox, transcript: Vec::new(), next_ref }
    }

    fn tx(&mut self, text: impl Into<String>) {
        self.transcript.push(TranscriptLine { dir: LineDir::Tx, text: text.into() });
    }

    fn rx(&mut self, text: impl Into<String>) {
        self.transcript.push(TranscriptLine { dir: LineDir::Rx, text: text.into() });
    }

    pub fn send_sms(&mut self, msisdn: &str, body: &str, now: f64) -> Result<&SmsMessage, PeripheralError> {
        let chars = body.chars().count();
        if chars > SMS_MAX_CHARS {
            return Err(PeripheralError::BodyTooLong(chars));
        }
        validate_msisdn(msisdn)?;
        let n = self.next_ref;
        self.next_ref += 1;
        self.tx("AT");
        self.rx("OK");
        self.tx("AT+CMGF=1");
        self.rx("OK");
        self.tx(format!("AT+CMGS=\"{msisdn}\""));
        self.rx("> ");
        self.tx(format!("{body}{CTRL_Z}"));
        self.rx(format!("+CMGS: {n}"));
        self.rx("OK");
        self.outbox.push(SmsMessage { msisdn: msisdn.to_string(), body: body.to_string(), sent_at: now, sequence: n });
        Ok(self.outbox.last().expect("just pushed"))
    }

    pub fn outbox(&self) -> &[SmsMessage] {
        &self.outbox
    }

    pub fn transcript(&self) -> &[TranscriptLine] {
        &self.transcript
    }

    pub fn transcript_text(&self) -> String {
        self.transcript.iter().map(|l| format!("{l}\n")).collect()
    }
}

/// Everything the controller drives.
#[derive(Debug, Clone, Default)]
pub struct Peripherals {
    pub relay_closed: bool,
    pub buzzer_active: bool,
    pub lcd: LcdDisplay,
    pub modem: GsmModem,
}

impl Peripherals {
    pub fn new() -> Self {
        Peripherals { modem: GsmModem::new(), ..Default::default() }
    }

    pub fn with_modem(modem: GsmModem) -> Self {
        Peripherals { modem, ..Default::default() }
    }

    /// Executes effects in order. Effects produced by a validated meter never fail.
    pub fn apply_effects(&mut self, effects: &[Effect], now: f64) -> Result<(), PeripheralError> {
        for effect in effects {
            match effect {
                Effect::RelaySet(closed) => self.relay_closed = *closed,
                Effect::BuzzerSet(active) => self.buzzer_active = *active,
                Effect::DisplaySet { power_w, credit } => {
                    self.lcd = lcd_render((*power_w).min(MAX_DISPLAY_WATTS), *credit)?;
                }
                Effect::SendSms { msisdn, body } => {
                    self.modem.send_sms(msisdn, body, now)?;
                }
            }
        }
        Ok(())
    }
}
