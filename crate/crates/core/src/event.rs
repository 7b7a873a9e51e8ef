//! Append-only event records shared by the harness and the gateway.

use serde::{Deserialize, Serialize};

use crate::card::Uid;
use crate::meter::MeterState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Tick { state: MeterState, power_w: u32, credit_micro: u64, relay: bool, buzzer: bool },
    StateChange { from: MeterState, to: MeterState },
    Relay { closed: bool },
    Buzzer { active: bool },
    Sms { msisdn: String, body: String, sequence: u64 },
    Display { line1: String, line2: String },
    CardMinted { uid: Uid },
    Topup { uid: Uid, amount_sen: u64 },
    CardInserted { uid: Uid, credit_sen: u64 },
    Load { name: String, on: bool },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Tick { .. } => "tick",
            EventKind::StateChange { .. } => "state_change",
            EventKind::Relay { .. } => "relay",
            EventKind::Buzzer { .. } => "buzzer",
            EventKind::Sms { .. } => "sms",
            EventKind::Display { .. } => "display",
            EventKind::CardMinted { .. } => "card_minted",
            EventKind::Topup { .. } => "topup",
            EventKind::CardInserted { .. } => "card_inserted",
            EventKind::Load { .. } => "load",
        }
    }
}

/// One JSON object per line.
pub fn to_jsonl(events: &[EventRecord]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let e = EventRecord {
            seq: 7,
            t: 3.0,
            kind: EventKind::StateChange { from: MeterState::Active, to: MeterState::CutOff },
        };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"{"seq":7,"t":3.0,"kind":"state_change","from":"Active","to":"CutOff"}"#);
        let back: EventRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        assert_eq!(e.kind.name(), "state_change");
    }
}
