//! The read/write credit card and its command handler.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::frame::{CommandCode, Frame, FrameError};
use crate::money::Money;

/// 8-byte card identifier, rendered as 16 upper-case hex characters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Uid(pub [u8; 8]);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("card uid must be 16 hex characters, got {0:?}")]
pub struct UidParseError(pub String);

impl fmt::Display for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02X}")?;
        }
        Ok(())
    }
}

impl FromStr for Uid {
    type Err = UidParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UidParseError(s.to_string());
        if s.len() != 16 || !s.is_ascii() {
            return Err(err());
        }
        let mut out = [0u8; 8];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| err())?;
        }
        Ok(Uid(out))
    }
}

impl Serialize for Uid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Uid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Reason byte carried in a NAK payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum NakReason {
    BadChecksum = 0x01,
    UnknownCommand = 0x02,
    ValueOutOfRange = 0x03,
    MalformedPayload = 0x04,
}

impl NakReason {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(NakReason::BadChecksum),
            0x02 => Some(NakReason::UnknownCommand),
            0x03 => Some(NakReason::ValueOutOfRange),
            0x04 => Some(NakReason::MalformedPayload),
            _ => None,
        }
    }

    /// NAK reason a card reports for a request it could not decode.
    pub fn for_decode_error(err: &FrameError) -> Self {
        match err {
            FrameError::UnknownCommand(_) => NakReason::UnknownCommand,
            _ => NakReason::BadChecksum,
        }
    }
}

/// Persistent state of one card.
///
/// The stored `checksum` is whatever the card holds; [`RfidCard::is_intact`]
/// compares it against [`card_checksum`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RfidCard {
    uid: Uid,
    credit: Money,
    write_count: u64,
    checksum: u8,
}

/// XOR of the uid bytes, the 8 big-endian bytes of the micro-RM credit and
/// the write counter modulo 256.
pub fn card_checksum(uid: &Uid, credit: Money, write_count: u64) -> u8 {
    let credit_x = credit.micro().to_be_bytes().iter().fold(0u8, |acc, b| acc ^ b);
    let uid_x = uid.0.iter().fold(0u8, |acc, b| acc ^ b);
    uid_x ^ credit_x ^ (write_count % 256) as u8
}

impl RfidCard {
    pub fn new(uid: Uid, credit: Money, write_count: u64) -> Self {
        let checksum = card_checksum(&uid, credit, write_count);
        RfidCard { uid, credit, write_count, checksum }
    }

    /// A blank card with zero credit.
    pub fn blank(uid: Uid) -> Self {
        Self::new(uid, Money::ZERO, 0)
    }

    /// Builds a card exactly as read from storage, without fixing the checksum.
    pub fn from_raw(uid: Uid, credit: Money, write_count: u64, checksum: u8) -> Self {
        RfidCard { uid, credit, write_count, checksum }
    }

    pub fn uid(&self) -> Uid {
        self.uid
    }

    pub fn credit(&self) -> Money {
        self.credit
    }

    pub fn write_count(&self) -> u64 {
        self.write_count
    }

    pub fn checksum(&self) -> u8 {
        self.checksum
    }

    pub fn is_intact(&self) -> bool {
        self.checksum == card_checksum(&self.uid, self.credit, self.write_count)
    }

    /// Replaces the credit, bumping the write counter.
    pub fn with_credit(&self, credit: Money) -> RfidCard {
        RfidCard::new(self.uid, credit, self.write_count + 1)
    }
}

fn nak(reason: NakReason) -> Frame {
    Frame { cmd: CommandCode::Nak, payload: vec![reason as u8] }
}

fn ack(echo: CommandCode, data: &[u8]) -> Frame {
    let mut payload = Vec::with_capacity(data.len() + 1);
    payload.push(echo as u8);
    payload.extend_from_slice(data);
    Frame { cmd: CommandCode::Ack, payload }
}

/// Executes one request frame against a card.
///
/// Credits travel as 4-byte big-endian sen. Non-request commands are
/// answered with NAK(0x02); the card is unchanged on any NAK.
pub fn apply_command(card: &RfidCard, frame: &Frame) -> (RfidCard, Frame) {
    match frame.cmd {
        CommandCode::ReadUid => (card.clone(), ack(CommandCode::ReadUid, &card.uid.0)),
        CommandCode::ReadCredit => {
            let sen = u32::try_from(card.credit.sen()).expect("capped credit fits in u32 sen");
            (card.clone(), ack(CommandCode::ReadCredit, &sen.to_be_bytes()))
        }
        CommandCode::WriteCredit => {
            let Ok(bytes) = <[u8; 4]>::try_from(frame.payload.as_slice()) else {
                return (card.clone(), nak(NakReason::MalformedPayload));
            };
            let sen = u32::from_be_bytes(bytes);
            match Money::from_sen(sen as u64) {
                Ok(credit) => (card.with_credit(credit), ack(CommandCode::WriteCredit, &bytes)),
                Err(_) => (card.clone(), nak(NakReason::ValueOutOfRange)),
            }
        }
        CommandCode::Ack | CommandCode::Nak => (card.clone(), nak(NakReason::UnknownCommand)),
    }
}
