//! Byte-exact serial frames exchanged between a host and a card.
//!
//! Layout: `SOF(0xAA) | CMD | LEN | PAYLOAD[LEN] | CHK | EOF(0x55)`, where
//! `CHK = CMD ^ LEN ^ PAYLOAD[0] ^ .. ^ PAYLOAD[LEN-1]` and `LEN <= 32`.

use std::fmt;

use thiserror::Error;

pub const SOF: u8 = 0xAA;
pub const EOF: u8 = 0x55;
pub const MAX_PAYLOAD: usize = 32;
/// Bytes a frame carries besides its payload.
pub const FRAME_OVERHEAD: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CommandCode {
    ReadUid = 0x01,
    ReadCredit = 0x02,
    WriteCredit = 0x03,
    Ack = 0x04,
    Nak = 0x05,
}

impl CommandCode {
    pub fn is_request(self) -> bool {
        matches!(self, CommandCode::ReadUid | CommandCode::ReadCredit | CommandCode::WriteCredit)
    }
}

impl TryFrom<u8> for CommandCode {
    type Error = u8;

    fn try_from(byte: u8) -> Result<Self, u8> {
        match byte {
            0x01 => Ok(CommandCode::ReadUid),
            0x02 => Ok(CommandCode::ReadCredit),
            0x03 => Ok(CommandCode::WriteCredit),
            0x04 => Ok(CommandCode::Ack),
            0x05 => Ok(CommandCode::Nak),
            other => Err(other),
        }
    }
}

impl From<CommandCode> for u8 {
    fn from(cmd: CommandCode) -> u8 {
        cmd as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    PayloadTooLong(usize),
    #[error("bad start-of-frame byte 0x{0:02X}")]
    BadSof(u8),
    #[error("bad end-of-frame byte 0x{0:02X}")]
    BadEof(u8),
    #[error("bad checksum: expected 0x{expected:02X}, got 0x{actual:02X}")]
    BadChecksum { expected: u8, actual: u8 },
    #[error("unknown command byte 0x{0:02X}")]
    UnknownCommand(u8),
    #[error("truncated frame: need {needed} bytes, have {have}")]
    TruncatedFrame { needed: usize, have: usize },
    #[error("length byte {0} exceeds the {MAX_PAYLOAD}-byte limit")]
    LengthOutOfRange(u8),
    #[error("{0} trailing bytes after end-of-frame")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub cmd: CommandCode,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(cmd: CommandCode, payload: impl Into<Vec<u8>>) -> Result<Self, FrameError> {
        let payload = payload.into();
        if payload.len() > MAX_PAYLOAD {
            return Err(FrameError::PayloadTooLong(payload.len()));
        }
        Ok(Frame { cmd, payload })
    }

    pub fn encode(&self) -> Vec<u8> {
        // length was checked on construction
        encode_frame(self.cmd, &self.payload).expect("frame payload within limit")
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}[{}]", self.cmd, hex_bytes(&self.payload))
    }
}

pub fn checksum(cmd: u8, len: u8, payload: &[u8]) -> u8 {
    payload.iter().fold(cmd ^ len, |acc, b| acc ^ b)
}

pub fn encode_frame(cmd: CommandCode, payload: &[u8]) -> Result<Vec<u8>, FrameError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(FrameError::PayloadTooLong(payload.len()));
    }
    let cmd = u8::from(cmd);
    let len = payload.len() as u8;
    let mut out = Vec::with_capacity(payload.len() + FRAME_OVERHEAD);
    out.push(SOF);
    out.push(cmd);
    out.push(len);
    out.extend_from_slice(payload);
    out.push(checksum(cmd, len, payload));
    out.push(EOF);
    Ok(out)
}

/// Decodes exactly one frame; `raw` must contain nothing else.
pub fn decode_frame(raw: &[u8]) -> Result<Frame, FrameError> {
    let first = *raw.first().ok_or(FrameError::TruncatedFrame { needed: FRAME_OVERHEAD, have: 0 })?;
    if first != SOF {
        return Err(FrameError::BadSof(first));
    }
    if raw.len() < 3 {
        return Err(FrameError::TruncatedFrame { needed: FRAME_OVERHEAD, have: raw.len() });
    }
    let len = raw[2];
    if len as usize > MAX_PAYLOAD {
        return Err(FrameError::LengthOutOfRange(len));
    }
    let needed = len as usize + FRAME_OVERHEAD;
    if raw.len() < needed {
        return Err(FrameError::TruncatedFrame { needed, have: raw.len() });
    }
    let eof = raw[needed - 1];
    if eof != EOF {
        return Err(FrameError::BadEof(eof));
    }
    if raw.len() > needed {
        return Err(FrameError::TrailingBytes(raw.len() - needed));
    }

    let cmd = raw[1];
    let payload = &raw[3..3 + len as usize];
    let expected = checksum(cmd, len, payload);
    let actual = raw[needed - 2];
    if expected != actual {
        return Err(FrameError::BadChecksum { expected, actual });
    }
    let cmd = CommandCode::try_from(cmd).map_err(FrameError::UnknownCommand)?;
    Ok(Frame { cmd, payload: payload.to_vec() })
}

pub fn hex_bytes(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02X}")).collect::<Vec<_>>().join(" ")
}
