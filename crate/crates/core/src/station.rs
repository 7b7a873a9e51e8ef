//! Top-up station: a host talking to a docked card over a duplex byte channel.
//!
//! The station never involves a meter. Every operation is a sequence of
//! request/reply exchanges; exactly one frame is in flight at a time.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::card::{apply_command, NakReason, RfidCard, Uid};
use crate::frame::{decode_frame, encode_frame, hex_bytes, CommandCode, Frame, FrameError, SOF};
use crate::money::{Money, MoneyError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FaultMode {
    #[default]
    None,
    /// Flips the low bit of the first byte following the next start-of-frame.
    CorruptNextByte,
    /// Silently discards the next frame written in either direction.
    DropNextFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HostToCard,
    CardToHost,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::HostToCard => "H>C",
            Direction::CardToHost => "C>H",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub direction: Direction,
    pub tick: u64,
    pub bytes: Vec<u8>,
    pub dropped: bool,
}

/// Duplex FIFO byte channel with one-shot fault injection.
#[derive(Debug, Default)]
pub struct SerialChannel {
    host_to_card: VecDeque<u8>,
    card_to_host: VecDeque<u8>,
    fault: FaultMode,
    tick: u64,
    trace: Vec<TraceEntry>,
}

impl SerialChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_fault(&mut self, fault: FaultMode) {
        self.fault = fault;
    }

    pub fn fault(&self) -> FaultMode {
        self.fault
    }

    pub fn write(&mut self, direction: Direction, bytes: &[u8]) {
        self.tick += 1;
        let mut bytes = bytes.to_vec();
        let mut dropped = false;
        match self.fault {
            FaultMode::None => {}
            FaultMode::DropNextFrame => {
                dropped = true;
                self.fault = FaultMode::None;
            }
            FaultMode::CorruptNextByte => {
                if let Some(pos) = bytes.iter().position(|&b| b == SOF) {
                    if let Some(b) = bytes.get_mut(pos + 1) {
                        *b ^= 0x01;
                        self.fault = FaultMode::None;
                    }
                }
            }
        }
        if !dropped {
            self.queue(direction).extend(bytes.iter().copied());
        }
        self.trace.push(TraceEntry { direction, tick: self.tick, bytes, dropped });
    }

    /// Drains every byte pending in one direction.
    pub fn read_all(&mut self, direction: Direction) -> Vec<u8> {
        self.queue(direction).drain(..).collect()
    }

    fn queue(&mut self, direction: Direction) -> &mut VecDeque<u8> {
        match direction {
            Direction::HostToCard => &mut self.host_to_card,
            Direction::CardToHost => &mut self.card_to_host,
        }
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    /// One line per transfer: `<tick> <dir> <hex bytes>[ (dropped)]`.
    pub fn hex_dump(&self) -> String {
        let mut out = String::new();
        for e in &self.trace {
            out.push_str(&format!("{:06} {} {}", e.tick, e.direction, hex_bytes(&e.bytes)));
            if e.dropped {
                out.push_str(" (dropped)");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("reply did not decode: {0}")]
    Decode(#[from] FrameError),
    #[error("card answered NAK {0:?}")]
    Nak(NakReason),
    #[error("card answered NAK with unknown reason 0x{0:02X}")]
    NakUnknown(u8),
    #[error("no reply from card")]
    NoReply,
    #[error("unexpected reply {0}")]
    UnexpectedReply(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StationError {
    #[error("a card is already docked")]
    AlreadyDocked,
    #[error("no card docked")]
    NoCard,
    #[error("top-up value out of range: {0}")]
    ValueOutOfRange(#[from] MoneyError),
    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("readback {read} does not match written {written}")]
    VerifyMismatch { written: Money, read: Money },
}

#[derive(Debug, Default)]
pub struct TopupStation {
    docked: Option<RfidCard>,
    channel: SerialChannel,
}

impl TopupStation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn channel(&self) -> &SerialChannel {
        &self.channel
    }

    pub fn channel_mut(&mut self) -> &mut SerialChannel {
        &mut self.channel
    }

    pub fn docked(&self) -> Option<&RfidCard> {
        self.docked.as_ref()
    }

    pub fn dock(&mut self, card: RfidCard) -> Result<(), StationError> {
        if self.docked.is_some() {
            return Err(StationError::AlreadyDocked);
        }
        self.docked = Some(card);
        Ok(())
    }

    pub fn undock(&mut self) -> Result<RfidCard, StationError> {
        self.docked.take().ok_or(StationError::NoCard)
    }

    /// Card side of the link: answer whatever request bytes are pending.
    fn card_respond(&mut self) {
        let raw = self.channel.read_all(Direction::HostToCard);
        if raw.is_empty() {
            return;
        }
        let Some(card) = self.docked.as_ref() else { return };
        let reply = match decode_frame(&raw) {
            Ok(request) => {
                let (next, reply) = apply_command(card, &request);
                self.docked = Some(next);
                reply
            }
            Err(err) => Frame { cmd: CommandCode::Nak, payload: vec![NakReason::for_decode_error(&err) as u8] },
        };
        self.channel.write(Direction::CardToHost, &reply.encode());
    }

    /// Sends one request and returns the decoded ACK payload (without the echo byte).
    fn transact(&mut self, cmd: CommandCode, payload: &[u8]) -> Result<Vec<u8>, StationError> {
        if self.docked.is_none() {
            return Err(StationError::NoCard);
        }
        let request = encode_frame(cmd, payload).expect("station requests are short");
        self.channel.write(Direction::HostToCard, &request);
        self.card_respond();
        let raw = self.channel.read_all(Direction::CardToHost);
        if raw.is_empty() {
            return Err(ProtocolError::NoReply.into());
        }
        let reply = decode_frame(&raw).map_err(ProtocolError::from)?;
        match reply.cmd {
            CommandCode::Ack if reply.payload.first() == Some(&(cmd as u8)) => Ok(reply.payload[1..].to_vec()),
            CommandCode::Nak => {
                let code = reply.payload.first().copied().unwrap_or(0);
                Err(NakReason::from_byte(code).map_or(ProtocolError::NakUnknown(code), ProtocolError::Nak).into())
            }
            _ => Err(ProtocolError::UnexpectedReply(reply.to_string()).into()),
        }
    }

    fn read_credit(&mut self) -> Result<Money, StationError> {
        let data = self.transact(CommandCode::ReadCredit, &[])?;
        let bytes = <[u8; 4]>::try_from(data.as_slice())
            .map_err(|_| ProtocolError::UnexpectedReply(format!("credit payload {}", hex_bytes(&data))))?;
        Ok(Money::from_sen(u32::from_be_bytes(bytes) as u64)?)
    }

    /// Reads uid and credit from the docked card.
    pub fn read(&mut self) -> Result<(Uid, Money), StationError> {
        let data = self.transact(CommandCode::ReadUid, &[])?;
        let uid = <[u8; 8]>::try_from(data.as_slice())
            .map_err(|_| ProtocolError::UnexpectedReply(format!("uid payload {}", hex_bytes(&data))))?;
        let credit = self.read_credit()?;
        Ok((Uid(uid), credit))
    }

    /// Sets (not adds) the card balance, then verifies it by reading back.
    pub fn write_credit(&mut self, amount: Money) -> Result<(), StationError> {
        if self.docked.is_none() {
            return Err(StationError::NoCard);
        }
        if !amount.is_whole_sen() {
            return Err(MoneyError::NotWholeSen.into());
        }
        let sen = u32::try_from(amount.sen()).expect("capped amount fits in u32 sen");
        let echo = self.transact(CommandCode::WriteCredit, &sen.to_be_bytes())?;
        if echo != sen.to_be_bytes() {
            return Err(ProtocolError::UnexpectedReply(format!("write echo {}", hex_bytes(&echo))).into());
        }
        let read = self.read_credit()?;
        verify_readback(amount, read)
    }
}

fn verify_readback(written: Money, read: Money) -> Result<(), StationError> {
    if written != read {
        return Err(StationError::VerifyMismatch { written, read });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn card(rm: u64) -> RfidCard {
        RfidCard::new(Uid([0x10, 0x20, 0x30, 0x40, 0x50, 0x60, 0x70, 0x80]), Money::from_rm(rm).unwrap(), 0)
    }

    #[test]
    fn dock_cycle() {
        let mut st = TopupStation::new();
        st.dock(card(5)).unwrap();
        assert_eq!(st.dock(card(1)), Err(StationError::AlreadyDocked));
        let back = st.undock().unwrap();
        assert_eq!(back.credit(), Money::from_rm(5).unwrap());
        assert_eq!(st.undock(), Err(StationError::NoCard));
        st.dock(back).unwrap();
        assert!(st.docked().is_some());
    }

    #[test]
    fn read_returns_uid_and_credit() {
        let mut st = TopupStation::new();
        let c = card(5);
        st.dock(c.clone()).unwrap();
        assert_eq!(st.read().unwrap(), (c.uid(), Money::from_rm(5).unwrap()));
        assert_eq!(st.undock().unwrap(), c);
        assert_eq!(st.read(), Err(StationError::NoCard));
    }

    #[test]
    fn sequential_topups_replace_balance() {
        let mut st = TopupStation::new();
        st.dock(card(5)).unwrap();
        st.write_credit(Money::from_rm(10).unwrap()).unwrap();
        assert_eq!(st.read().unwrap().1, Money::from_rm(10).unwrap());
        st.write_credit(Money::from_rm(20).unwrap()).unwrap();
        st.write_credit(Money::from_rm(30).unwrap()).unwrap();
        let out = st.undock().unwrap();
        assert_eq!(out.credit(), Money::from_rm(30).unwrap());
        assert_eq!(out.write_count(), 3);
        assert!(out.is_intact());
    }

    #[test]
    fn write_zero() {
        let mut st = TopupStation::new();
        st.dock(card(5)).unwrap();
        st.write_credit(Money::ZERO).unwrap();
        assert_eq!(st.undock().unwrap().credit(), Money::ZERO);
    }

    #[test]
    fn write_rejects_sub_sen_and_no_card() {
        let mut st = TopupStation::new();
        assert_eq!(st.write_credit(Money::from_rm(1).unwrap()), Err(StationError::NoCard));
        st.dock(card(5)).unwrap();
        let err = st.write_credit(Money::from_micro(1).unwrap()).unwrap_err();
        assert_eq!(err, StationError::ValueOutOfRange(MoneyError::NotWholeSen));
        assert_eq!(st.undock().unwrap().write_count(), 0);
    }

    #[test]
    fn corrupted_request_surfaces_bad_checksum() {
        let mut st = TopupStation::new();
        st.dock(card(5)).unwrap();
        st.channel_mut().set_fault(FaultMode::CorruptNextByte);
        assert_eq!(st.read(), Err(StationError::Protocol(ProtocolError::Nak(NakReason::BadChecksum))));
        assert_eq!(st.channel().fault(), FaultMode::None);
        // one-shot: the next read succeeds
        assert!(st.read().is_ok());
    }

    #[test]
    fn corrupted_write_leaves_card_unchanged() {
        let mut st = TopupStation::new();
        st.dock(card(5)).unwrap();
        st.channel_mut().set_fault(FaultMode::CorruptNextByte);
        assert!(st.write_credit(Money::from_rm(20).unwrap()).is_err());
        let out = st.undock().unwrap();
        assert_eq!(out.credit(), Money::from_rm(5).unwrap());
        assert_eq!(out.write_count(), 0);
    }

    #[test]
    fn dropped_frame_is_no_reply() {
        let mut st = TopupStation::new();
        st.dock(card(5)).unwrap();
        st.channel_mut().set_fault(FaultMode::DropNextFrame);
        assert_eq!(st.read(), Err(StationError::Protocol(ProtocolError::NoReply)));
        assert!(st.channel().hex_dump().contains("(dropped)"));
    }

    #[test]
    fn verify_mismatch_reported() {
        let written = Money::from_rm(10).unwrap();
        let read = Money::from_rm(9).unwrap();
        assert_eq!(verify_readback(written, read), Err(StationError::VerifyMismatch { written, read }));
        assert!(verify_readback(written, written).is_ok());
    }

    #[test]
    fn one_reply_per_request_on_trace() {
        let mut st = TopupStation::new();
        st.dock(card(5)).unwrap();
        st.read().unwrap();
        st.write_credit(Money::from_rm(10).unwrap()).unwrap();
        let dirs: Vec<_> = st.channel().trace().iter().map(|e| e.direction).collect();
        assert_eq!(dirs.len(), 8);
        for pair in dirs.chunks(2) {
            assert_eq!(pair, [Direction::HostToCard, Direction::CardToHost]);
        }
        let dump = st.channel().hex_dump();
        assert!(dump.starts_with("000001 H>C AA 01 00 01 55\n"), "{dump}");
    }
}
