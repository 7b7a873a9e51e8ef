//! Card store: JSON lines, one card per line.
//!
//! ```text
//! {"uid":"0102030405060708","credit_sen":500,"write_count":3,"checksum":"4E"}
//! ```
//!
//! `checksum` is optional on load; when present it must match the recomputed
//! value.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::card::{card_checksum, RfidCard, Uid};
use crate::money::Money;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("card store io: {0}")]
    Io(#[from] io::Error),
    #[error("card store line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("card store line {line}: checksum mismatch for {uid} (stored {stored:02X}, computed {computed:02X})")]
    Checksum { line: usize, uid: Uid, stored: u8, computed: u8 },
    #[error("card store line {line}: duplicate uid {uid}")]
    Duplicate { line: usize, uid: Uid },
    #[error("unknown card {0}")]
    UnknownCard(Uid),
    #[error("card {0} already exists")]
    AlreadyExists(Uid),
}

#[derive(Debug, Serialize, Deserialize)]
struct CardLine {
    uid: Uid,
    credit_sen: u64,
    write_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    checksum: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CardStore {
    cards: BTreeMap<Uid, RfidCard>,
}

impl CardStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a store file; a missing file yields an empty store.
    pub fn load(path: &Path) -> Result<Self, StoreError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let mut store = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let rec: CardLine =
                serde_json::from_str(raw).map_err(|e| StoreError::Parse { line, message: e.to_string() })?;
            let credit =
                Money::from_sen(rec.credit_sen).map_err(|e| StoreError::Parse { line, message: e.to_string() })?;
            let computed = card_checksum(&rec.uid, credit, rec.write_count);
            let stored = match rec.checksum.as_deref() {
                Some(hex) => u8::from_str_radix(hex, 16)
                    .map_err(|_| StoreError::Parse { line, message: format!("bad checksum {hex:?}") })?,
                None => computed,
            };
            if stored != computed {
                return Err(StoreError::Checksum { line, uid: rec.uid, stored, computed });
            }
            let card = RfidCard::from_raw(rec.uid, credit, rec.write_count, stored);
            if store.cards.insert(rec.uid, card).is_some() {
                return Err(StoreError::Duplicate { line, uid: rec.uid });
            }
        }
        Ok(store)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for card in self.cards.values() {
            let line = CardLine {
                uid: card.uid(),
                credit_sen: card.credit().sen(),
                write_count: card.write_count(),
                checksum: Some(format!("{:02X}", card.checksum())),
            };
            out.push_str(&serde_json::to_string(&line).expect("card line serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes the whole store through a temporary file and rename.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let tmp = path.with_extension("jsonl.tmp");
        fs::write(&tmp, self.to_jsonl())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn get(&self, uid: &Uid) -> Option<&RfidCard> {
        self.cards.get(uid)
    }

    pub fn contains(&self, uid: &Uid) -> bool {
        self.cards.contains_key(uid)
    }

    pub fn insert_new(&mut self, card: RfidCard) -> Result<(), StoreError> {
        if self.cards.contains_key(&card.uid()) {
            return Err(StoreError::AlreadyExists(card.uid()));
        }
        self.cards.insert(card.uid(), card);
        Ok(())
    }

    /// Replaces an existing card.
    pub fn put(&mut self, card: RfidCard) -> Result<(), StoreError> {
        match self.cards.get_mut(&card.uid()) {
            Some(slot) => {
                *slot = card;
                Ok(())
            }
            None => Err(StoreError::UnknownCard(card.uid())),
        }
    }

    pub fn cards(&self) -> impl Iterator<Item = &RfidCard> {
        self.cards.values()
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }
}
