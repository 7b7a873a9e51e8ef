//! Fixed-point Ringgit amounts.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MICRO_PER_RM: u64 = 1_000_000;
pub const MICRO_PER_SEN: u64 = 10_000;

/// Largest balance a card or meter may hold: RM 10,000.
pub const MONEY_CAP_MICRO: u64 = 10_000 * MICRO_PER_RM;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoneyError {
    #[error("amount {micro_rm} micro-RM exceeds the RM10000.00 cap")]
    AboveCap { micro_rm: u64 },
    #[error("amount is not a whole number of sen")]
    NotWholeSen,
    #[error("malformed amount {0:?}")]
    Malformed(String),
}

/// Non-negative credit in integer micro-Ringgit (1 RM = 1,000,000).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(u64);

impl Money {
    pub const ZERO: Money = Money(0);
    pub const CAP: Money = Money(MONEY_CAP_MICRO);

    pub fn from_micro(micro_rm: u64) -> Result<Self, MoneyError> {
        if micro_rm > MONEY_CAP_MICRO {
            return Err(MoneyError::AboveCap { micro_rm });
        }
        Ok(Money(micro_rm))
    }

    pub fn from_sen(sen: u64) -> Result<Self, MoneyError> {
        let micro_rm = sen.checked_mul(MICRO_PER_SEN).ok_or(MoneyError::AboveCap { micro_rm: u64::MAX })?;
        Self::from_micro(micro_rm)
    }

    pub fn from_rm(rm: u64) -> Result<Self, MoneyError> {
        let micro_rm = rm.checked_mul(MICRO_PER_RM).ok_or(MoneyError::AboveCap { micro_rm: u64::MAX })?;
        Self::from_micro(micro_rm)
    }

    /// Parses a decimal Ringgit amount such as `"5"`, `"10.5"` or `"9999.99"`.
    /// At most two decimals are accepted.
    pub fn parse_rm(text: &str) -> Result<Self, MoneyError> {
        let malformed = || MoneyError::Malformed(text.to_string());
        let text = text.trim();
        let text = text.strip_prefix("RM").unwrap_or(text);
        let (whole, frac) = match text.split_once('.') {
            Some((w, f)) => (w, f),
            None => (text, ""),
        };
        if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        if frac.len() > 2 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let rm: u64 = whole.parse().map_err(|_| malformed())?;
        let mut sen: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| malformed())? };
        if frac.len() == 1 {
            sen *= 10;
        }
        let total = rm.checked_mul(100).and_then(|s| s.checked_add(sen)).ok_or_else(malformed)?;
        Self::from_sen(total)
    }

    pub fn micro(self) -> u64 {
        self.0
    }

    /// Whole sen, rounded down.
    pub fn sen(self) -> u64 {
        self.0 / MICRO_PER_SEN
    }

    pub fn is_whole_sen(self) -> bool {
        self.0.is_multiple_of(MICRO_PER_SEN)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn saturating_sub_micro(self, micro_rm: u64) -> Money {
        Money(self.0.saturating_sub(micro_rm))
    }

    /// Ringgit as a float, for display and JSON only.
    pub fn as_rm_f64(self) -> f64 {
        self.0 as f64 / MICRO_PER_RM as f64
    }

    /// Two-decimal rendering without currency prefix, sub-sen truncated.
    pub fn to_rm_string(self) -> String {
        let sen = self.sen();
        format!("{}.{:02}", sen / 100, sen % 100)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RM{}", self.to_rm_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_is_enforced() {
        assert!(Money::from_rm(10_000).is_ok());
        assert_eq!(Money::from_micro(MONEY_CAP_MICRO + 1), Err(MoneyError::AboveCap { micro_rm: MONEY_CAP_MICRO + 1 }));
        assert!(Money::from_sen(u64::MAX).is_err());
    }

    #[test]
    fn parse_rm_accepts_up_to_two_decimals() {
        assert_eq!(Money::parse_rm("5").unwrap().sen(), 500);
        assert_eq!(Money::parse_rm("10.5").unwrap().sen(), 1050);
        assert_eq!(Money::parse_rm("RM9999.99").unwrap().sen(), 999_999);
        assert!(Money::parse_rm("5.005").is_err());
        assert!(Money::parse_rm("-1").is_err());
        assert!(Money::parse_rm("").is_err());
        assert!(Money::parse_rm("10001").is_err());
    }

    #[test]
    fn display_truncates_sub_sen() {
        assert_eq!(Money::from_micro(4_509_999).unwrap().to_string(), "RM4.50");
        assert_eq!(Money::ZERO.to_string(), "RM0.00");
        assert_eq!(Money::from_micro(1).unwrap().to_string(), "RM0.00");
    }
}
