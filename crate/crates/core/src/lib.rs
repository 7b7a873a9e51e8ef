//! Simulation core of an RFID prepaid electricity meter.
//!
//! - [`card`] and [`frame`]: the read/write credit card and its serial protocol
//! - [`station`]: the top-up station that writes balances onto cards
//! - [`analog`]: current sensing and the calibration table
//! - [`meter`]: the controller state machine
//! - [`peripherals`]: relay, buzzer, LCD and GSM modem
//! - [`sim`]: scenario runner, tariff fit and trace export

pub mod analog;
pub mod card;
pub mod event;
pub mod frame;
pub mod meter;
pub mod money;
pub mod peripherals;
pub mod sim;
pub mod station;
pub mod store;

pub use card::{RfidCard, Uid};
pub use event::{EventKind, EventRecord};
pub use meter::{Meter, MeterConfig, MeterSnapshot, MeterState, Tariff};
pub use money::Money;
