//! FIT container codec.
//!
//! [`parse_fit`] turns bytes into definition/data messages with CRC checks,
//! [`decode_activity`] maps the activity-relevant messages onto the domain
//! model, and [`encode_fixture`] writes small synthetic files for tests.

mod crc;
mod decode;
mod encode;
mod parse;
mod types;

use thiserror::Error;

pub use crc::{crc16, crc16_update};
pub use decode::{decode_activities, decode_activity, read_activities, semicircles_to_degrees};
pub use encode::{encode_fixture, ActivityFixture, FitWriter, FixtureSample, HeaderStyle};
pub use parse::{
    parse_fit, parse_fit_chain, parse_fit_with, MessageKind, ParseOptions, RawField, RawFitFile,
    RawMessage,
};
pub use types::{mesg, BaseType, Endianness, FIT_EPOCH_OFFSET, TIMESTAMP_FIELD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrcKind {
    Header,
    File,
}

impl std::fmt::Display for CrcKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CrcKind::Header => "header",
            CrcKind::File => "file",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("truncated file: need {needed} bytes, have {available}")]
    TruncatedFile { needed: usize, available: usize },
    #[error("bad signature: \".FIT\" marker missing")]
    BadSignature,
    #[error("unsupported header size {0}")]
    BadHeaderSize(u8),
    #[error("CrcMismatch: {kind} CRC stored 0x{stored:04X}, computed 0x{computed:04X}")]
    CrcMismatch {
        kind: CrcKind,
        stored: u16,
        computed: u16,
    },
    #[error("data message at offset {offset} uses undefined local type {local_type}")]
    OrphanDataMessage { local_type: u8, offset: usize },
    #[error("unknown base type 0x{byte:02X} at offset {offset}")]
    UnknownBaseType { byte: u8, offset: usize },
    #[error("file contains no record messages")]
    NoRecords,
    #[error("{field} value {value} does not fit its FIT field")]
    ValueOutOfRange { field: &'static str, value: f64 },
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
}
