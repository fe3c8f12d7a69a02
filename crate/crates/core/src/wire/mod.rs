//! Bit-exact field encoding and the registry of computed-field handlers.

mod bits;
pub mod checksum;
mod handlers;

pub use bits::{read_bits, write_bits, BitReader, BitWriter, Bits};
pub use checksum::PseudoHeader;
pub use handlers::{FieldHandler, HandlerContext, HandlerRegistry};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{FieldSpec, Width};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("value of width {actual} does not match field width {expected}")]
    WidthMismatch { expected: u32, actual: u32 },
    #[error("value {value:#x} does not fit in {width} bits")]
    ValueOverflow { width: u32, value: u64 },
    #[error("cannot parse literal `{0}`")]
    BadLiteral(String),
    #[error("checksum input is empty")]
    EmptyInput,
    #[error("handler `{0}` is not registered")]
    UnknownHandler(String),
    #[error("handler `{0}` needs a pseudo-header context")]
    MissingContext(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    #[default]
    Big,
    Little,
}

/// Converts a field value to its on-wire bit order.
pub fn encode_field(spec: &FieldSpec, value: &Bits) -> Result<Bits, WireError> {
    if let Width::Bits(w) = spec.width {
        if value.width() != w {
            return Err(WireError::WidthMismatch {
                expected: w,
                actual: value.width(),
            });
        }
    }
    Ok(swap_if_little(spec.endianness, value))
}

/// Inverse of [`encode_field`].
pub fn decode_field(spec: &FieldSpec, wire: &Bits) -> Result<Bits, WireError> {
    encode_field(spec, wire)
}

fn swap_if_little(endianness: Endianness, value: &Bits) -> Bits {
    match endianness {
        Endianness::Little if value.width().is_multiple_of(8) && value.width() > 8 => value.byte_swapped(),
        _ => value.clone(),
    }
}

pub fn internet_checksum(bytes: &[u8]) -> u16 {
    checksum::internet_checksum(bytes)
}

pub fn crc16_modbus(bytes: &[u8]) -> Result<u16, WireError> {
    if bytes.is_empty() {
        return Err(WireError::EmptyInput);
    }
    Ok(checksum::crc16_modbus(bytes))
}
