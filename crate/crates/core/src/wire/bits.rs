use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::WireError;

/// A fixed-width bit string.
///
/// Bits are stored big-endian and right-aligned in `ceil(width / 8)` bytes;
/// unused high bits of the first byte are always zero.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits {
    width: u32,
    bytes: Vec<u8>,
}

fn byte_len(width: u32) -> usize {
    width.div_ceil(8) as usize
}

impl Bits {
    pub fn zeros(width: u32) -> Self {
        Bits {
            width,
            bytes: vec![0; byte_len(width)],
        }
    }

    /// Builds a `width`-bit value; fails if `value` does not fit.
    pub fn from_u64(width: u32, value: u64) -> Result<Self, WireError> {
        if width < 64 && value >> width != 0 {
            return Err(WireError::ValueOverflow { width, value });
        }
        Ok(Self::from_u64_truncating(width, value))
    }

    /// Builds a `width`-bit value from the low bits of `value`.
    pub fn from_u64_truncating(width: u32, value: u64) -> Self {
        let n = byte_len(width);
        let mut bytes = vec![0u8; n];
        let be = value.to_be_bytes();
        for i in 0..n.min(8) {
            bytes[n - 1 - i] = be[7 - i];
        }
        let mut b = Bits { width, bytes };
        b.mask_top();
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Bits {
            width: bytes.len() as u32 * 8,
            bytes: bytes.to_vec(),
        }
    }

    /// Interprets `bytes` as a right-aligned big-endian value of `width` bits,
    /// dropping any bits above `width`.
    pub fn from_be_slice(width: u32, bytes: &[u8]) -> Self {
        let n = byte_len(width);
        let mut out = vec![0u8; n];
        let take = bytes.len().min(n);
        out[n - take..].copy_from_slice(&bytes[bytes.len() - take..]);
        let mut b = Bits { width, bytes: out };
        b.mask_top();
        b
    }

    fn mask_top(&mut self) {
        let spare = (self.bytes.len() as u32 * 8) - self.width;
        if spare > 0 {
            self.bytes[0] &= 0xFF >> spare;
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn to_u64(&self) -> Option<u64> {
        let significant = self.bytes.iter().skip_while(|b| **b == 0).count();
        if significant > 8 {
            return None;
        }
        Some(self.bytes.iter().fold(0u64, |acc, b| (acc << 8) | u64::from(*b)))
    }

    pub fn is_zero(&self) -> bool {
        self.bytes.iter().all(|b| *b == 0)
    }

    /// Re-expresses the value in `width` bits. Returns `None` if set bits
    /// would be lost.
    pub fn resize(&self, width: u32) -> Option<Bits> {
        fn significant(b: &[u8]) -> &[u8] {
            let lead = b.iter().take_while(|x| **x == 0).count();
            &b[lead..]
        }
        let out = Bits::from_be_slice(width, &self.bytes);
        (significant(&out.bytes) == significant(&self.bytes)).then_some(out)
    }

    /// Byte-reversed copy; only meaningful for whole-byte widths.
    pub fn byte_swapped(&self) -> Bits {
        let mut bytes = self.bytes.clone();
        bytes.reverse();
        Bits {
            width: self.width,
            bytes,
        }
    }

    /// Parses the textual forms used in grammar documents and reports:
    /// `0x` hex, dotted IPv4, colon-separated MAC, or decimal.
    pub fn parse_text(s: &str) -> Result<Bits, WireError> {
        let bad = || WireError::BadLiteral(s.to_string());
        let s = s.trim();
        if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            if hex.is_empty() {
                return Err(bad());
            }
            let digits: Vec<u8> = hex
                .chars()
                .map(|c| c.to_digit(16).map(|d| d as u8).ok_or_else(bad))
                .collect::<Result<_, _>>()?;
            let width = digits.len() as u32 * 4;
            let mut bytes = vec![0u8; byte_len(width)];
            for (i, d) in digits.iter().rev().enumerate() {
                let idx = bytes.len() - 1 - i / 2;
                bytes[idx] |= d << (4 * (i % 2));
            }
            return Ok(Bits { width, bytes });
        }
        if s.contains(':') {
            let bytes = s
                .split(':')
                .map(|p| u8::from_str_radix(p, 16).map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(Bits::from_bytes(&bytes));
        }
        if s.contains('.') {
            let bytes = s
                .split('.')
                .map(|p| p.parse::<u8>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()?;
            if bytes.len() != 4 {
                return Err(bad());
            }
            return Ok(Bits::from_bytes(&bytes));
        }
        let v: u64 = s.parse().map_err(|_| bad())?;
        Ok(Bits::from_u64_truncating(64, v))
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::from("0x");
        for b in &self.bytes {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    /// Human form: dotted quad for 32-bit values, colon MAC for 48-bit
    /// values, hex otherwise.
    pub fn pretty(&self) -> String {
        match self.width {
            32 => self.bytes.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("."),
            48 => self
                .bytes
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect::<Vec<_>>()
                .join(":"),
            _ => self.to_hex(),
        }
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({}; {})", self.width, self.to_hex())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

// Serialized as "<width>:<hex>" so the width survives a round trip.
impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}:{}", self.width, self.to_hex()))
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let (w, hex) = s
            .split_once(':')
            .ok_or_else(|| serde::de::Error::custom("expected <width>:<hex>"))?;
        let width: u32 = w.parse().map_err(serde::de::Error::custom)?;
        let raw = Bits::parse_text(hex).map_err(serde::de::Error::custom)?;
        Ok(Bits::from_be_slice(width, raw.as_bytes()))
    }
}

/// MSB-first bit packer.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    pub fn put(&mut self, bits: &Bits) {
        let w = bits.width as usize;
        let total = bits.bytes.len() * 8;
        for i in 0..w {
            let src = total - w + i;
            let bit = (bits.bytes[src / 8] >> (7 - src % 8)) & 1;
            self.push_bit(bit);
        }
    }

    pub fn put_bytes(&mut self, bytes: &[u8]) {
        if self.bit_len.is_multiple_of(8) {
            self.bytes.extend_from_slice(bytes);
            self.bit_len += bytes.len() * 8;
        } else {
            for b in bytes {
                self.put(&Bits::from_bytes(&[*b]));
            }
        }
    }

    fn push_bit(&mut self, bit: u8) {
        if self.bit_len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit != 0 {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= 0x80 >> (self.bit_len % 8);
        }
        self.bit_len += 1;
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// MSB-first bit reader over a byte slice.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        BitReader { data, pos: 0 }
    }

    pub fn bit_pos(&self) -> usize {
        self.pos
    }

    pub fn remaining_bits(&self) -> usize {
        self.data.len() * 8 - self.pos
    }

    pub fn take(&mut self, width: u32) -> Option<Bits> {
        let w = width as usize;
        if w > self.remaining_bits() {
            return None;
        }
        let out = read_bits(self.data, self.pos, width);
        self.pos += w;
        Some(out)
    }
}

/// Reads `width` bits starting at absolute bit offset `at`.
pub fn read_bits(data: &[u8], at: usize, width: u32) -> Bits {
    let mut out = Bits::zeros(width);
    let total = out.bytes.len() * 8;
    let w = width as usize;
    for i in 0..w {
        let src = at + i;
        let bit = (data[src / 8] >> (7 - src % 8)) & 1;
        if bit != 0 {
            let dst = total - w + i;
            out.bytes[dst / 8] |= 0x80 >> (dst % 8);
        }
    }
    out
}

/// Overwrites `bits.width()` bits of `data` starting at bit offset `at`.
pub fn write_bits(data: &mut [u8], at: usize, bits: &Bits) {
    let w = bits.width as usize;
    let total = bits.bytes.len() * 8;
    for i in 0..w {
        let src = total - w + i;
        let bit = (bits.bytes[src / 8] >> (7 - src % 8)) & 1;
        let dst = at + i;
        let mask = 0x80 >> (dst % 8);
        if bit != 0 {
            data[dst / 8] |= mask;
        } else {
            data[dst / 8] &= !mask;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncating_masks_high_bits() {
        let b = Bits::from_u64_truncating(4, 0xFF);
        assert_eq!(b.as_bytes(), &[0x0F]);
        assert!(Bits::from_u64(4, 0x10).is_err());
    }

    #[test]
    fn text_literals() {
        assert_eq!(Bits::parse_text("10.0.0.5").unwrap().as_bytes(), &[10, 0, 0, 5]);
        assert_eq!(Bits::parse_text("02:00:00:00:00:01").unwrap().width(), 48);
        assert_eq!(Bits::parse_text("0x0800").unwrap().as_bytes(), &[0x08, 0x00]);
        assert_eq!(Bits::parse_text("0x800").unwrap().to_u64(), Some(0x800));
        assert_eq!(Bits::parse_text("17").unwrap().to_u64(), Some(17));
        assert!(Bits::parse_text("1.2.3").is_err());
    }

    #[test]
    fn resize_keeps_value_or_refuses() {
        let b = Bits::from_u64(64, 0x0800).unwrap();
        assert_eq!(b.resize(16).unwrap().as_bytes(), &[0x08, 0x00]);
        assert!(b.resize(8).is_none());
        assert_eq!(b.resize(12).unwrap().to_u64(), Some(0x800));
        assert!(b.resize(11).is_none());
    }

    #[test]
    fn serde_keeps_width() {
        let b = Bits::from_u64(12, 0xABC).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, "\"12:0x0abc\"");
        let back: Bits = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn writer_reader_agree_on_unaligned_fields() {
        let mut w = BitWriter::new();
        w.put(&Bits::from_u64(3, 0b101).unwrap());
        w.put(&Bits::from_u64(13, 0x1234).unwrap());
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        assert_eq!(r.take(3).unwrap().to_u64(), Some(0b101));
        assert_eq!(r.take(13).unwrap().to_u64(), Some(0x1234));
        assert!(r.take(1).is_none());
    }
}
