//! Checksum primitives used by the shipped handlers.

/// One's-complement 16-bit word sum, folded. Odd-length input is padded
/// with a trailing zero byte.
pub fn ones_complement_sum(data: &[u8], initial: u32) -> u16 {
    let mut sum = u64::from(initial);
    let mut chunks = data.chunks_exact(2);
    for c in &mut chunks {
        sum += u64::from(u16::from_be_bytes([c[0], c[1]]));
    }
    if let [last] = chunks.remainder() {
        sum += u64::from(*last) << 8;
    }
    while sum > 0xFFFF {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    sum as u16
}

/// Internet checksum: complement of the one's-complement word sum.
pub fn internet_checksum(data: &[u8]) -> u16 {
    !ones_complement_sum(data, 0)
}

/// Pseudo-header fields covered by the TCP and UDP checksums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PseudoHeader {
    pub src: [u8; 4],
    pub dst: [u8; 4],
    pub protocol: u8,
}

impl PseudoHeader {
    fn partial_sum(&self, segment_len: usize) -> u32 {
        let mut buf = [0u8; 12];
        buf[..4].copy_from_slice(&self.src);
        buf[4..8].copy_from_slice(&self.dst);
        buf[9] = self.protocol;
        buf[10..12].copy_from_slice(&(segment_len as u16).to_be_bytes());
        u32::from(ones_complement_sum(&buf, 0))
    }
}

/// TCP/UDP checksum over pseudo-header plus segment.
pub fn pseudo_checksum(pseudo: &PseudoHeader, segment: &[u8]) -> u16 {
    !ones_complement_sum(segment, pseudo.partial_sum(segment.len()))
}

pub fn pseudo_checksum_valid(pseudo: &PseudoHeader, segment: &[u8]) -> bool {
    ones_complement_sum(segment, pseudo.partial_sum(segment.len())) == 0xFFFF
}

/// Modbus RTU CRC-16: reflected polynomial 0xA001, initial value 0xFFFF.
pub fn crc16_modbus(data: &[u8]) -> u16 {
    let table = crc_table();
    data.iter().fold(0xFFFF_u16, |crc, b| {
        (crc >> 8) ^ table[usize::from((crc ^ u16::from(*b)) as u8)]
    })
}

fn crc_table() -> &'static [u16; 256] {
    static TABLE: std::sync::OnceLock<[u16; 256]> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0u16; 256];
        for (i, slot) in t.iter_mut().enumerate() {
            let mut c = i as u16;
            for _ in 0..8 {
                c = if c & 1 != 0 { (c >> 1) ^ 0xA001 } else { c >> 1 };
            }
            *slot = c;
        }
        t
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_header_checksum_is_ffff() {
        assert_eq!(internet_checksum(&[0u8; 20]), 0xFFFF);
    }

    #[test]
    fn odd_length_pads_with_zero() {
        assert_eq!(
            internet_checksum(&[0x12, 0x34, 0x56]),
            internet_checksum(&[0x12, 0x34, 0x56, 0x00])
        );
    }

    #[test]
    fn crc_check_string() {
        // Standard CRC-16/MODBUS check value for "123456789".
        assert_eq!(crc16_modbus(b"123456789"), 0x4B37);
    }
}
