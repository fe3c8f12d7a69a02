//! Hand-written wire helpers for the mock stack. Deliberately independent
//! of the grammar-driven code so the two can check each other.

pub type Mac = [u8; 6];
pub type Ip = [u8; 4];

pub const BROADCAST_MAC: Mac = [0xFF; 6];
pub const BROADCAST_IP: Ip = [255; 4];
pub const ZERO_IP: Ip = [0; 4];

pub fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

pub fn be32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn mac_at(b: &[u8], at: usize) -> Mac {
    b[at..at + 6].try_into().unwrap()
}

pub fn ip_at(b: &[u8], at: usize) -> Ip {
    b[at..at + 4].try_into().unwrap()
}

/// 32-bit accumulation of big-endian 16-bit words, folded at the end.
fn sum_words(mut acc: u32, data: &[u8]) -> u32 {
    let mut chunks = data.chunks_exact(2);
    for c in &mut chunks {
        acc = acc.wrapping_add(u32::from(c[0]) << 8 | u32::from(c[1]));
    }
    if let [last] = chunks.remainder() {
        acc = acc.wrapping_add(u32::from(*last) << 8);
    }
    acc
}

fn fold(mut acc: u32) -> u16 {
    while acc > 0xFFFF {
        acc = (acc & 0xFFFF) + (acc >> 16);
    }
    acc as u16
}

pub fn checksum(data: &[u8]) -> u16 {
    !fold(sum_words(0, data))
}

pub fn checksum_ok(data: &[u8]) -> bool {
    fold(sum_words(0, data)) == 0xFFFF
}

fn pseudo_sum(src: Ip, dst: Ip, proto: u8, len: usize) -> u32 {
    let mut acc = sum_words(0, &src);
    acc = sum_words(acc, &dst);
    acc + u32::from(proto) + len as u32
}

pub fn l4_checksum(src: Ip, dst: Ip, proto: u8, segment: &[u8]) -> u16 {
    let c = !fold(sum_words(pseudo_sum(src, dst, proto, segment.len()), segment));
    if c == 0 {
        0xFFFF
    } else {
        c
    }
}

pub fn l4_checksum_ok(src: Ip, dst: Ip, proto: u8, segment: &[u8]) -> bool {
    fold(sum_words(pseudo_sum(src, dst, proto, segment.len()), segment)) == 0xFFFF
}

const CRC_TABLE: [u16; 256] = {
    let mut t = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u16;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { (c >> 1) ^ 0xA001 } else { c >> 1 };
            k += 1;
        }
        t[i] = c;
        i += 1;
    }
    t
};

pub fn crc16(data: &[u8]) -> u16 {
    data.iter().fold(0xFFFF, |crc, b| {
        (crc >> 8) ^ CRC_TABLE[usize::from((crc ^ u16::from(*b)) as u8)]
    })
}

pub fn ethernet(dst: Mac, src: Mac, ethertype: u16, payload: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(14 + payload.len());
    f.extend_from_slice(&dst);
    f.extend_from_slice(&src);
    f.extend_from_slice(&ethertype.to_be_bytes());
    f.extend_from_slice(payload);
    f
}

pub fn arp(oper: u16, sha: Mac, spa: Ip, tha: Mac, tpa: Ip) -> Vec<u8> {
    let mut p = vec![0, 1, 0x08, 0x00, 6, 4];
    p.extend_from_slice(&oper.to_be_bytes());
    p.extend_from_slice(&sha);
    p.extend_from_slice(&spa);
    p.extend_from_slice(&tha);
    p.extend_from_slice(&tpa);
    p
}

pub fn ipv4(id: u16, proto: u8, src: Ip, dst: Ip, payload: &[u8]) -> Vec<u8> {
    let total = (20 + payload.len()) as u16;
    let mut h = vec![0x45, 0];
    h.extend_from_slice(&total.to_be_bytes());
    h.extend_from_slice(&id.to_be_bytes());
    h.extend_from_slice(&[0x40, 0, 64, proto, 0, 0]);
    h.extend_from_slice(&src);
    h.extend_from_slice(&dst);
    let c = checksum(&h);
    h[10..12].copy_from_slice(&c.to_be_bytes());
    h.extend_from_slice(payload);
    h
}

pub fn udp(src: Ip, dst: Ip, sport: u16, dport: u16, payload: &[u8]) -> Vec<u8> {
    let len = (8 + payload.len()) as u16;
    let mut s = Vec::with_capacity(len as usize);
    s.extend_from_slice(&sport.to_be_bytes());
    s.extend_from_slice(&dport.to_be_bytes());
    s.extend_from_slice(&len.to_be_bytes());
    s.extend_from_slice(&[0, 0]);
    s.extend_from_slice(payload);
    let c = l4_checksum(src, dst, 17, &s);
    s[6..8].copy_from_slice(&c.to_be_bytes());
    s
}

pub struct TcpSegment<'a> {
    pub sport: u16,
    pub dport: u16,
    pub seq: u32,
    pub ack: u32,
    pub flags: u8,
    pub payload: &'a [u8],
}

pub fn tcp(src: Ip, dst: Ip, seg: &TcpSegment) -> Vec<u8> {
    let mut s = Vec::with_capacity(20 + seg.payload.len());
    s.extend_from_slice(&seg.sport.to_be_bytes());
    s.extend_from_slice(&seg.dport.to_be_bytes());
    s.extend_from_slice(&seg.seq.to_be_bytes());
    s.extend_from_slice(&seg.ack.to_be_bytes());
    s.extend_from_slice(&[0x50, seg.flags]);
    s.extend_from_slice(&1460u16.to_be_bytes());
    s.extend_from_slice(&[0, 0, 0, 0]);
    s.extend_from_slice(seg.payload);
    let c = l4_checksum(src, dst, 6, &s);
    s[16..18].copy_from_slice(&c.to_be_bytes());
    s
}

pub fn icmp(kind: u8, code: u8, rest: [u8; 4], data: &[u8]) -> Vec<u8> {
    let mut m = vec![kind, code, 0, 0];
    m.extend_from_slice(&rest);
    m.extend_from_slice(data);
    let c = checksum(&m);
    m[2..4].copy_from_slice(&c.to_be_bytes());
    m
}

pub const DHCP_COOKIE: u32 = 0x6382_5363;

/// BOOTREQUEST from a client; `options` excludes the end marker.
pub fn dhcp_request(xid: u32, chaddr: Mac, ciaddr: Ip, options: &[u8]) -> Vec<u8> {
    let mut m = vec![0u8; 236];
    m[0] = 1;
    m[1] = 1;
    m[2] = 6;
    m[4..8].copy_from_slice(&xid.to_be_bytes());
    m[10] = 0x80;
    m[12..16].copy_from_slice(&ciaddr);
    m[28..34].copy_from_slice(&chaddr);
    m.extend_from_slice(&DHCP_COOKIE.to_be_bytes());
    m.extend_from_slice(options);
    m.push(255);
    m
}

/// Finds option `code` in a DHCP options area.
pub fn dhcp_option(options: &[u8], code: u8) -> Option<&[u8]> {
    let mut i = 0;
    while i < options.len() {
        match options[i] {
            0 => i += 1,
            255 => return None,
            c => {
                let len = *options.get(i + 1)? as usize;
                let v = options.get(i + 2..i + 2 + len)?;
                if c == code {
                    return Some(v);
                }
                i += 2 + len;
            }
        }
    }
    None
}
