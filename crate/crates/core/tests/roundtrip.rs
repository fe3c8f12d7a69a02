use std::collections::BTreeMap;

use proptest::prelude::*;
use vnet::encapsulator::{assemble, Fill, FuzzStream, ValueSource};
use vnet::extractor::{parse, parse_as, Classification};
use vnet::grammar::{FieldKind, GrammarSet};
use vnet::wire::{Bits, HandlerRegistry};

fn setup() -> (GrammarSet, HandlerRegistry) {
    let reg = HandlerRegistry::shipped();
    (GrammarSet::shipped(&reg), reg)
}

fn chains() -> Vec<Vec<String>> {
    [
        &["ethernet"][..],
        &["ethernet", "arp"],
        &["ethernet", "ipv4"],
        &["ethernet", "ipv4", "icmpv4"],
        &["ethernet", "ipv4", "udp"],
        &["ethernet", "ipv4", "udp", "dhcp"],
        &["ethernet", "ipv4", "tcp"],
        &["modbus"],
    ]
    .iter()
    .map(|c| c.iter().map(|s| s.to_string()).collect())
    .collect()
}

fn ip(s: &str) -> Bits {
    Bits::parse_text(s).unwrap()
}

#[test]
fn udp_frame_carries_learned_addresses_and_payload() {
    let (gs, reg) = setup();
    let chain: Vec<String> = ["ethernet", "ipv4", "udp"].iter().map(|s| s.to_string()).collect();
    let values: BTreeMap<_, _> = [
        ("target-ip".to_string(), ip("10.0.0.5")),
        ("target-mac".to_string(), ip("02:aa:bb:cc:dd:ee")),
    ]
    .into();
    let bindings = [("udp-target-port".to_string(), Bits::from_u64_truncating(16, 7))].into();
    let src = ValueSource {
        bindings: &bindings,
        conn: None,
        values: &values,
    };
    let input = [0x11, 0x40, b'h', b'e', b'l', b'l', b'o'];
    let mut fuzz = FuzzStream::new(&input);
    let asm = assemble(&gs, &reg, &chain, 3, &src, &mut fuzz, Fill::Fuzz { body_len: 5 }).unwrap();
    assert!(fuzz.is_exhausted());
    assert_eq!(asm.payload(), b"hello");

    let p = parse(&asm.bytes, &gs, &reg);
    assert_eq!(p.classification, Classification::FullyParsed);
    assert_eq!(p.chain(), chain);
    assert_eq!(p.layer("ipv4").unwrap().get("dst"), Some(&ip("10.0.0.5")));
    assert_eq!(p.layer("ethernet").unwrap().get("dst"), Some(&ip("02:aa:bb:cc:dd:ee")));
    assert_eq!(p.layer("udp").unwrap().get_u64("dport"), Some(7));
    assert_eq!(p.payload, b"hello");
    // tos and ttl came from the fuzz stream
    assert_eq!(p.layer("ipv4").unwrap().get_u64("tos"), Some(0x11));
    assert_eq!(p.layer("ipv4").unwrap().get_u64("ttl"), Some(0x40));
}

#[test]
fn random_frame_is_unknown() {
    let (gs, reg) = setup();
    let frame: Vec<u8> = (0..64u32).map(|i| (i.wrapping_mul(97) ^ 0x5A) as u8).collect();
    let p = parse(&frame, &gs, &reg);
    assert_eq!(p.classification, Classification::Unknown);
    assert_eq!(p.residual, frame);
}

#[test]
fn modbus_frame_ends_in_crc() {
    let (gs, reg) = setup();
    let chain = vec!["modbus".to_string()];
    let values = [("modbus-unit-id".to_string(), Bits::from_u64_truncating(8, 17))].into();
    let empty = BTreeMap::new();
    let src = ValueSource {
        bindings: &empty,
        conn: None,
        values: &values,
    };
    let input = [0x03, 0x00, 0x10, 0x00, 0x02];
    let mut fuzz = FuzzStream::new(&input);
    let asm = assemble(&gs, &reg, &chain, 1, &src, &mut fuzz, Fill::Fuzz { body_len: 4 }).unwrap();
    let n = asm.bytes.len();
    assert_eq!(&asm.bytes[..n - 2], &[17, 0x03, 4, 0x00, 0x10, 0x00, 0x02]);
    let crc = vnet::wire::crc16_modbus(&asm.bytes[..n - 2]).unwrap();
    assert_eq!(&asm.bytes[n - 2..], &crc.to_le_bytes());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn parse_inverts_assemble(ci in 0usize..8, depth_sel in 0usize..8, body_len in 0usize..80,
                              input in proptest::collection::vec(any::<u8>(), 0..400)) {
        let (gs, reg) = setup();
        let chain = &chains()[ci];
        let depth = 1 + depth_sel % chain.len();
        let empty = BTreeMap::new();
        let src = ValueSource { bindings: &empty, conn: None, values: &empty };
        let mut fuzz = FuzzStream::new(&input);
        let asm = assemble(&gs, &reg, chain, depth, &src, &mut fuzz, Fill::Fuzz { body_len }).unwrap();
        prop_assert_eq!(fuzz.consumed(), asm.field_bytes_consumed + asm.body_bytes_consumed);

        let hinted = parse_as(&asm.bytes, &chain[..depth], &gs, &reg);
        prop_assert_eq!(hinted.classification, Classification::FullyParsed);
        prop_assert_eq!(&hinted.payload[..], asm.payload());
        prop_assert_eq!(hinted.to_bytes(&gs).unwrap(), asm.bytes.clone());

        let p = parse(&asm.bytes, &gs, &reg);
        prop_assert_eq!(p.classification, Classification::FullyParsed);
        prop_assert!(p.layers.len() >= depth);
        prop_assert_eq!(p.to_bytes(&gs).unwrap(), asm.bytes.clone());
        if p.layers.len() == depth {
            prop_assert_eq!(&p.payload[..], asm.payload());
        }
        for (i, layer) in p.layers.iter().take(depth).enumerate() {
            prop_assert_eq!(&layer.protocol, &chain[i]);
            let g = gs.get(&layer.protocol).unwrap();
            for f in &g.fields {
                if f.name == g.body { continue; }
                let got = layer.get(&f.name).unwrap();
                prop_assert_eq!(got, &asm.value(asm.slot(i, &f.name).unwrap()));
                if let FieldKind::Static(v) = &f.kind {
                    prop_assert_eq!(got, v);
                }
            }
        }
    }
}
