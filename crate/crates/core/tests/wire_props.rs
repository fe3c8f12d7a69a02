mod common;

use common::{bitwise_internet_checksum, bitwise_pseudo_checksum, reference_crc16_modbus};
use proptest::prelude::*;
use vnet::wire::{read_bits, BitReader, BitWriter, Bits, HandlerContext, HandlerRegistry, PseudoHeader};

fn even_bytes(max_words: usize) -> impl Strategy<Value = Vec<u8>> {
    (1..=max_words).prop_flat_map(|n| proptest::collection::vec(any::<u8>(), n * 2))
}

fn patch_and_verify(reg: &HandlerRegistry, id: &str, data: &mut [u8], at: usize, ctx: &HandlerContext) -> bool {
    data[at] = 0;
    data[at + 1] = 0;
    let v = reg.compute(id, data, ctx).unwrap() as u16;
    data[at..at + 2].copy_from_slice(&v.to_be_bytes());
    reg.verify(id, data, u64::from(v), ctx).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn internet_checksum_patch_verifies(mut data in even_bytes(40), slot in any::<prop::sample::Index>()) {
        let reg = HandlerRegistry::shipped();
        let at = slot.index(data.len() / 2) * 2;
        data[at] = 0;
        data[at + 1] = 0;
        let want = bitwise_internet_checksum(&data);
        prop_assert!(patch_and_verify(&reg, "internet-checksum", &mut data, at, &HandlerContext::default()));
        prop_assert_eq!(u16::from_be_bytes([data[at], data[at + 1]]), want);
    }

    #[test]
    fn pseudo_checksum_patch_verifies(
        mut seg in even_bytes(40).prop_filter("room for a checksum slot", |s| s.len() >= 8),
        src in any::<[u8; 4]>(),
        dst in any::<[u8; 4]>(),
        tcp in any::<bool>(),
    ) {
        let reg = HandlerRegistry::shipped();
        let protocol = if tcp { 6 } else { 17 };
        let ctx = HandlerContext { pseudo: Some(PseudoHeader { src, dst, protocol }) };
        let at = if tcp && seg.len() >= 18 { 16 } else { 6 };
        seg[at] = 0;
        seg[at + 1] = 0;
        let want = match bitwise_pseudo_checksum(src, dst, protocol, &seg) {
            0 => 0xFFFF,
            c => c,
        };
        prop_assert!(patch_and_verify(&reg, "tcp-udp-pseudo-checksum", &mut seg, at, &ctx));
        prop_assert_eq!(u16::from_be_bytes([seg[at], seg[at + 1]]), want);
    }

    #[test]
    fn crc_matches_reference_and_verifies(data in proptest::collection::vec(any::<u8>(), 1..64)) {
        let reg = HandlerRegistry::shipped();
        let ctx = HandlerContext::default();
        let v = reg.compute("crc16-modbus", &data, &ctx).unwrap();
        prop_assert_eq!(v, u64::from(reference_crc16_modbus(&data)));
        prop_assert!(reg.verify("crc16-modbus", &data, v, &ctx).unwrap());
        prop_assert!(!reg.verify("crc16-modbus", &data, v ^ 1, &ctx).unwrap());
    }

    #[test]
    fn internet_checksum_ignores_word_order(data in even_bytes(32), seed in any::<u64>()) {
        let mut words: Vec<[u8; 2]> = data.chunks(2).map(|c| [c[0], c[1]]).collect();
        let before = vnet::wire::internet_checksum(&data);
        let n = words.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            words.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled: Vec<u8> = words.concat();
        prop_assert_eq!(vnet::wire::internet_checksum(&shuffled), before);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn bit_fields_round_trip(fields in proptest::collection::vec((1u32..=64, any::<u64>()), 1..12)) {
        let values: Vec<Bits> = fields
            .iter()
            .map(|&(w, v)| Bits::from_u64_truncating(w, v))
            .collect();
        let mut wr = BitWriter::new();
        for b in &values {
            wr.put(b);
        }
        let total = wr.bit_len();
        prop_assert_eq!(total, fields.iter().map(|f| f.0 as usize).sum::<usize>());
        let bytes = wr.into_bytes();
        prop_assert_eq!(bytes.len(), total.div_ceil(8));
        let mut at = 0;
        let mut rd = BitReader::new(&bytes);
        for (b, &(w, v)) in values.iter().zip(&fields) {
            let mask = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
            prop_assert_eq!(b.to_u64(), Some(v & mask));
            prop_assert_eq!(&read_bits(&bytes, at, w), b);
            prop_assert_eq!(rd.take(w), Some(b.clone()));
            at += w as usize;
        }
        prop_assert_eq!(rd.remaining_bits(), bytes.len() * 8 - total);
    }
}

#[test]
fn registry_counts_every_call() {
    let reg = HandlerRegistry::shipped();
    let ctx = HandlerContext::default();
    for _ in 0..5 {
        reg.compute("crc16-modbus", &[1, 2, 3], &ctx).unwrap();
    }
    reg.verify("internet-checksum", &[0xFF, 0xFF], 0, &ctx).unwrap();
    assert_eq!(reg.invocations(), 6);
}
