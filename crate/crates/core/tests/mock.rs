use std::collections::BTreeMap;
use std::sync::Arc;

use vnet::encapsulator::{DetectedChain, HandshakeStep, PacketPlan};
use vnet::extractor::{parse, Classification};
use vnet::grammar::GrammarSet;
use vnet::harness::{run_boot_only, run_execution, run_frames, MockTarget};
use vnet::mock::blocks::{self, *};
use vnet::mock::packet::*;
use vnet::mock::{EnsProfile, MockEns, ProfileKind};
use vnet::network::{VirtualNetwork, VnetOptions};
use vnet::wire::{Bits, HandlerRegistry};

fn chain(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn vn() -> VirtualNetwork {
    let reg = Arc::new(HandlerRegistry::shipped());
    let gs = Arc::new(GrammarSet::shipped(&reg));
    VirtualNetwork::new(gs, reg, VnetOptions::default())
}

fn target(kind: ProfileKind) -> MockTarget {
    MockTarget::new(EnsProfile::new(kind), 7)
}

#[test]
fn boot_discover_parses_as_dhcp() {
    let mut m = MockEns::reset(EnsProfile::new(ProfileKind::UdpEcho), 1);
    let boot = m.take_boot();
    assert!(boot.trace.contains(&DHCP_DISCOVER_SENT));
    assert_eq!(boot.frames.len(), 1);
    let v = vn();
    let p = parse(&boot.frames[0], v.grammars(), v.registry());
    assert_eq!(p.classification, Classification::FullyParsed);
    assert_eq!(p.chain(), chain(&["ethernet", "ipv4", "udp", "dhcp"]));
    assert_eq!(p.layer("dhcp").unwrap().get_u64("xid"), Some(u64::from(m.dhcp_xid())));
}

#[test]
fn random_bytes_hit_only_the_error_pool() {
    for kind in ProfileKind::ALL {
        let t = target(kind);
        let boot = run_boot_only(&t).coverage;
        let ex = run_frames(&t, &[vec![0x5A; 40]]);
        let extra: Vec<_> = ex.coverage.difference(&boot).copied().collect();
        let entry = if kind == ProfileKind::ModbusDevice {
            MB_RX
        } else {
            ETH_RX
        };
        assert!(
            extra.iter().all(|b| blocks::is_error(*b) || *b == entry),
            "{kind}: {extra:04x?}"
        );
        assert_eq!(
            extra.iter().filter(|b| blocks::is_error(**b)).count(),
            ERROR_POOL_SIZE as usize
        );
    }
}

#[test]
fn dhcp_handshake_then_udp_echo() {
    let mut v = vn();
    let udp = chain(&["ethernet", "ipv4", "udp"]);
    let dhcp = chain(&["ethernet", "ipv4", "udp", "dhcp"]);
    let port: BTreeMap<_, _> = [("udp-target-port".to_string(), Bits::from_u64_truncating(16, 7))].into();
    v.config
        .detected
        .push(DetectedChain::new(dhcp.clone(), BTreeMap::new()));
    v.config.detected.push(DetectedChain::new(udp.clone(), port.clone()));
    v.config.packet_list = vec![
        PacketPlan::handshake(dhcp.clone(), HandshakeStep::DhcpOffer, BTreeMap::new()),
        PacketPlan::handshake(dhcp, HandshakeStep::DhcpAck, BTreeMap::new()),
        PacketPlan::fuzz(udp, port),
    ];
    let t = target(ProfileKind::UdpEcho);
    run_execution(&mut v, &t, &[]).unwrap();
    v.analyze(0);
    // selector 3 = full depth, body of 4 bytes, then ipv4 and udp fuzz fields
    let mut input = vec![3u8, 4];
    input.extend(std::iter::repeat_n(0, 64));
    let (m, ex) = run_execution(&mut v, &t, &input).unwrap();
    assert_eq!(m.ip(), Some([10, 0, 0, 5]));
    for b in [
        DHCP_OFFER,
        DHCP_REQUEST_SENT,
        DHCP_ACK,
        DHCP_BOUND,
        UDP_DELIVER,
        ECHO_RX,
    ] {
        assert!(ex.coverage.contains(&b), "missing {b:04x}: {:04x?}", ex.coverage);
    }
}

#[test]
fn arp_request_for_us_gets_reply() {
    let p = EnsProfile::new(ProfileKind::TcpEchoServer);
    let req = arp(1, [2, 0, 0, 0, 0, 9], [192, 168, 1, 1], [0; 6], p.static_ip.unwrap());
    let f = ethernet(BROADCAST_MAC, [2, 0, 0, 0, 0, 9], 0x0806, &req);
    let mut m = MockEns::reset(p, 0);
    let out = m.step(&f);
    assert!(out.trace.contains(&ARP_REPLY_SENT));
    assert_eq!(out.frames.len(), 1);
    assert_eq!(be16(&out.frames[0], 20), 2);
}

#[test]
fn tcp_syn_gets_syn_ack_and_closed_port_rst() {
    let p = EnsProfile::new(ProfileKind::TcpEchoServer);
    let ip = p.static_ip.unwrap();
    let peer = [192, 168, 1, 1];
    let send = |m: &mut MockEns, dport: u16| {
        let seg = TcpSegment {
            sport: 4000,
            dport,
            seq: 100,
            ack: 0,
            flags: 0x02,
            payload: &[],
        };
        let s = tcp(peer, ip, &seg);
        m.step(&ethernet(p.mac, [2, 0, 0, 0, 0, 9], 0x0800, &ipv4(1, 6, peer, ip, &s)))
    };
    let mut m = MockEns::reset(p, 0);
    let out = send(&mut m, 7);
    assert!(out.trace.contains(&TCP_SYNACK_SENT));
    let seg = &out.frames[0][34..];
    assert_eq!(seg[13], 0x12);
    assert_eq!(be32(seg, 8), 101);
    assert_eq!(be32(seg, 4), m.tcp_isn());
    let out = send(&mut m, 8);
    assert!(out.trace.contains(&TCP_PORT_CLOSED) && out.trace.contains(&TCP_RST_SENT));
}

#[test]
fn modbus_crc_gate() {
    let mut frame = vec![17, 3, 4, 0, 0, 0, 2];
    let c = crc16(&frame);
    frame.extend_from_slice(&c.to_le_bytes());
    let mut m = MockEns::reset(EnsProfile::new(ProfileKind::ModbusDevice), 0);
    let out = m.step(&frame);
    assert!(out.trace.contains(&MB_READ_OK) && out.trace.contains(&MB_RESPONSE_SENT));
    let r = &out.frames[0];
    assert_eq!(&r[..4], &[17, 3, 5, 4]);
    assert_eq!(crc16(r), 0);
    frame[8] ^= 1;
    let out = m.step(&frame);
    assert!(!out.trace.contains(&MB_CRC_OK));
}
