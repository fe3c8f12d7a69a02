use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{HandshakeStep, PacketPlan};
use super::EncapError;
use crate::extractor::ParsedFrame;
use crate::wire::Bits;

/// Our initial TCP sequence number.
pub const OUR_ISN: u32 = 1;

const SYN: u64 = 0x02;
const RST: u64 = 0x04;
const ACK: u64 = 0x10;
const FIN: u64 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TcpPhase {
    #[default]
    Closed,
    /// We sent a SYN and wait for the SYN-ACK.
    SynSent,
    /// The peer sent a SYN; our SYN-ACK is queued or sent.
    SynReceived,
    Established,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TcpConn {
    pub phase: TcpPhase,
    /// Next sequence number we send.
    pub our_seq: u32,
    /// Next sequence number expected from the peer.
    pub peer_seq: u32,
    /// A SYN-ACK arrived and our final ACK has not been sent.
    pub ack_pending: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DhcpPhase {
    #[default]
    Idle,
    OfferSent,
    AckSent,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DhcpConn {
    pub phase: DhcpPhase,
    pub transaction_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Fragmentation {
    pub next_identification: u16,
}

/// Cross-packet state of one virtual network instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionState {
    pub tcp: TcpConn,
    pub dhcp: DhcpConn,
    pub fragmentation: Fragmentation,
    /// Per-key values that beat learned configuration values.
    pub overrides: BTreeMap<String, Bits>,
}

impl Default for ConnectionState {
    fn default() -> Self {
        ConnectionState {
            tcp: TcpConn {
                our_seq: OUR_ISN,
                ..TcpConn::default()
            },
            dhcp: DhcpConn::default(),
            fragmentation: Fragmentation { next_identification: 1 },
            overrides: BTreeMap::new(),
        }
    }
}

impl ConnectionState {
    /// Dynamic value for a state key, if the connection owns it.
    pub fn value(&self, key: &str) -> Option<Bits> {
        let v = match key {
            "tcp-seq" => Bits::from_u64_truncating(32, self.tcp.our_seq.into()),
            "tcp-ack" if self.tcp.phase != TcpPhase::Closed => Bits::from_u64_truncating(32, self.tcp.peer_seq.into()),
            "ipv4-identification" => Bits::from_u64_truncating(16, self.fragmentation.next_identification.into()),
            "dhcp-transaction-id" => Bits::from_u64_truncating(32, self.dhcp.transaction_id?.into()),
            _ => return self.overrides.get(key).cloned(),
        };
        Some(v)
    }

    /// Whether a handshake plan in the packet list has nothing left to do.
    pub fn step_done(&self, step: HandshakeStep) -> bool {
        match step {
            HandshakeStep::TcpSyn => self.tcp.phase != TcpPhase::Closed,
            HandshakeStep::TcpAck => !self.tcp.ack_pending,
            HandshakeStep::TcpSynAck => self.tcp.phase != TcpPhase::SynReceived,
            HandshakeStep::DhcpOffer => self.dhcp.phase >= DhcpPhase::OfferSent,
            HandshakeStep::DhcpAck => self.dhcp.phase == DhcpPhase::AckSent,
            HandshakeStep::ArpReply => false,
        }
    }

    /// Updates state after we emitted a frame.
    ///
    /// `field` looks up an assembled field value by `(protocol, field)`;
    /// `payload_len` is the application body length of the top layer.
    pub fn on_sent(&mut self, plan: &PacketPlan, field: impl Fn(&str, &str) -> Option<Bits>, payload_len: usize) {
        if plan.chain.iter().take(plan.depth).any(|p| p == "ipv4") {
            self.fragmentation.next_identification = self.fragmentation.next_identification.wrapping_add(1);
        }
        match plan.step {
            Some(HandshakeStep::TcpSyn) => {
                self.tcp.phase = TcpPhase::SynSent;
                self.tcp.our_seq = OUR_ISN.wrapping_add(1);
            }
            Some(HandshakeStep::TcpSynAck) => {
                self.tcp.our_seq = OUR_ISN.wrapping_add(1);
            }
            Some(HandshakeStep::TcpAck) => self.tcp.ack_pending = false,
            Some(HandshakeStep::DhcpOffer) => self.dhcp.phase = DhcpPhase::OfferSent,
            Some(HandshakeStep::DhcpAck) => {
                self.dhcp.phase = DhcpPhase::AckSent;
                if let Some(ip) = field("dhcp", "yiaddr") {
                    self.overrides.insert("target-ip".into(), ip);
                }
            }
            Some(HandshakeStep::ArpReply) => {}
            None => {
                let tcp_on_top = plan.depth == plan.chain.len() && plan.top() == Some("tcp");
                if tcp_on_top && self.tcp.phase == TcpPhase::Established {
                    self.tcp.our_seq = self.tcp.our_seq.wrapping_add(payload_len as u32);
                }
            }
        }
    }
}

fn bind(pairs: &[(&str, Bits)]) -> BTreeMap<String, Bits> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn u(width: u32, v: u64) -> Bits {
    Bits::from_u64_truncating(width, v)
}

/// Advances the built-in state machines on a frame from the target and
/// returns the reply the virtual network owes, if any.
///
/// Out-of-order messages reset the affected machine and report
/// [`EncapError::State`].
pub fn sequence_step(incoming: &ParsedFrame, conn: &mut ConnectionState) -> Result<Option<PacketPlan>, EncapError> {
    let chain = |top: &str| -> Vec<String> {
        let mut c: Vec<String> = incoming.chain();
        if let Some(i) = c.iter().position(|p| p == top) {
            c.truncate(i + 1);
        }
        c
    };

    if let Some(arp) = incoming.layer("arp") {
        if arp.get_u64("oper") != Some(1) {
            return Ok(None);
        }
        let (Some(sha), Some(spa), Some(tpa)) = (arp.get("sha"), arp.get("spa"), arp.get("tpa")) else {
            return Ok(None);
        };
        let b = bind(&[
            ("target-mac", sha.clone()),
            ("target-ip", spa.clone()),
            ("gateway-ip", tpa.clone()),
        ]);
        return Ok(Some(PacketPlan::handshake(chain("arp"), HandshakeStep::ArpReply, b)));
    }

    if let Some(dhcp) = incoming.layer("dhcp") {
        if dhcp.get_u64("op") != Some(1) {
            return Ok(None);
        }
        let xid = dhcp.get_u64("xid").unwrap_or(0) as u32;
        match dhcp.get_u64("message-type") {
            Some(1) => {
                conn.dhcp.phase = DhcpPhase::Idle;
                conn.dhcp.transaction_id = Some(xid);
                let b = bind(&[("dhcp-op", u(8, 2))]);
                return Ok(Some(PacketPlan::handshake(chain("dhcp"), HandshakeStep::DhcpOffer, b)));
            }
            Some(3) => {
                if conn.dhcp.phase == DhcpPhase::Idle || conn.dhcp.transaction_id != Some(xid) {
                    conn.dhcp = DhcpConn::default();
                    return Err(EncapError::State("DHCP REQUEST without a matching OFFER".into()));
                }
                let b = bind(&[("dhcp-op", u(8, 2))]);
                return Ok(Some(PacketPlan::handshake(chain("dhcp"), HandshakeStep::DhcpAck, b)));
            }
            _ => return Ok(None),
        }
    }

    if let Some(tcp) = incoming.layer("tcp") {
        let flags = tcp.get_u64("flags").unwrap_or(0);
        let seq = tcp.get_u64("seq").unwrap_or(0) as u32;
        let ack = tcp.get_u64("ack").unwrap_or(0) as u32;
        let t = &mut conn.tcp;
        if flags & RST != 0 {
            *t = TcpConn {
                our_seq: OUR_ISN,
                ..TcpConn::default()
            };
            return Ok(None);
        }
        if flags & (SYN | ACK) == SYN {
            t.phase = TcpPhase::SynReceived;
            t.peer_seq = seq.wrapping_add(1);
            t.our_seq = OUR_ISN;
            let b = bind(&[
                ("tcp-seq", u(32, OUR_ISN.into())),
                ("tcp-ack", u(32, t.peer_seq.into())),
                ("tcp-target-port", tcp.get("sport").cloned().unwrap_or_else(|| u(16, 0))),
                ("tcp-peer-port", tcp.get("dport").cloned().unwrap_or_else(|| u(16, 0))),
            ]);
            return Ok(Some(PacketPlan::handshake(chain("tcp"), HandshakeStep::TcpSynAck, b)));
        }
        if flags & (SYN | ACK) == SYN | ACK {
            if t.phase != TcpPhase::SynSent || ack != t.our_seq {
                *t = TcpConn {
                    our_seq: OUR_ISN,
                    ..TcpConn::default()
                };
                return Err(EncapError::State("unexpected SYN-ACK".into()));
            }
            t.phase = TcpPhase::Established;
            t.peer_seq = seq.wrapping_add(1);
            t.ack_pending = true;
            return Ok(None);
        }
        match t.phase {
            TcpPhase::SynReceived if flags & ACK != 0 => t.phase = TcpPhase::Established,
            TcpPhase::Established => {
                let len = if incoming.top().is_some_and(|l| l.protocol == "tcp") {
                    incoming.payload.len() as u32
                } else {
                    0
                };
                t.peer_seq = t.peer_seq.wrapping_add(len);
                if flags & FIN != 0 {
                    t.peer_seq = t.peer_seq.wrapping_add(1);
                }
            }
            _ => {}
        }
    }
    Ok(None)
}
