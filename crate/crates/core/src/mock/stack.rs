use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::blocks::*;
use super::packet::*;
use super::profile::{EnsProfile, ProfileKind};

/// Frames and coverage produced by one call into the stack.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepOutput {
    pub frames: Vec<Vec<u8>>,
    pub trace: Vec<BlockId>,
}

impl StepOutput {
    fn hit(&mut self, id: BlockId) {
        self.trace.push(id);
    }
}

/// Marker for a dropped frame; the caller emits the shared error pool.
struct Dropped;

type Rx = Result<(), Dropped>;

fn check(cond: bool) -> Rx {
    if cond {
        Ok(())
    } else {
        Err(Dropped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DhcpState {
    Off,
    Selecting,
    Requesting,
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TcpState {
    SynReceived,
    Established,
}

#[derive(Debug, Clone, Copy)]
struct Tcb {
    state: TcpState,
    remote_ip: Ip,
    remote_port: u16,
    rcv_nxt: u32,
    snd_nxt: u32,
}

/// A deterministic embedded network stack with branch-site coverage.
#[derive(Debug, Clone)]
pub struct MockEns {
    profile: EnsProfile,
    ip: Option<Ip>,
    gateway_ip: Option<Ip>,
    gateway_mac: Option<Mac>,
    arp_table: Vec<(Ip, Mac)>,
    dhcp: DhcpState,
    xid: u32,
    offered: Option<Ip>,
    server: Option<Ip>,
    tcb: Option<Tcb>,
    isn: u32,
    ip_id: u16,
    inbound: u64,
    registers: [u16; 100],
    boot: StepOutput,
}

const ARP_PERIOD: u64 = 4;
const SYN: u8 = 0x02;
const RST: u8 = 0x04;
const ACK: u8 = 0x10;
const FIN: u8 = 0x01;
const PSH: u8 = 0x08;

impl MockEns {
    /// Fresh instance in boot state. Unsolicited boot traffic is queued and
    /// returned by [`MockEns::take_boot`].
    pub fn reset(profile: EnsProfile, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xid: u32 = rng.gen();
        let isn: u32 = rng.gen::<u32>() | 0x0001_0000;
        let mut m = MockEns {
            profile,
            ip: profile.static_ip,
            gateway_ip: profile.gateway,
            gateway_mac: None,
            arp_table: Vec::new(),
            dhcp: DhcpState::Off,
            xid,
            offered: None,
            server: None,
            tcb: None,
            isn,
            ip_id: 1,
            inbound: 0,
            registers: [0; 100],
            boot: StepOutput::default(),
        };
        let mut out = StepOutput::default();
        out.hit(BOOT_INIT);
        match profile.kind {
            ProfileKind::ModbusDevice => out.hit(BOOT_MODBUS_INIT),
            ProfileKind::UdpEcho => {
                out.hit(BOOT_NETIF_UP);
                out.hit(BOOT_DHCP_START);
                m.send_discover(&mut out);
            }
            ProfileKind::TcpEchoServer | ProfileKind::HttpLite => {
                out.hit(BOOT_NETIF_UP);
                out.hit(BOOT_STATIC_IP);
                out.hit(BOOT_TIMER_ARP);
                m.arp_gateway(&mut out);
            }
        }
        m.boot = out;
        m
    }

    pub fn profile(&self) -> &EnsProfile {
        &self.profile
    }

    /// Current address; `None` before a DHCP lease.
    pub fn ip(&self) -> Option<Ip> {
        self.ip
    }

    pub fn gateway_mac(&self) -> Option<Mac> {
        self.gateway_mac
    }

    pub fn dhcp_xid(&self) -> u32 {
        self.xid
    }

    pub fn tcp_isn(&self) -> u32 {
        self.isn
    }

    pub fn take_boot(&mut self) -> StepOutput {
        std::mem::take(&mut self.boot)
    }

    /// Processes one inbound frame.
    pub fn step(&mut self, frame: &[u8]) -> StepOutput {
        let mut out = StepOutput::default();
        self.inbound += 1;
        let r = match self.profile.kind {
            ProfileKind::ModbusDevice => self.modbus_input(frame, &mut out),
            _ => self.eth_input(frame, &mut out),
        };
        if r.is_err() {
            out.trace.extend(ERROR_POOL..ERROR_POOL + ERROR_POOL_SIZE);
        }
        out
    }

    /// Timer callback, run by the harness after each inbound frame. Every
    /// fourth frame re-announces the gateway lookup once an address is set.
    pub fn tick(&mut self) -> StepOutput {
        let mut out = StepOutput::default();
        if self.profile.kind != ProfileKind::ModbusDevice
            && self.ip.is_some()
            && self.inbound.is_multiple_of(ARP_PERIOD)
        {
            out.hit(ARP_PERIODIC);
            self.arp_gateway(&mut out);
        }
        out
    }

    fn next_id(&mut self) -> u16 {
        let id = self.ip_id;
        self.ip_id = self.ip_id.wrapping_add(1);
        id
    }

    fn send_ip(&mut self, out: &mut StepOutput, dst_mac: Mac, dst: Ip, proto: u8, payload: &[u8]) {
        let src = self.ip.unwrap_or(ZERO_IP);
        let id = self.next_id();
        let p = ipv4(id, proto, src, dst, payload);
        out.frames.push(ethernet(dst_mac, self.profile.mac, 0x0800, &p));
    }

    fn arp_gateway(&mut self, out: &mut StepOutput) {
        let (Some(ip), Some(gw)) = (self.ip, self.gateway_ip) else {
            return;
        };
        let p = arp(1, self.profile.mac, ip, [0; 6], gw);
        out.frames.push(ethernet(BROADCAST_MAC, self.profile.mac, 0x0806, &p));
    }

    fn send_dhcp(&mut self, out: &mut StepOutput, options: &[u8]) {
        let m = dhcp_request(self.xid, self.profile.mac, ZERO_IP, options);
        let seg = udp(ZERO_IP, BROADCAST_IP, 68, 67, &m);
        let id = self.next_id();
        let p = ipv4(id, 17, ZERO_IP, BROADCAST_IP, &seg);
        out.frames.push(ethernet(BROADCAST_MAC, self.profile.mac, 0x0800, &p));
    }

    fn send_discover(&mut self, out: &mut StepOutput) {
        self.dhcp = DhcpState::Selecting;
        self.send_dhcp(out, &[53, 1, 1, 55, 2, 1, 3]);
        out.hit(DHCP_DISCOVER_SENT);
    }

    fn eth_input(&mut self, f: &[u8], out: &mut StepOutput) -> Rx {
        out.hit(ETH_RX);
        check(f.len() >= 14)?;
        let dst = mac_at(f, 0);
        if dst == self.profile.mac {
            out.hit(ETH_UNICAST);
        } else if dst == BROADCAST_MAC {
            out.hit(ETH_BROADCAST);
        } else {
            return Err(Dropped);
        }
        let src_mac = mac_at(f, 6);
        match be16(f, 12) {
            0x0800 => {
                out.hit(ETH_TYPE_IPV4);
                self.ip_input(&f[14..], src_mac, out)
            }
            0x0806 => {
                out.hit(ETH_TYPE_ARP);
                self.arp_input(&f[14..], out)
            }
            _ => Err(Dropped),
        }
    }

    fn arp_input(&mut self, p: &[u8], out: &mut StepOutput) -> Rx {
        out.hit(ARP_RX);
        check(p.len() >= 28)?;
        check(be16(p, 0) == 1 && be16(p, 2) == 0x0800 && p[4] == 6 && p[5] == 4)?;
        let (sha, spa, tpa) = (mac_at(p, 8), ip_at(p, 14), ip_at(p, 24));
        match be16(p, 6) {
            1 => {
                out.hit(ARP_REQUEST);
                if self.ip == Some(tpa) {
                    out.hit(ARP_REQUEST_FOR_US);
                    self.learn(spa, sha);
                    let r = arp(2, self.profile.mac, tpa, sha, spa);
                    out.frames.push(ethernet(sha, self.profile.mac, 0x0806, &r));
                    out.hit(ARP_REPLY_SENT);
                } else {
                    out.hit(ARP_REQUEST_OTHER);
                }
                Ok(())
            }
            2 => {
                out.hit(ARP_REPLY);
                if self.gateway_ip == Some(spa) {
                    if self.gateway_mac.is_none() {
                        out.hit(ARP_GATEWAY_RESOLVED);
                    } else {
                        out.hit(ARP_TABLE_UPDATE);
                    }
                    self.gateway_mac = Some(sha);
                } else if self.arp_table.iter().any(|(ip, _)| *ip == spa) {
                    out.hit(ARP_TABLE_UPDATE);
                    self.learn(spa, sha);
                } else {
                    out.hit(ARP_TABLE_INSERT);
                    self.learn(spa, sha);
                }
                Ok(())
            }
            _ => Err(Dropped),
        }
    }

    fn learn(&mut self, ip: Ip, mac: Mac) {
        if let Some(e) = self.arp_table.iter_mut().find(|(i, _)| *i == ip) {
            e.1 = mac;
        } else {
            if self.arp_table.len() == 4 {
                self.arp_table.remove(0);
            }
            self.arp_table.push((ip, mac));
        }
    }

    fn ip_input(&mut self, p: &[u8], src_mac: Mac, out: &mut StepOutput) -> Rx {
        out.hit(IPV4_RX);
        check(p.len() >= 20)?;
        let ihl = usize::from(p[0] & 0x0F) * 4;
        let total = usize::from(be16(p, 2));
        check(p[0] >> 4 == 4 && ihl >= 20 && total >= ihl && total <= p.len())?;
        out.hit(IPV4_HEADER_OK);
        if ihl > 20 {
            out.hit(IPV4_OPTIONS);
        }
        if p.len() > total {
            out.hit(IPV4_PADDING);
        }
        if self.profile.strict.verify_ip_checksum {
            check(checksum_ok(&p[..ihl]))?;
            out.hit(IPV4_CHECKSUM_OK);
        }
        let frag = be16(p, 6);
        check(frag & 0x2000 == 0 && frag & 0x1FFF == 0)?;
        let proto = p[9];
        let (src, dst) = (ip_at(p, 12), ip_at(p, 16));
        let payload = &p[ihl..total];

        let dhcp_port = proto == 17 && payload.len() >= 4 && be16(payload, 2) == 68;
        match self.ip {
            Some(ip) if dst == ip => out.hit(IPV4_DEST_OK),
            Some(_) if dst == BROADCAST_IP => out.hit(IPV4_DEST_BROADCAST),
            None if self.dhcp != DhcpState::Off && dhcp_port => out.hit(IPV4_PRELEASE_ACCEPT),
            _ if !self.profile.strict.verify_dest_address => out.hit(IPV4_DEST_OK),
            _ => return Err(Dropped),
        }
        let to_us = Some(dst) == self.ip;
        match proto {
            1 => self.icmp_input(payload, src, src_mac, to_us, out),
            17 => self.udp_input(payload, src, dst, src_mac, to_us, out),
            6 if matches!(self.profile.kind, ProfileKind::TcpEchoServer | ProfileKind::HttpLite) => {
                self.tcp_input(payload, src, dst, src_mac, out)
            }
            _ => Err(Dropped),
        }
    }

    fn icmp_input(&mut self, m: &[u8], src: Ip, src_mac: Mac, to_us: bool, out: &mut StepOutput) -> Rx {
        out.hit(ICMP_RX);
        check(m.len() >= 8)?;
        check(checksum_ok(m))?;
        out.hit(ICMP_CHECKSUM_OK);
        match m[0] {
            8 => {
                out.hit(ICMP_ECHO_REQUEST);
                if m.len() > 8 {
                    out.hit(ICMP_ECHO_DATA);
                }
                if to_us {
                    let r = icmp(0, 0, m[4..8].try_into().unwrap(), &m[8..]);
                    self.send_ip(out, src_mac, src, 1, &r);
                    out.hit(ICMP_ECHO_REPLY_SENT);
                }
            }
            0 => out.hit(ICMP_ECHO_REPLY),
            3 => out.hit(ICMP_UNREACHABLE),
            _ => out.hit(ICMP_OTHER_TYPE),
        }
        Ok(())
    }

    fn udp_input(&mut self, s: &[u8], src: Ip, dst: Ip, src_mac: Mac, to_us: bool, out: &mut StepOutput) -> Rx {
        out.hit(UDP_RX);
        check(s.len() >= 8)?;
        check(usize::from(be16(s, 4)) == s.len())?;
        out.hit(UDP_LENGTH_OK);
        if be16(s, 6) == 0 {
            out.hit(UDP_NO_CHECKSUM);
        } else if self.profile.strict.verify_udp_checksum {
            check(l4_checksum_ok(src, dst, 17, s))?;
            out.hit(UDP_CHECKSUM_OK);
        }
        let (sport, dport) = (be16(s, 0), be16(s, 2));
        let payload = &s[8..];
        if dport == 68 && self.dhcp != DhcpState::Off {
            out.hit(UDP_DHCP_CLIENT);
            return self.dhcp_input(payload, src, out);
        }
        if self.profile.kind == ProfileKind::UdpEcho && dport == self.profile.service_port && to_us {
            out.hit(UDP_DELIVER);
            let reply = echo_app(payload, out);
            let seg = udp(self.ip.unwrap(), src, dport, sport, &reply);
            self.send_ip(out, src_mac, src, 17, &seg);
            return Ok(());
        }
        out.hit(UDP_PORT_CLOSED);
        if to_us {
            let ihl_and_head: Vec<u8> = {
                let mut q = ipv4(0, 17, src, dst, &s[..8]);
                q.truncate(28);
                q
            };
            let r = icmp(3, 3, [0; 4], &ihl_and_head);
            self.send_ip(out, src_mac, src, 1, &r);
            out.hit(ICMP_PORT_UNREACH_SENT);
        }
        Ok(())
    }

    fn dhcp_input(&mut self, m: &[u8], src: Ip, out: &mut StepOutput) -> Rx {
        out.hit(DHCP_RX);
        check(m.len() >= 240)?;
        check(m[0] == 2 && m[1] == 1 && m[2] == 6)?;
        out.hit(DHCP_HEADER_OK);
        check(be32(m, 4) == self.xid)?;
        out.hit(DHCP_XID_OK);
        check(mac_at(m, 28) == self.profile.mac && be32(m, 236) == DHCP_COOKIE)?;
        let options = &m[240..];
        let mt = dhcp_option(options, 53)
            .and_then(|v| v.first().copied())
            .ok_or(Dropped)?;
        out.hit(DHCP_OPTIONS_OK);
        let yiaddr = ip_at(m, 16);
        let siaddr = ip_at(m, 20);
        match (self.dhcp, mt) {
            (DhcpState::Selecting, 2) => {
                out.hit(DHCP_OFFER);
                check(yiaddr != ZERO_IP)?;
                self.offered = Some(yiaddr);
                let server = dhcp_option(options, 54).and_then(|v| v.try_into().ok()).unwrap_or(src);
                self.server = Some(server);
                let mut opts = vec![53, 1, 3, 50, 4];
                opts.extend_from_slice(&yiaddr);
                opts.extend_from_slice(&[54, 4]);
                opts.extend_from_slice(&server);
                self.send_dhcp(out, &opts);
                out.hit(DHCP_REQUEST_SENT);
                self.dhcp = DhcpState::Requesting;
                Ok(())
            }
            (DhcpState::Requesting, 5) => {
                out.hit(DHCP_ACK);
                check(Some(yiaddr) == self.offered)?;
                self.ip = Some(yiaddr);
                self.gateway_ip = match dhcp_option(options, 3).and_then(|v| v.get(..4)) {
                    Some(r) => {
                        out.hit(DHCP_ROUTER_OPTION);
                        Some(r.try_into().unwrap())
                    }
                    None if siaddr != ZERO_IP => Some(siaddr),
                    None => self.server,
                };
                self.dhcp = DhcpState::Bound;
                out.hit(DHCP_BOUND);
                self.arp_gateway(out);
                Ok(())
            }
            (DhcpState::Requesting, 6) => {
                out.hit(DHCP_NAK);
                self.send_discover(out);
                Ok(())
            }
            _ => Err(Dropped),
        }
    }

    fn tcp_input(&mut self, s: &[u8], src: Ip, dst: Ip, src_mac: Mac, out: &mut StepOutput) -> Rx {
        out.hit(TCP_RX);
        check(s.len() >= 20)?;
        let off = usize::from(s[12] >> 4) * 4;
        check(off >= 20 && off <= s.len())?;
        check(l4_checksum_ok(src, dst, 6, s))?;
        out.hit(TCP_CHECKSUM_OK);
        let (sport, dport) = (be16(s, 0), be16(s, 2));
        let (seq, ack) = (be32(s, 4), be32(s, 8));
        let flags = s[13];
        let payload = &s[off..];
        let me = self.ip.unwrap_or(dst);
        let send = |this: &mut Self, out: &mut StepOutput, seq: u32, ack: u32, flags: u8, data: &[u8]| {
            let seg = tcp(
                me,
                src,
                &TcpSegment {
                    sport: dport,
                    dport: sport,
                    seq,
                    ack,
                    flags,
                    payload: data,
                },
            );
            this.send_ip(out, src_mac, src, 6, &seg);
        };

        if dport != self.profile.service_port {
            out.hit(TCP_PORT_CLOSED);
            if flags & RST == 0 {
                send(
                    self,
                    out,
                    ack,
                    seq.wrapping_add(payload.len() as u32).wrapping_add(1),
                    RST | ACK,
                    &[],
                );
                out.hit(TCP_RST_SENT);
            }
            return Ok(());
        }
        if flags & RST != 0 {
            out.hit(TCP_RST_RX);
            self.tcb = None;
            return Ok(());
        }
        let matches = self.tcb.is_some_and(|t| t.remote_ip == src && t.remote_port == sport);
        if flags & SYN != 0 && flags & ACK == 0 {
            out.hit(TCP_SYN);
            let t = Tcb {
                state: TcpState::SynReceived,
                remote_ip: src,
                remote_port: sport,
                rcv_nxt: seq.wrapping_add(1),
                snd_nxt: self.isn.wrapping_add(1),
            };
            self.tcb = Some(t);
            send(self, out, self.isn, t.rcv_nxt, SYN | ACK, &[]);
            out.hit(TCP_SYNACK_SENT);
            return Ok(());
        }
        if !matches {
            out.hit(TCP_NO_CONNECTION);
            send(self, out, ack, 0, RST, &[]);
            out.hit(TCP_RST_SENT);
            return Ok(());
        }
        let mut t = self.tcb.unwrap();
        check(flags & ACK != 0 && seq == t.rcv_nxt && ack == t.snd_nxt)?;
        if t.state == TcpState::SynReceived {
            out.hit(TCP_HANDSHAKE_ACK);
            t.state = TcpState::Established;
            out.hit(TCP_ESTABLISHED);
        }
        if !payload.is_empty() {
            out.hit(TCP_DATA);
            out.hit(TCP_DELIVER);
            t.rcv_nxt = t.rcv_nxt.wrapping_add(payload.len() as u32);
            let reply = match self.profile.kind {
                ProfileKind::HttpLite => http_app(payload, out),
                _ => echo_app(payload, out),
            };
            send(self, out, t.snd_nxt, t.rcv_nxt, ACK | PSH, &reply);
            t.snd_nxt = t.snd_nxt.wrapping_add(reply.len() as u32);
            out.hit(TCP_ACK_SENT);
        } else if flags & FIN == 0 {
            out.hit(TCP_PURE_ACK);
        }
        if flags & FIN != 0 {
            out.hit(TCP_FIN);
            t.rcv_nxt = t.rcv_nxt.wrapping_add(1);
            send(self, out, t.snd_nxt, t.rcv_nxt, FIN | ACK, &[]);
            self.tcb = None;
            return Ok(());
        }
        self.tcb = Some(t);
        Ok(())
    }

    fn modbus_input(&mut self, f: &[u8], out: &mut StepOutput) -> Rx {
        out.hit(MB_RX);
        check(f.len() >= 5)?;
        let n = f.len();
        check(crc16(&f[..n - 2]) == u16::from_le_bytes([f[n - 2], f[n - 1]]))?;
        out.hit(MB_CRC_OK);
        let unit = f[0];
        let broadcast = unit == 0;
        if unit == self.profile.unit_id {
            out.hit(MB_ADDRESSED);
        } else if broadcast {
            out.hit(MB_BROADCAST);
        } else {
            return Err(Dropped);
        }
        check(usize::from(f[2]) == n - 5)?;
        out.hit(MB_LENGTH_OK);
        let fc = f[1];
        let p = &f[3..n - 2];
        let reply: Result<Vec<u8>, u8> = match fc {
            0x03 => {
                out.hit(MB_READ_HOLDING);
                self.read_holding(p, out)
            }
            0x06 => {
                out.hit(MB_WRITE_SINGLE);
                self.write_single(p, out)
            }
            _ => {
                out.hit(MB_ILLEGAL_FUNCTION);
                Err(1)
            }
        };
        if broadcast {
            return Ok(());
        }
        let (fc, body) = match reply {
            Ok(b) => {
                out.hit(MB_RESPONSE_SENT);
                (fc, b)
            }
            Err(code) => {
                out.hit(MB_EXCEPTION_SENT);
                (fc | 0x80, vec![code])
            }
        };
        let mut r = vec![unit, fc, body.len() as u8];
        r.extend_from_slice(&body);
        let c = crc16(&r);
        r.extend_from_slice(&c.to_le_bytes());
        out.frames.push(r);
        Ok(())
    }

    fn read_holding(&mut self, p: &[u8], out: &mut StepOutput) -> Result<Vec<u8>, u8> {
        if p.len() != 4 {
            out.hit(MB_BAD_PAYLOAD);
            return Err(3);
        }
        let (addr, count) = (usize::from(be16(p, 0)), usize::from(be16(p, 2)));
        if count == 0 || count > 125 {
            out.hit(MB_READ_BAD_COUNT);
            return Err(3);
        }
        if addr + count > self.registers.len() {
            out.hit(MB_READ_BAD_ADDRESS);
            return Err(2);
        }
        out.hit(MB_READ_OK);
        let mut b = vec![(count * 2) as u8];
        for r in &self.registers[addr..addr + count] {
            b.extend_from_slice(&r.to_be_bytes());
        }
        Ok(b)
    }

    fn write_single(&mut self, p: &[u8], out: &mut StepOutput) -> Result<Vec<u8>, u8> {
        if p.len() != 4 {
            out.hit(MB_BAD_PAYLOAD);
            return Err(3);
        }
        let (addr, value) = (usize::from(be16(p, 0)), be16(p, 2));
        if addr >= self.registers.len() {
            out.hit(MB_WRITE_BAD_ADDRESS);
            return Err(2);
        }
        if addr == 10 {
            out.hit(MB_WRITE_SETPOINT);
            if value > 300 {
                out.hit(MB_WRITE_SETPOINT_HIGH);
            }
        }
        self.registers[addr] = value;
        out.hit(MB_WRITE_OK);
        Ok(p.to_vec())
    }
}

fn echo_app(payload: &[u8], out: &mut StepOutput) -> Vec<u8> {
    out.hit(ECHO_RX);
    out.hit(match payload.len() {
        0 => ECHO_EMPTY,
        1..=15 => ECHO_SHORT,
        16..=63 => ECHO_MEDIUM,
        _ => ECHO_LONG,
    });
    if payload.first() == Some(&b'#') {
        out.hit(ECHO_COMMAND);
        out.hit(match payload.get(1) {
            Some(b'S') => ECHO_CMD_STATUS,
            Some(b'R') => ECHO_CMD_RESET,
            Some(b'V') => ECHO_CMD_VERSION,
            _ => ECHO_CMD_UNKNOWN,
        });
    }
    if payload.iter().any(|b| *b >= 0x80) {
        out.hit(ECHO_BINARY);
    }
    out.hit(ECHO_REPLY_SENT);
    payload.to_vec()
}

fn http_app(payload: &[u8], out: &mut StepOutput) -> Vec<u8> {
    out.hit(HTTP_RX);
    let Some(end) = payload.iter().position(|b| *b == b'\n') else {
        out.hit(HTTP_INCOMPLETE);
        return Vec::new();
    };
    let line = payload[..end].strip_suffix(b"\r").unwrap_or(&payload[..end]);
    let mut parts = line.split(|b| *b == b' ');
    let method = parts.next().unwrap_or_default();
    let path = parts.next().unwrap_or_default();
    let version = parts.next().unwrap_or_default();
    match method {
        b"GET" => out.hit(HTTP_GET),
        b"HEAD" => out.hit(HTTP_HEAD),
        b"POST" => out.hit(HTTP_POST),
        _ => {
            out.hit(HTTP_BAD_METHOD);
            out.hit(HTTP_RESPONSE_SENT);
            return b"HTTP/1.0 405 Method Not Allowed\r\n\r\n".to_vec();
        }
    }
    let (path, query) = match path.iter().position(|b| *b == b'?') {
        Some(i) => (&path[..i], true),
        None => (path, false),
    };
    if query {
        out.hit(HTTP_QUERY);
    }
    let status: &[u8] = match path {
        b"/" => {
            out.hit(HTTP_ROOT);
            b"200 OK"
        }
        b"/index.html" => {
            out.hit(HTTP_INDEX);
            b"200 OK"
        }
        b"/status" => {
            out.hit(HTTP_STATUS_PAGE);
            b"200 OK"
        }
        _ => {
            out.hit(HTTP_NOT_FOUND);
            b"404 Not Found"
        }
    };
    match version {
        b"HTTP/1.0" => out.hit(HTTP_VERSION_10),
        b"HTTP/1.1" => out.hit(HTTP_VERSION_11),
        _ => out.hit(HTTP_BAD_VERSION),
    }
    out.hit(HTTP_RESPONSE_SENT);
    let mut r = b"HTTP/1.0 ".to_vec();
    r.extend_from_slice(status);
    r.extend_from_slice(b"\r\n\r\n");
    r
}
