use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::packet::{Ip, Mac};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// DHCP-configured; echoes UDP payloads on port 7.
    UdpEcho,
    /// Static address; echoes over an established TCP connection on port 7.
    TcpEchoServer,
    /// Static address; parses a request line over TCP port 80.
    HttpLite,
    /// Raw Modbus RTU frames; function codes 0x03 and 0x06.
    ModbusDevice,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 4] = [
        ProfileKind::UdpEcho,
        ProfileKind::TcpEchoServer,
        ProfileKind::HttpLite,
        ProfileKind::ModbusDevice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::UdpEcho => "udp-echo",
            ProfileKind::TcpEchoServer => "tcp-echo-server",
            ProfileKind::HttpLite => "http-lite",
            ProfileKind::ModbusDevice => "modbus-device",
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown profile `{0}`")]
pub struct UnknownProfile(pub String);

impl FromStr for ProfileKind {
    type Err = UnknownProfile;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProfileKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownProfile(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strictness {
    pub verify_ip_checksum: bool,
    pub verify_udp_checksum: bool,
    pub verify_dest_address: bool,
}

impl Default for Strictness {
    fn default() -> Self {
        Strictness {
            verify_ip_checksum: true,
            verify_udp_checksum: true,
            verify_dest_address: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsProfile {
    pub kind: ProfileKind,
    pub mac: Mac,
    /// Address configured at boot; `None` means DHCP.
    pub static_ip: Option<Ip>,
    pub gateway: Option<Ip>,
    pub unit_id: u8,
    pub service_port: u16,
    pub strict: Strictness,
}

impl EnsProfile {
    pub fn new(kind: ProfileKind) -> Self {
        let base = EnsProfile {
            kind,
            mac: [0x02, 0x00, 0x5E, 0x10, 0x00, 0x00],
            static_ip: None,
            gateway: None,
            unit_id: 0,
            service_port: 0,
            strict: Strictness::default(),
        };
        match kind {
            ProfileKind::UdpEcho => EnsProfile {
                mac: [0x02, 0x00, 0x5E, 0x10, 0x00, 0x01],
                service_port: 7,
                ..base
            },
            ProfileKind::TcpEchoServer => EnsProfile {
                mac: [0x02, 0x00, 0x5E, 0x10, 0x00, 0x02],
                static_ip: Some([192, 168, 1, 20]),
                gateway: Some([192, 168, 1, 1]),
                service_port: 7,
                ..base
            },
            ProfileKind::HttpLite => EnsProfile {
                mac: [0x02, 0x00, 0x5E, 0x10, 0x00, 0x03],
                static_ip: Some([192, 168, 1, 30]),
                gateway: Some([192, 168, 1, 1]),
                service_port: 80,
                ..base
            },
            ProfileKind::ModbusDevice => EnsProfile { unit_id: 17, ..base },
        }
    }
}
