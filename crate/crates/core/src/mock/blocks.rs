//! Coverage block identifiers. The high byte names the component.

pub type BlockId = u32;

pub const BOOT: BlockId = 0x0000;
pub const ETH: BlockId = 0x0100;
pub const ARP: BlockId = 0x0200;
pub const IPV4: BlockId = 0x0300;
pub const ICMP: BlockId = 0x0400;
pub const UDP: BlockId = 0x0500;
pub const TCP: BlockId = 0x0600;
pub const DHCP: BlockId = 0x0700;
pub const APP: BlockId = 0x0800;
pub const MODBUS: BlockId = 0x0900;
pub const MODBUS_APP: BlockId = 0x0A00;
pub const ERROR_POOL: BlockId = 0x0F00;
pub const ERROR_POOL_SIZE: u32 = 16;

pub const BOOT_INIT: BlockId = BOOT + 0x01;
pub const BOOT_NETIF_UP: BlockId = BOOT + 0x02;
pub const BOOT_DHCP_START: BlockId = BOOT + 0x03;
pub const BOOT_STATIC_IP: BlockId = BOOT + 0x04;
pub const BOOT_MODBUS_INIT: BlockId = BOOT + 0x05;
pub const BOOT_TIMER_ARP: BlockId = BOOT + 0x06;

pub const ETH_RX: BlockId = ETH + 0x01;
pub const ETH_UNICAST: BlockId = ETH + 0x02;
pub const ETH_BROADCAST: BlockId = ETH + 0x03;
pub const ETH_TYPE_IPV4: BlockId = ETH + 0x04;
pub const ETH_TYPE_ARP: BlockId = ETH + 0x05;

pub const ARP_RX: BlockId = ARP + 0x01;
pub const ARP_REQUEST: BlockId = ARP + 0x02;
pub const ARP_REQUEST_FOR_US: BlockId = ARP + 0x03;
pub const ARP_REPLY_SENT: BlockId = ARP + 0x04;
pub const ARP_REPLY: BlockId = ARP + 0x05;
pub const ARP_GATEWAY_RESOLVED: BlockId = ARP + 0x06;
pub const ARP_TABLE_UPDATE: BlockId = ARP + 0x07;
pub const ARP_TABLE_INSERT: BlockId = ARP + 0x08;
pub const ARP_PERIODIC: BlockId = ARP + 0x09;
pub const ARP_REQUEST_OTHER: BlockId = ARP + 0x0A;

pub const IPV4_RX: BlockId = IPV4 + 0x01;
pub const IPV4_HEADER_OK: BlockId = IPV4 + 0x02;
pub const IPV4_CHECKSUM_OK: BlockId = IPV4 + 0x03;
pub const IPV4_DEST_OK: BlockId = IPV4 + 0x04;
pub const IPV4_DEST_BROADCAST: BlockId = IPV4 + 0x05;
pub const IPV4_PRELEASE_ACCEPT: BlockId = IPV4 + 0x06;
pub const IPV4_OPTIONS: BlockId = IPV4 + 0x07;
pub const IPV4_PADDING: BlockId = IPV4 + 0x08;

pub const ICMP_RX: BlockId = ICMP + 0x01;
pub const ICMP_CHECKSUM_OK: BlockId = ICMP + 0x02;
pub const ICMP_ECHO_REQUEST: BlockId = ICMP + 0x03;
pub const ICMP_ECHO_REPLY_SENT: BlockId = ICMP + 0x04;
pub const ICMP_ECHO_REPLY: BlockId = ICMP + 0x05;
pub const ICMP_UNREACHABLE: BlockId = ICMP + 0x06;
pub const ICMP_OTHER_TYPE: BlockId = ICMP + 0x07;
pub const ICMP_PORT_UNREACH_SENT: BlockId = ICMP + 0x08;
pub const ICMP_ECHO_DATA: BlockId = ICMP + 0x09;

pub const UDP_RX: BlockId = UDP + 0x01;
pub const UDP_LENGTH_OK: BlockId = UDP + 0x02;
pub const UDP_CHECKSUM_OK: BlockId = UDP + 0x03;
pub const UDP_NO_CHECKSUM: BlockId = UDP + 0x04;
pub const UDP_DELIVER: BlockId = UDP + 0x05;
pub const UDP_PORT_CLOSED: BlockId = UDP + 0x06;
pub const UDP_DHCP_CLIENT: BlockId = UDP + 0x07;

pub const TCP_RX: BlockId = TCP + 0x01;
pub const TCP_CHECKSUM_OK: BlockId = TCP + 0x02;
pub const TCP_PORT_CLOSED: BlockId = TCP + 0x03;
pub const TCP_RST_SENT: BlockId = TCP + 0x04;
pub const TCP_SYN: BlockId = TCP + 0x05;
pub const TCP_SYNACK_SENT: BlockId = TCP + 0x06;
pub const TCP_HANDSHAKE_ACK: BlockId = TCP + 0x07;
pub const TCP_ESTABLISHED: BlockId = TCP + 0x08;
pub const TCP_DATA: BlockId = TCP + 0x09;
pub const TCP_DELIVER: BlockId = TCP + 0x0A;
pub const TCP_ACK_SENT: BlockId = TCP + 0x0B;
pub const TCP_FIN: BlockId = TCP + 0x0C;
pub const TCP_RST_RX: BlockId = TCP + 0x0D;
pub const TCP_PURE_ACK: BlockId = TCP + 0x0E;
pub const TCP_NO_CONNECTION: BlockId = TCP + 0x0F;

pub const DHCP_RX: BlockId = DHCP + 0x01;
pub const DHCP_HEADER_OK: BlockId = DHCP + 0x02;
pub const DHCP_XID_OK: BlockId = DHCP + 0x03;
pub const DHCP_OPTIONS_OK: BlockId = DHCP + 0x04;
pub const DHCP_OFFER: BlockId = DHCP + 0x05;
pub const DHCP_REQUEST_SENT: BlockId = DHCP + 0x06;
pub const DHCP_ACK: BlockId = DHCP + 0x07;
pub const DHCP_BOUND: BlockId = DHCP + 0x08;
pub const DHCP_NAK: BlockId = DHCP + 0x09;
pub const DHCP_DISCOVER_SENT: BlockId = DHCP + 0x0A;
pub const DHCP_ROUTER_OPTION: BlockId = DHCP + 0x0B;

pub const ECHO_RX: BlockId = APP + 0x01;
pub const ECHO_EMPTY: BlockId = APP + 0x02;
pub const ECHO_SHORT: BlockId = APP + 0x03;
pub const ECHO_MEDIUM: BlockId = APP + 0x04;
pub const ECHO_LONG: BlockId = APP + 0x05;
pub const ECHO_COMMAND: BlockId = APP + 0x06;
pub const ECHO_CMD_STATUS: BlockId = APP + 0x07;
pub const ECHO_CMD_RESET: BlockId = APP + 0x08;
pub const ECHO_CMD_VERSION: BlockId = APP + 0x09;
pub const ECHO_CMD_UNKNOWN: BlockId = APP + 0x0A;
pub const ECHO_REPLY_SENT: BlockId = APP + 0x0B;
pub const ECHO_BINARY: BlockId = APP + 0x0C;

pub const HTTP_RX: BlockId = APP + 0x20;
pub const HTTP_INCOMPLETE: BlockId = APP + 0x21;
pub const HTTP_GET: BlockId = APP + 0x22;
pub const HTTP_HEAD: BlockId = APP + 0x23;
pub const HTTP_POST: BlockId = APP + 0x24;
pub const HTTP_BAD_METHOD: BlockId = APP + 0x25;
pub const HTTP_ROOT: BlockId = APP + 0x26;
pub const HTTP_INDEX: BlockId = APP + 0x27;
pub const HTTP_STATUS_PAGE: BlockId = APP + 0x28;
pub const HTTP_NOT_FOUND: BlockId = APP + 0x29;
pub const HTTP_VERSION_10: BlockId = APP + 0x2A;
pub const HTTP_VERSION_11: BlockId = APP + 0x2B;
pub const HTTP_BAD_VERSION: BlockId = APP + 0x2C;
pub const HTTP_RESPONSE_SENT: BlockId = APP + 0x2D;
pub const HTTP_QUERY: BlockId = APP + 0x2E;

pub const MB_RX: BlockId = MODBUS + 0x01;
pub const MB_CRC_OK: BlockId = MODBUS + 0x02;
pub const MB_ADDRESSED: BlockId = MODBUS + 0x03;
pub const MB_BROADCAST: BlockId = MODBUS + 0x04;
pub const MB_LENGTH_OK: BlockId = MODBUS + 0x05;
pub const MB_EXCEPTION_SENT: BlockId = MODBUS + 0x06;
pub const MB_RESPONSE_SENT: BlockId = MODBUS + 0x07;

pub const MB_READ_HOLDING: BlockId = MODBUS_APP + 0x01;
pub const MB_READ_BAD_COUNT: BlockId = MODBUS_APP + 0x02;
pub const MB_READ_BAD_ADDRESS: BlockId = MODBUS_APP + 0x03;
pub const MB_READ_OK: BlockId = MODBUS_APP + 0x04;
pub const MB_WRITE_SINGLE: BlockId = MODBUS_APP + 0x05;
pub const MB_WRITE_BAD_ADDRESS: BlockId = MODBUS_APP + 0x06;
pub const MB_WRITE_SETPOINT: BlockId = MODBUS_APP + 0x07;
pub const MB_WRITE_SETPOINT_HIGH: BlockId = MODBUS_APP + 0x08;
pub const MB_WRITE_OK: BlockId = MODBUS_APP + 0x09;
pub const MB_ILLEGAL_FUNCTION: BlockId = MODBUS_APP + 0x0A;
pub const MB_BAD_PAYLOAD: BlockId = MODBUS_APP + 0x0B;

/// Component a block belongs to.
pub fn component(id: BlockId) -> &'static str {
    match id >> 8 {
        0x00 => "boot",
        0x01 => "ethernet",
        0x02 => "arp",
        0x03 => "ipv4",
        0x04 => "icmpv4",
        0x05 => "udp",
        0x06 => "tcp",
        0x07 => "dhcp",
        0x08 => "app",
        0x09 => "modbus",
        0x0A => "modbus-app",
        0x0F => "error",
        _ => "unknown",
    }
}

/// Application-layer blocks: reached only after every lower check passed.
pub fn is_app(id: BlockId) -> bool {
    matches!(id >> 8, 0x08 | 0x0A)
}

pub fn is_error(id: BlockId) -> bool {
    id >> 8 == 0x0F
}
