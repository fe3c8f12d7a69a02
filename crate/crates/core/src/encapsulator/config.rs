use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::wire::Bits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanRole {
    Fuzz,
    Handshake,
    Probe,
}

/// One message of a built-in state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HandshakeStep {
    TcpSyn,
    TcpSynAck,
    TcpAck,
    DhcpOffer,
    DhcpAck,
    ArpReply,
}

impl HandshakeStep {
    /// Field bindings that distinguish this message from a plain data frame.
    pub fn bindings(self) -> BTreeMap<String, Bits> {
        let b = |k: &str, w: u32, v: u64| (k.to_string(), Bits::from_u64_truncating(w, v));
        match self {
            HandshakeStep::TcpSyn => [b("tcp-flags", 8, 0x02)].into(),
            HandshakeStep::TcpSynAck => [b("tcp-flags", 8, 0x12)].into(),
            HandshakeStep::TcpAck => [b("tcp-flags", 8, 0x10)].into(),
            HandshakeStep::DhcpOffer => [b("dhcp-message-type", 8, 2)].into(),
            HandshakeStep::DhcpAck => [b("dhcp-message-type", 8, 5)].into(),
            HandshakeStep::ArpReply => [b("arp-op", 16, 2)].into(),
        }
    }
}

/// One entry of the packet list: which layer chain to assemble and how.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketPlan {
    /// Protocol names, bottom to top. Empty means a raw frame.
    pub chain: Vec<String>,
    /// Number of bottom layers assembled from grammars; fuzz bytes fill the rest.
    pub depth: usize,
    pub role: PlanRole,
    /// Header-field mutations allowed on this packet, at most 2.
    pub fault_budget: u8,
    /// State-key values fixed for this plan, e.g. a probed service port.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bindings: BTreeMap<String, Bits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<HandshakeStep>,
}

pub const MAX_FAULT_BUDGET: u8 = 2;

impl PacketPlan {
    pub fn raw() -> Self {
        Self::fuzz(Vec::new(), BTreeMap::new())
    }

    pub fn fuzz(chain: Vec<String>, bindings: BTreeMap<String, Bits>) -> Self {
        PacketPlan {
            depth: chain.len(),
            chain,
            role: PlanRole::Fuzz,
            fault_budget: 0,
            bindings,
            step: None,
        }
    }

    pub fn handshake(chain: Vec<String>, step: HandshakeStep, mut bindings: BTreeMap<String, Bits>) -> Self {
        bindings.extend(step.bindings());
        PacketPlan {
            depth: chain.len(),
            chain,
            role: PlanRole::Handshake,
            fault_budget: 0,
            bindings,
            step: Some(step),
        }
    }

    pub fn top(&self) -> Option<&str> {
        self.chain.last().map(String::as_str)
    }
}

/// A path in the detected protocol tree, plus any values probing pinned
/// for it (e.g. the destination port that elicited a reaction).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectedChain {
    pub chain: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bindings: BTreeMap<String, Bits>,
}

impl DetectedChain {
    pub fn raw() -> Self {
        DetectedChain {
            chain: Vec::new(),
            bindings: BTreeMap::new(),
        }
    }

    pub fn new(chain: Vec<String>, bindings: BTreeMap<String, Bits>) -> Self {
        DetectedChain { chain, bindings }
    }

    pub fn label(&self) -> String {
        if self.chain.is_empty() {
            return "raw-frame".into();
        }
        let mut s = self.chain.join("/");
        if !self.bindings.is_empty() {
            let b: Vec<_> = self
                .bindings
                .iter()
                .map(|(k, v)| format!("{k}={}", v.to_u64().map_or_else(|| v.pretty(), |n| n.to_string())))
                .collect();
            s.push_str(&format!("{{{}}}", b.join(",")));
        }
        s
    }
}

/// The virtual network's current belief about the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfiguration {
    /// Detected chains in discovery order. Always contains the raw frame.
    pub detected: Vec<DetectedChain>,
    /// Values learned from target traffic, keyed by state key.
    pub values: BTreeMap<String, Bits>,
    /// Plans replayed on every execution.
    pub packet_list: Vec<PacketPlan>,
}

impl Default for NetworkConfiguration {
    fn default() -> Self {
        NetworkConfiguration {
            detected: vec![DetectedChain::raw()],
            values: BTreeMap::new(),
            packet_list: vec![PacketPlan::raw()],
        }
    }
}

impl NetworkConfiguration {
    pub fn is_empty_tree(&self) -> bool {
        self.detected.iter().all(|d| d.chain.is_empty())
    }

    pub fn contains(&self, d: &DetectedChain) -> bool {
        self.detected.contains(d)
    }

    pub fn has_chain(&self, chain: &[String]) -> bool {
        self.detected.iter().any(|d| d.chain == chain)
    }

    pub fn has_protocol(&self, protocol: &str) -> bool {
        self.detected.iter().any(|d| d.chain.iter().any(|p| p == protocol))
    }

    pub fn fuzz_plans(&self) -> impl Iterator<Item = &PacketPlan> {
        self.packet_list.iter().filter(|p| p.role == PlanRole::Fuzz)
    }

    /// Applies `fault_budget` to every fuzz plan that assembles headers.
    pub fn set_fault_budget(&mut self, budget: u8) {
        let budget = budget.min(MAX_FAULT_BUDGET);
        for p in &mut self.packet_list {
            if p.role == PlanRole::Fuzz && !p.chain.is_empty() {
                p.fault_budget = budget;
            }
        }
    }

    /// Indented text rendering of the detected tree.
    pub fn render_tree(&self) -> String {
        let mut chains: Vec<_> = self.detected.iter().filter(|d| !d.chain.is_empty()).collect();
        // variants sort after the children of their plain chain
        chains.sort_by_key(|d| {
            let mut key = d.chain.clone();
            if !d.bindings.is_empty() {
                key.last_mut().unwrap().push('{');
            }
            (key, d.bindings.clone())
        });
        let mut out = String::new();
        for d in chains {
            let indent = "  ".repeat(d.chain.len() - 1);
            let mut name = d.chain.last().cloned().unwrap_or_default();
            if !d.bindings.is_empty() {
                let label = d.label();
                name.push_str(&label[label.find('{').unwrap_or(label.len())..]);
            }
            out.push_str(&format!("{indent}{name}\n"));
        }
        out
    }
}
