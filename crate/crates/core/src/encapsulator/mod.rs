//! Turns fuzz bytes into valid, stateful packets.

mod assemble;
mod config;
mod conn;
mod fault;

pub use assemble::{assemble, fit, patch, Assembled, FieldSlot, Fill, FuzzStream, LayerSpan, ValueSource};
pub use config::{DetectedChain, HandshakeStep, NetworkConfiguration, PacketPlan, PlanRole, MAX_FAULT_BUDGET};
pub use conn::{sequence_step, ConnectionState, DhcpConn, DhcpPhase, Fragmentation, TcpConn, TcpPhase, OUR_ISN};
pub use fault::{inject_fault, FaultReport, FAULT_ENABLE, FAULT_SECOND, FAULT_SKIP_REPATCH};

use thiserror::Error;

use crate::grammar::GrammarError;
use crate::wire::WireError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncapError {
    /// The fuzz stream ran out before a packet could start.
    #[error("fuzz input exhausted")]
    FuzzExhausted,
    #[error("connection state error: {0}")]
    State(String),
    #[error("depth {depth} exceeds chain length {chain}")]
    Depth { depth: usize, chain: usize },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Wire(#[from] WireError),
}
