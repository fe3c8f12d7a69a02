pub mod campaign;
pub mod encapsulator;
pub mod extractor;
pub mod grammar;
pub mod harness;
pub mod mock;
pub mod network;
pub mod par;
pub mod prober;
pub mod wire;
