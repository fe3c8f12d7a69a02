//! Parsing of target frames and harvesting of protocol state from them.

mod candidates;
mod parse;

pub use candidates::{
    analyze_candidates, audit_to_jsonl, harvest, select, AuditRecord, CandidateStore, Origin, ValueCandidate,
};
pub use parse::{parse, parse_as, parse_layer, Classification, ParsedFrame, ParsedLayer};
