//! A deterministic, coverage-instrumented embedded network stack used as
//! the fuzzing target.
//!
//! Parsers here are hand-written and share no code with the grammar-driven
//! encapsulator and extractor. Every dropped frame emits the whole shared
//! error pool, so error handling is common to all inputs and carries no
//! unique coverage.

pub mod blocks;
pub mod packet;
mod profile;
mod stack;

pub use blocks::BlockId;
pub use profile::{EnsProfile, ProfileKind, Strictness, UnknownProfile};
pub use stack::{MockEns, StepOutput};

/// Renders one line of space-separated hex block IDs per execution.
pub fn dump_traces<'a>(executions: impl IntoIterator<Item = &'a [BlockId]>) -> String {
    let mut s = String::new();
    for trace in executions {
        let line: Vec<String> = trace.iter().map(|b| format!("{b:04x}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// Inverse of [`dump_traces`].
pub fn load_traces(text: &str) -> Result<Vec<Vec<BlockId>>, std::num::ParseIntError> {
    text.lines()
        .map(|l| l.split_whitespace().map(|t| BlockId::from_str_radix(t, 16)).collect())
        .collect()
}
