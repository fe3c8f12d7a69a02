use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::parse::{parse, Classification, ParsedFrame};
use crate::encapsulator::NetworkConfiguration;
use crate::grammar::{FieldKind, GrammarSet};
use crate::wire::{Bits, HandlerRegistry};

/// A value observed for a state key in target traffic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueCandidate {
    pub key: String,
    pub value: Bits,
    /// Number of distinct frames carrying this value.
    pub occurrences: u64,
    /// `(protocol, field)` pairs the value was read from.
    pub sources: BTreeSet<(String, String)>,
    /// Sequence number of the last frame carrying it; higher is more recent.
    pub last_seen: u64,
}

/// Whether a frame was prompted by something we sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Unsolicited,
    Solicited,
}

/// One line of the analysis audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    /// Logical time: execution index at which analysis ran.
    pub timestamp: u64,
    pub key: String,
    pub old: Option<Bits>,
    pub new: Bits,
    /// Every candidate value with its occurrence count, winner first.
    pub evidence: Vec<(Bits, u64)>,
}

pub fn audit_to_jsonl(records: &[AuditRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("audit record serializes") + "\n")
        .collect()
}

/// Harvestable values in a parsed frame: every Stateful field with a
/// harvest key.
pub fn harvest(frame: &ParsedFrame, grammars: &GrammarSet) -> Vec<(String, Bits, (String, String))> {
    let mut out = Vec::new();
    for l in &frame.layers {
        let Some(g) = grammars.get(&l.protocol) else { continue };
        for f in &g.fields {
            if let FieldKind::Stateful { harvest: Some(key), .. } = &f.kind {
                if let Some(v) = l.get(&f.name) {
                    out.push((key.clone(), v.clone(), (l.protocol.clone(), f.name.clone())));
                }
            }
        }
    }
    out
}

/// Accumulates candidates from target frames. Identical frames are counted
/// once, so a message replayed every execution cannot outvote the rest.
#[derive(Debug, Clone, Default)]
pub struct CandidateStore {
    candidates: BTreeMap<String, Vec<ValueCandidate>>,
    seen: HashSet<u64>,
    unknown: Vec<(u64, Vec<u8>, u64)>,
    frames_seen: u64,
    frames_parsed: u64,
    solicited: u64,
    sequence: u64,
}

fn frame_hash(frame: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    frame.hash(&mut h);
    h.finish()
}

impl CandidateStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one target frame and its parse.
    pub fn observe(&mut self, raw: &[u8], parsed: &ParsedFrame, origin: Origin, grammars: &GrammarSet) {
        self.frames_seen += 1;
        if origin == Origin::Solicited {
            self.solicited += 1;
        }
        let h = frame_hash(raw);
        if parsed.classification == Classification::Unknown {
            match self.unknown.iter_mut().find(|(k, _, _)| *k == h) {
                Some(e) => e.2 += 1,
                None => self.unknown.push((h, raw.to_vec(), 1)),
            }
            return;
        }
        self.frames_parsed += 1;
        if self.seen.insert(h) {
            self.record(parsed, grammars);
        }
    }

    /// Parses and records a frame elicited by a probe or a replay.
    pub fn observe_frame(&mut self, raw: &[u8], grammars: &GrammarSet, registry: &HandlerRegistry) {
        let parsed = parse(raw, grammars, registry);
        self.observe(raw, &parsed, Origin::Solicited, grammars);
    }

    fn record(&mut self, parsed: &ParsedFrame, grammars: &GrammarSet) {
        self.sequence += 1;
        for (key, value, source) in harvest(parsed, grammars) {
            let list = self.candidates.entry(key.clone()).or_default();
            match list.iter_mut().find(|c| c.value == value) {
                Some(c) => {
                    c.occurrences += 1;
                    c.sources.insert(source);
                    c.last_seen = self.sequence;
                }
                None => list.push(ValueCandidate {
                    key,
                    value,
                    occurrences: 1,
                    sources: [source].into(),
                    last_seen: self.sequence,
                }),
            }
        }
    }

    /// Re-parses retained unknown frames; returns how many now parse.
    pub fn reanalyze(&mut self, grammars: &GrammarSet, registry: &HandlerRegistry) -> usize {
        let mut recovered = 0;
        let unknown = std::mem::take(&mut self.unknown);
        for (h, raw, count) in unknown {
            let p = parse(&raw, grammars, registry);
            if p.classification == Classification::Unknown {
                self.unknown.push((h, raw, count));
                continue;
            }
            recovered += 1;
            self.frames_parsed += count;
            if self.seen.insert(h) {
                self.record(&p, grammars);
            }
        }
        recovered
    }

    pub fn candidates(&self) -> impl Iterator<Item = &ValueCandidate> {
        self.candidates.values().flatten()
    }

    pub fn for_key(&self, key: &str) -> &[ValueCandidate] {
        self.candidates.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    pub fn frames_parsed(&self) -> u64 {
        self.frames_parsed
    }

    pub fn solicited(&self) -> u64 {
        self.solicited
    }

    /// Total retained unknown frames, counting repeats.
    pub fn unknown_count(&self) -> u64 {
        self.unknown.iter().map(|(_, _, c)| c).sum()
    }

    pub fn unknown_frames(&self) -> impl Iterator<Item = &[u8]> {
        self.unknown.iter().map(|(_, f, _)| f.as_slice())
    }
}

/// Picks the winning candidate: most occurrences, ties to the most recent.
pub fn select(candidates: &[ValueCandidate]) -> Option<&ValueCandidate> {
    candidates.iter().max_by_key(|c| (c.occurrences, c.last_seen))
}

/// Writes the winning value of every key into `config.values` and returns
/// one audit record per changed key.
pub fn analyze_candidates<'a>(
    candidates: impl IntoIterator<Item = &'a ValueCandidate>,
    config: &mut NetworkConfiguration,
    timestamp: u64,
) -> Vec<AuditRecord> {
    let mut by_key: BTreeMap<&str, Vec<ValueCandidate>> = BTreeMap::new();
    for c in candidates {
        by_key.entry(c.key.as_str()).or_default().push(c.clone());
    }
    let mut audit = Vec::new();
    for (key, list) in by_key {
        let Some(winner) = select(&list) else { continue };
        let old = config.values.get(key).cloned();
        if old.as_ref() == Some(&winner.value) {
            continue;
        }
        let mut evidence: Vec<_> = list.iter().map(|c| (c.value.clone(), c.occurrences)).collect();
        evidence.sort_by(|a, b| (a.0 != winner.value).cmp(&(b.0 != winner.value)).then(b.1.cmp(&a.1)));
        config.values.insert(key.to_string(), winner.value.clone());
        audit.push(AuditRecord {
            timestamp,
            key: key.to_string(),
            old,
            new: winner.value.clone(),
            evidence,
        });
    }
    audit
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(key: &str, v: u64, n: u64, seen: u64) -> ValueCandidate {
        ValueCandidate {
            key: key.into(),
            value: Bits::from_u64_truncating(32, v),
            occurrences: n,
            sources: BTreeSet::new(),
            last_seen: seen,
        }
    }

    #[test]
    fn majority_wins() {
        let mut cfg = NetworkConfiguration::default();
        let c = [cand("target-ip", 0x0A000005, 7, 1), cand("target-ip", 0, 2, 9)];
        let audit = analyze_candidates(&c, &mut cfg, 3);
        assert_eq!(cfg.values["target-ip"], Bits::from_u64_truncating(32, 0x0A000005));
        assert_eq!(audit.len(), 1);
        assert_eq!(audit[0].evidence[0].1, 7);
        assert_eq!(audit[0].evidence[1].1, 2);
    }

    #[test]
    fn tie_goes_to_most_recent() {
        let mut cfg = NetworkConfiguration::default();
        let c = [cand("k", 1, 3, 4), cand("k", 2, 3, 5)];
        analyze_candidates(&c, &mut cfg, 0);
        assert_eq!(cfg.values["k"].to_u64(), Some(2));
    }

    #[test]
    fn unchanged_value_is_not_audited() {
        let mut cfg = NetworkConfiguration::default();
        let c = [cand("k", 1, 1, 1)];
        assert_eq!(analyze_candidates(&c, &mut cfg, 0).len(), 1);
        assert!(analyze_candidates(&c, &mut cfg, 1).is_empty());
    }
}
