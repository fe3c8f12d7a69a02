//! Coverage-guided detection of the protocols a target understands.
//!
//! Each round probes every frontier candidate in a fresh target instance and
//! accepts the candidates whose probe reaches blocks no other probe reaches.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::encapsulator::{DetectedChain, EncapError, HandshakeStep, NetworkConfiguration, PacketPlan, PlanRole};
use crate::extractor::AuditRecord;
use crate::grammar::{FieldKind, GrammarSet, Handshake};
use crate::harness::{run_execution, CoverageSet, TargetExecutor, TargetInstance};
use crate::network::VirtualNetwork;
use crate::par;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("probe scoring needs at least 2 candidates, got {0}")]
    InsufficientCandidates(usize),
    #[error(transparent)]
    Encap(#[from] EncapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeOptions {
    /// Minimum number of unique blocks for acceptance.
    pub threshold: usize,
    /// Add handshake plans for accepted protocols that declare one.
    pub handshakes: bool,
    /// Fault budget given to new fuzz plans.
    pub fault_budget: u8,
    pub max_rounds: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            threshold: 1,
            handshakes: true,
            fault_budget: 0,
            max_rounds: 16,
        }
    }
}

/// Length of the unstructured reference frame probed in every round.
pub const REFERENCE_FRAME_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeCandidate {
    pub target: DetectedChain,
    /// Upper protocols whose selector values are also sent, each as an extra
    /// frame with the candidate as the top assembled layer.
    pub hints: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProbeScore {
    pub index: usize,
    pub unique: usize,
    pub accepted: bool,
}

/// Unique coverage of each set against the union of all others, ranked by
/// unique count (ties keep input order).
pub fn score_probes(coverage: &[CoverageSet], threshold: usize) -> Result<Vec<ProbeScore>, ProbeError> {
    if coverage.len() < 2 {
        return Err(ProbeError::InsufficientCandidates(coverage.len()));
    }
    let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
    for c in coverage {
        for b in c {
            *seen.entry(*b).or_default() += 1;
        }
    }
    let mut scores: Vec<ProbeScore> = coverage
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let unique = c.iter().filter(|b| seen[b] == 1).count();
            ProbeScore {
                index,
                unique,
                accepted: unique >= threshold,
            }
        })
        .collect();
    scores.sort_by(|a, b| b.unique.cmp(&a.unique).then(a.index.cmp(&b.index)));
    Ok(scores)
}

/// Chains one layer beyond the detected tree, plus probe-value variants for
/// state keys that are still unknown. Already detected pairs are skipped.
pub fn frontier(config: &NetworkConfiguration, grammars: &GrammarSet) -> Vec<ProbeCandidate> {
    let mut chains: Vec<Vec<String>> = Vec::new();
    let mut push = |c: Vec<String>| {
        if !chains.contains(&c) {
            chains.push(c);
        }
    };
    if config.is_empty_tree() {
        for r in grammars.roots() {
            push(vec![r.name.clone()]);
        }
    } else {
        let detected: Vec<_> = config.detected.iter().filter(|d| !d.chain.is_empty()).collect();
        for d in &detected {
            push(d.chain.clone());
        }
        for d in &detected {
            let top = d.chain.last().unwrap();
            for u in grammars.uppers_of(top) {
                let mut c = d.chain.clone();
                c.push(u.name.clone());
                push(c);
            }
        }
    }

    let mut out = Vec::new();
    for chain in chains {
        let Some(g) = grammars.get(chain.last().unwrap()) else {
            continue;
        };
        let plain = DetectedChain::new(chain.clone(), BTreeMap::new());
        if !config.contains(&plain) {
            let mapped: BTreeSet<&str> = g
                .fields
                .iter()
                .filter_map(|f| match &f.kind {
                    FieldKind::NextLayer { map, .. } => Some(map.keys().map(String::as_str)),
                    _ => None,
                })
                .flatten()
                .collect();
            let hints = grammars
                .uppers_of(&g.name)
                .filter(|u| mapped.contains(u.name.as_str()))
                .map(|u| u.name.clone())
                .collect();
            out.push(ProbeCandidate { target: plain, hints });
        }
        for (key, values) in &g.probe_values {
            if config.values.contains_key(key) {
                continue;
            }
            for v in values {
                let d = DetectedChain::new(chain.clone(), [(key.clone(), v.clone())].into());
                if !config.contains(&d) {
                    out.push(ProbeCandidate {
                        target: d,
                        hints: Vec::new(),
                    });
                }
            }
        }
    }
    out
}

fn handshake_steps(h: Handshake) -> [HandshakeStep; 2] {
    match h {
        Handshake::Tcp => [HandshakeStep::TcpSyn, HandshakeStep::TcpAck],
        Handshake::Dhcp => [HandshakeStep::DhcpOffer, HandshakeStep::DhcpAck],
    }
}

/// Frames for one probe, built from the network's current state: the
/// candidate itself (the opening handshake message when its protocol has
/// one), then one frame per hint.
pub fn generate_probe(candidate: &ProbeCandidate, vn: &VirtualNetwork) -> Result<Vec<Vec<u8>>, EncapError> {
    let d = &candidate.target;
    let handshake = d
        .chain
        .last()
        .and_then(|p| vn.grammars().get(p))
        .and_then(|g| g.handshake);
    let mut main = match handshake {
        Some(h) => PacketPlan::handshake(d.chain.clone(), handshake_steps(h)[0], d.bindings.clone()),
        None => PacketPlan::fuzz(d.chain.clone(), d.bindings.clone()),
    };
    main.role = PlanRole::Probe;
    let mut frames = vec![vn.build_fixed(&main)?.bytes];
    for h in &candidate.hints {
        let mut chain = d.chain.clone();
        chain.push(h.clone());
        let mut plan = PacketPlan::fuzz(chain, d.bindings.clone());
        plan.depth = d.chain.len();
        plan.role = PlanRole::Probe;
        frames.push(vn.build_fixed(&plan)?.bytes);
    }
    Ok(frames)
}

/// Records accepted chains and extends the packet list: handshake plans go
/// before the first fuzz plan, the fuzz plan at the end.
pub fn update_configuration(
    config: &mut NetworkConfiguration,
    accepted: &[DetectedChain],
    grammars: &GrammarSet,
    options: &ProbeOptions,
) {
    for d in accepted {
        if !config.contains(d) {
            config.detected.push(d.clone());
        }
        let handshake = d.chain.last().and_then(|p| grammars.get(p)).and_then(|g| g.handshake);
        if let (true, Some(h)) = (options.handshakes, handshake) {
            for step in handshake_steps(h) {
                let plan = PacketPlan::handshake(d.chain.clone(), step, d.bindings.clone());
                if !config.packet_list.contains(&plan) {
                    let at = config
                        .packet_list
                        .iter()
                        .position(|p| p.role == PlanRole::Fuzz)
                        .unwrap_or(config.packet_list.len());
                    config.packet_list.insert(at, plan);
                }
            }
        }
        let mut plan = PacketPlan::fuzz(d.chain.clone(), d.bindings.clone());
        plan.fault_budget = options.fault_budget.min(crate::encapsulator::MAX_FAULT_BUDGET);
        if !config
            .packet_list
            .iter()
            .any(|p| p.role == PlanRole::Fuzz && p.chain == plan.chain && p.bindings == plan.bindings)
        {
            config.packet_list.push(plan);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProbeRun {
    /// Blocks reached while processing the probe frames themselves.
    pub coverage: CoverageSet,
    pub frames: usize,
    /// Everything the target emitted, replay included.
    pub emitted: Vec<Vec<u8>>,
}

/// Replays the packet list in a fresh target, then delivers the frames of
/// `probe`. Timer output is not attributed to the probe.
pub fn run_probe<T: TargetExecutor>(
    vn: &VirtualNetwork,
    target: &T,
    probe: Option<&ProbeCandidate>,
) -> Result<ProbeRun, EncapError> {
    let mut vn = vn.clone();
    let (mut inst, replay) = run_execution(&mut vn, target, &[])?;
    let frames = match probe {
        Some(c) => generate_probe(c, &vn)?,
        None => vec![vec![0u8; REFERENCE_FRAME_LEN]],
    };
    let mut run = ProbeRun {
        coverage: CoverageSet::new(),
        frames: frames.len(),
        emitted: replay.emitted,
    };
    for f in &frames {
        let out = inst.step(f);
        run.coverage.extend(out.trace);
        let timer = inst.tick();
        for e in out.frames.into_iter().chain(timer.frames) {
            vn.send_packet(&e);
            run.emitted.push(e);
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub candidate: String,
    pub frames: usize,
    pub blocks: usize,
    pub unique: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    /// Campaign execution index at which the round ran.
    pub execution: u64,
    /// Value changes applied before the round.
    pub audit: Vec<AuditRecord>,
    pub frontier: Vec<String>,
    /// Unique coverage of the unstructured reference frame.
    pub reference_unique: usize,
    pub outcomes: Vec<ProbeOutcome>,
    pub accepted: Vec<String>,
}

/// One probing round. Probes run in parallel on copies of `vn`; frames they
/// elicit are then observed by `vn` in candidate order.
pub fn probing_round<T: TargetExecutor>(
    vn: &mut VirtualNetwork,
    target: &T,
    options: &ProbeOptions,
    round: usize,
    execution: u64,
) -> Result<RoundReport, ProbeError> {
    let candidates = frontier(&vn.config, vn.grammars());
    let mut report = RoundReport {
        round,
        execution,
        audit: Vec::new(),
        frontier: candidates.iter().map(|c| c.target.label()).collect(),
        reference_unique: 0,
        outcomes: Vec::new(),
        accepted: Vec::new(),
    };
    if candidates.is_empty() {
        return Ok(report);
    }
    let jobs: Vec<Option<&ProbeCandidate>> = std::iter::once(None).chain(candidates.iter().map(Some)).collect();
    let snapshot: &VirtualNetwork = vn;
    let runs = par::map(&jobs, |c| run_probe(snapshot, target, *c));
    let runs: Vec<ProbeRun> = runs.into_iter().collect::<Result<_, _>>()?;
    for r in &runs {
        for f in &r.emitted {
            vn.observe(f);
        }
    }
    let coverage: Vec<CoverageSet> = runs.iter().map(|r| r.coverage.clone()).collect();
    let scores = score_probes(&coverage, options.threshold)?;
    let mut unique = vec![0; runs.len()];
    for s in &scores {
        unique[s.index] = s.unique;
    }
    report.reference_unique = unique[0];
    let mut accepted = Vec::new();
    for s in scores.iter().filter(|s| s.index > 0) {
        let c = &candidates[s.index - 1];
        let ok = s.accepted;
        report.outcomes.push(ProbeOutcome {
            candidate: c.target.label(),
            frames: runs[s.index].frames,
            blocks: runs[s.index].coverage.len(),
            unique: s.unique,
            accepted: ok,
        });
        if ok {
            accepted.push(c.target.clone());
        }
    }
    accepted.sort_by_key(|d| candidates.iter().position(|c| &c.target == d));
    report.accepted = accepted.iter().map(DetectedChain::label).collect();
    let grammars = vn.grammars().clone();
    update_configuration(&mut vn.config, &accepted, &grammars, options);
    Ok(report)
}

/// Runs rounds until one accepts nothing, analysing candidates before each.
pub fn probe_until_stable<T: TargetExecutor>(
    vn: &mut VirtualNetwork,
    target: &T,
    options: &ProbeOptions,
    first_round: usize,
    execution: u64,
) -> Result<Vec<RoundReport>, ProbeError> {
    let mut rounds = Vec::new();
    for i in 0..options.max_rounds {
        let audit = vn.analyze(execution);
        let mut r = probing_round(vn, target, options, first_round + i, execution)?;
        r.audit = audit;
        let done = r.accepted.is_empty();
        rounds.push(r);
        if done {
            break;
        }
    }
    let audit = vn.analyze(execution);
    if let Some(last) = rounds.last_mut() {
        last.audit.extend(audit);
    }
    Ok(rounds)
}
