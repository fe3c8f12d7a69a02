//! Batch fuzzing campaigns against a mock target, in three modes: `base`
//! (input never reaches the network interface), `rand` (input is cut into
//! raw frames) and `pemu` (input drives the virtual network).

pub mod compare;
mod fuzzer;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use compare::{compare_reports, AblationSummary, CompareError, ModeSummary};
pub use fuzzer::Fuzzer;

use crate::encapsulator::{EncapError, NetworkConfiguration, MAX_FAULT_BUDGET};
use crate::extractor::AuditRecord;
use crate::grammar::GrammarSet;
use crate::harness::{run_boot_only, run_execution, run_frames, CoverageSet, Execution, MockTarget};
use crate::mock::blocks::{self, BlockId};
use crate::mock::{EnsProfile, ProfileKind};
use crate::network::{VirtualNetwork, VnetOptions};
use crate::par;
use crate::prober::{probe_until_stable, ProbeError, ProbeOptions, RoundReport};
use crate::wire::HandlerRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Base,
    Rand,
    Pemu,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Base, Mode::Rand, Mode::Pemu];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Base => "base",
            Mode::Rand => "rand",
            Mode::Pemu => "pemu",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CampaignError::Config(format!("unknown mode `{s}`")))
    }
}

pub const DEFAULT_PROBE_WINDOW: u64 = 10_000;
pub const DEFAULT_STARTUP_DELAY: u64 = 1_000;
pub const DEFAULT_MAX_INPUT_LEN: usize = 512;
/// Frames cut from one input in `rand` mode.
pub const RAND_MAX_FRAMES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CampaignConfig {
    pub profile: ProfileKind,
    pub mode: Mode,
    pub executions: u64,
    pub seed: u64,
    /// Executions between probing pauses after the first one.
    pub probe_window: u64,
    pub probe_threshold: usize,
    pub fault_budget: u8,
    /// Executions before the first probing pause.
    pub startup_delay: u64,
    /// Add handshake plans for detected protocols.
    pub handshakes: bool,
    pub max_input_len: usize,
}

impl CampaignConfig {
    pub fn new(profile: ProfileKind, mode: Mode, executions: u64, seed: u64) -> Self {
        CampaignConfig {
            profile,
            mode,
            executions,
            seed,
            probe_window: DEFAULT_PROBE_WINDOW,
            probe_threshold: 1,
            fault_budget: 0,
            startup_delay: DEFAULT_STARTUP_DELAY,
            handshakes: true,
            max_input_len: DEFAULT_MAX_INPUT_LEN,
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.executions == 0 {
            return Err(CampaignError::Config("executions must be at least 1".into()));
        }
        if self.probe_window == 0 {
            return Err(CampaignError::Config("probe window must be at least 1".into()));
        }
        if self.fault_budget > MAX_FAULT_BUDGET {
            return Err(CampaignError::Config(format!(
                "fault budget {} exceeds {MAX_FAULT_BUDGET}",
                self.fault_budget
            )));
        }
        if self.max_input_len == 0 {
            return Err(CampaignError::Config("max input length must be at least 1".into()));
        }
        Ok(())
    }

    /// Execution indices at which a `pemu` campaign pauses to probe.
    pub fn is_probe_point(&self, execution: u64) -> bool {
        execution >= self.startup_delay && (execution - self.startup_delay).is_multiple_of(self.probe_window)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("invalid campaign configuration: {0}")]
    Config(String),
    #[error("target execution failed at execution {execution}: {source}")]
    TargetExecution {
        execution: u64,
        #[source]
        source: EncapError,
    },
    #[error("probing failed at execution {execution}: {source}")]
    Probe {
        execution: u64,
        #[source]
        source: ProbeError,
    },
}

pub const REPORT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CampaignReport {
    pub format: u32,
    pub config: CampaignConfig,
    /// `(execution index, cumulative distinct blocks)` at every index where
    /// the count changed; the count holds until the next point.
    pub coverage_curve: Vec<(u64, usize)>,
    /// Every block reached, ascending.
    pub blocks: Vec<BlockId>,
    pub final_blocks: usize,
    pub app_blocks: Vec<BlockId>,
    /// First execution index reaching each component's blocks.
    pub first_reach: BTreeMap<String, u64>,
    pub configuration: Option<NetworkConfiguration>,
    pub audit: Vec<AuditRecord>,
    pub rounds: Vec<RoundReport>,
    pub handler_invocations: u64,
    pub corpus_size: usize,
    pub state_errors: u64,
}

impl CampaignReport {
    pub fn reached_app(&self) -> bool {
        !self.app_blocks.is_empty()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Cuts `rand`-mode input into frames: a length byte, then that many bytes.
pub fn rand_frames(input: &[u8]) -> Vec<Vec<u8>> {
    let mut frames = Vec::new();
    let mut rest = input;
    while let Some((&len, tail)) = rest.split_first() {
        if frames.len() == RAND_MAX_FRAMES {
            break;
        }
        let n = usize::from(len).min(tail.len());
        frames.push(tail[..n].to_vec());
        rest = &tail[n..];
    }
    frames
}

pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignReport, CampaignError> {
    run_campaign_with(config, |_, _| {})
}

/// Like [`run_campaign`], calling `observe(index, execution)` after every
/// fuzz execution.
pub fn run_campaign_with(
    config: &CampaignConfig,
    mut observe: impl FnMut(u64, &Execution),
) -> Result<CampaignReport, CampaignError> {
    config.validate()?;
    let registry = Arc::new(HandlerRegistry::shipped());
    let grammars = Arc::new(GrammarSet::shipped(&registry));
    let invocations_before = registry.invocations();
    let target = MockTarget::new(EnsProfile::new(config.profile), config.seed);
    let mut fuzzer = Fuzzer::new(ChaCha8Rng::seed_from_u64(config.seed), config.max_input_len);
    let probe_options = ProbeOptions {
        threshold: config.probe_threshold,
        handshakes: config.handshakes,
        fault_budget: config.fault_budget,
        ..ProbeOptions::default()
    };
    let mut vn = (config.mode == Mode::Pemu)
        .then(|| VirtualNetwork::new(grammars.clone(), registry.clone(), VnetOptions::default()));

    let mut global = CoverageSet::new();
    let mut curve = Vec::new();
    let mut first_reach = BTreeMap::new();
    let mut rounds: Vec<RoundReport> = Vec::new();

    for i in 0..config.executions {
        if let Some(vn) = vn.as_mut().filter(|_| config.is_probe_point(i)) {
            let first = rounds.len() + 1;
            let r = probe_until_stable(vn, &target, &probe_options, first, i)
                .map_err(|source| CampaignError::Probe { execution: i, source })?;
            rounds.extend(r);
        }
        let input = fuzzer.next_input();
        let ex = match (config.mode, vn.as_mut()) {
            (Mode::Pemu, Some(vn)) => {
                run_execution(vn, &target, &input)
                    .map_err(|source| CampaignError::TargetExecution { execution: i, source })?
                    .1
            }
            (Mode::Rand, _) => run_frames(&target, &rand_frames(&input)),
            _ => run_boot_only(&target),
        };
        observe(i, &ex);
        let before = global.len();
        for b in &ex.coverage {
            if global.insert(*b) {
                first_reach.entry(blocks::component(*b).to_string()).or_insert(i);
            }
        }
        if global.len() > before {
            curve.push((i, global.len()));
            fuzzer.keep(input);
        }
    }

    let audit = match vn.as_mut() {
        Some(vn) => {
            let tail = vn.analyze(config.executions);
            let mut all: Vec<AuditRecord> = rounds.iter().flat_map(|r| r.audit.iter().cloned()).collect();
            all.extend(tail);
            all
        }
        None => Vec::new(),
    };
    let blocks: Vec<BlockId> = global.iter().copied().collect();
    Ok(CampaignReport {
        format: REPORT_FORMAT,
        config: config.clone(),
        coverage_curve: curve,
        final_blocks: blocks.len(),
        app_blocks: blocks.iter().copied().filter(|b| blocks::is_app(*b)).collect(),
        blocks,
        first_reach,
        configuration: vn.as_ref().map(|v| v.config.clone()),
        audit,
        rounds,
        handler_invocations: registry.invocations() - invocations_before,
        corpus_size: fuzzer.corpus_len(),
        state_errors: vn.as_ref().map_or(0, VirtualNetwork::state_errors),
    })
}

/// Runs every `(mode, seed)` pair for one profile; reports come back in
/// mode-major, seed-minor order.
pub fn run_ablation(
    profile: ProfileKind,
    modes: &[Mode],
    seeds: &[u64],
    configure: impl Fn(&mut CampaignConfig) + Sync + Send,
    executions: u64,
) -> Result<Vec<CampaignReport>, CampaignError> {
    let jobs: Vec<CampaignConfig> = modes
        .iter()
        .flat_map(|m| seeds.iter().map(move |s| (*m, *s)))
        .map(|(m, s)| {
            let mut c = CampaignConfig::new(profile, m, executions, s);
            configure(&mut c);
            c
        })
        .collect();
    par::map(&jobs, run_campaign).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOnlyReport {
    pub profile: ProfileKind,
    pub seed: u64,
    pub rounds: Vec<RoundReport>,
    pub configuration: NetworkConfiguration,
}

impl ProbeOnlyReport {
    /// Round-by-round narrative followed by the detected tree.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.rounds {
            let accepted = if r.accepted.is_empty() {
                "nothing".to_string()
            } else {
                r.accepted.join(", ")
            };
            s.push_str(&format!(
                "iteration {}: {} candidates probed, detected {accepted}\n",
                r.round,
                r.frontier.len()
            ));
        }
        s.push_str("\ndetected tree:\n");
        s.push_str(&self.configuration.render_tree());
        s
    }
}

/// Learns from one boot, then probes until a round accepts nothing.
pub fn probe_only(profile: ProfileKind, seed: u64, options: &ProbeOptions) -> Result<ProbeOnlyReport, CampaignError> {
    let registry = Arc::new(HandlerRegistry::shipped());
    let grammars = Arc::new(GrammarSet::shipped(&registry));
    let target = MockTarget::new(EnsProfile::new(profile), seed);
    let mut vn = VirtualNetwork::new(grammars, registry, VnetOptions::default());
    run_execution(&mut vn, &target, &[]).map_err(|source| CampaignError::TargetExecution { execution: 0, source })?;
    let rounds = probe_until_stable(&mut vn, &target, options, 1, 0)
        .map_err(|source| CampaignError::Probe { execution: 0, source })?;
    Ok(ProbeOnlyReport {
        profile,
        seed,
        rounds,
        configuration: vn.config,
    })
}
