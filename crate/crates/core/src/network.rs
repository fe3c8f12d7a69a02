//! The two-call adapter a harness drives: `get_packet` for frames toward the
//! target, `send_packet` for frames the target emits.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::encapsulator::{
    assemble, inject_fault, sequence_step, Assembled, ConnectionState, EncapError, Fill, FuzzStream,
    NetworkConfiguration, PacketPlan, PlanRole, ValueSource,
};
use crate::extractor::{analyze_candidates, parse, AuditRecord, CandidateStore, Origin, ParsedFrame};
use crate::grammar::GrammarSet;
use crate::wire::HandlerRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VnetOptions {
    /// Track connections and answer handshakes. Off means every frame is
    /// assembled from learned values alone.
    pub stateful: bool,
    /// Frames delivered per execution before the input counts as spent.
    pub max_packets: usize,
}

impl Default for VnetOptions {
    fn default() -> Self {
        VnetOptions {
            stateful: true,
            max_packets: 16,
        }
    }
}

/// One virtual network instance. Owns its connection state; grammars and
/// handlers are shared.
#[derive(Debug, Clone)]
pub struct VirtualNetwork {
    grammars: Arc<GrammarSet>,
    registry: Arc<HandlerRegistry>,
    pub config: NetworkConfiguration,
    pub conn: ConnectionState,
    pub store: CandidateStore,
    pub options: VnetOptions,
    replies: VecDeque<PacketPlan>,
    cursor: usize,
    sent: usize,
    state_errors: u64,
}

impl VirtualNetwork {
    pub fn new(grammars: Arc<GrammarSet>, registry: Arc<HandlerRegistry>, options: VnetOptions) -> Self {
        VirtualNetwork {
            grammars,
            registry,
            config: NetworkConfiguration::default(),
            conn: ConnectionState::default(),
            store: CandidateStore::new(),
            options,
            replies: VecDeque::new(),
            cursor: 0,
            sent: 0,
            state_errors: 0,
        }
    }

    pub fn grammars(&self) -> &Arc<GrammarSet> {
        &self.grammars
    }

    pub fn registry(&self) -> &Arc<HandlerRegistry> {
        &self.registry
    }

    pub fn state_errors(&self) -> u64 {
        self.state_errors
    }

    /// Resets per-execution state; called whenever the target is reset.
    pub fn begin_execution(&mut self) {
        self.conn = ConnectionState::default();
        self.replies.clear();
        self.cursor = 0;
        self.sent = 0;
    }

    fn source<'a>(&'a self, plan: &'a PacketPlan) -> ValueSource<'a> {
        ValueSource {
            bindings: &plan.bindings,
            conn: self.options.stateful.then_some(&self.conn),
            values: &self.config.values,
        }
    }

    /// Assembles `plan` with zeroed fuzz fields and an empty body.
    pub fn build_fixed(&self, plan: &PacketPlan) -> Result<Assembled, EncapError> {
        let mut none = FuzzStream::new(&[]);
        assemble(
            &self.grammars,
            &self.registry,
            &plan.chain,
            plan.depth,
            &self.source(plan),
            &mut none,
            Fill::Zero { body_len: 0 },
        )
    }

    fn emit(&mut self, plan: &PacketPlan, asm: Assembled) -> Vec<u8> {
        if self.options.stateful {
            let payload = asm.body.len();
            self.conn.on_sent(plan, |p, f| asm.field(p, f), payload);
        }
        self.sent += 1;
        asm.bytes
    }

    /// Next frame toward the target.
    ///
    /// Queued replies go first, then handshake entries of the packet list
    /// that are still needed, then fuzz-selected plans. A fuzz packet reads
    /// a selector byte (plan = sel mod n, depth = (sel div n) mod (len + 1)),
    /// a body-length byte, then its field and body bytes. With only the raw
    /// plan configured the remaining input is passed through unchanged.
    pub fn get_packet(&mut self, fuzz: &mut FuzzStream) -> Result<Vec<u8>, EncapError> {
        if self.sent >= self.options.max_packets {
            return Err(EncapError::FuzzExhausted);
        }
        if self.options.stateful {
            if let Some(plan) = self.replies.pop_front() {
                let asm = self.build_fixed(&plan)?;
                return Ok(self.emit(&plan, asm));
            }
        }
        while self.cursor < self.config.packet_list.len() {
            let plan = self.config.packet_list[self.cursor].clone();
            self.cursor += 1;
            if plan.role != PlanRole::Handshake {
                continue;
            }
            let needed = self.options.stateful && !plan.step.is_some_and(|s| self.conn.step_done(s));
            if needed {
                let asm = self.build_fixed(&plan)?;
                return Ok(self.emit(&plan, asm));
            }
        }

        let plans: Vec<&PacketPlan> = self.config.fuzz_plans().collect();
        if fuzz.is_exhausted() {
            return Err(EncapError::FuzzExhausted);
        }
        if plans.len() == 1 && plans[0].chain.is_empty() {
            let frame = fuzz.take(fuzz.remaining()).to_vec();
            self.sent += 1;
            return Ok(frame);
        }
        let sel = fuzz.byte().ok_or(EncapError::FuzzExhausted)? as usize;
        let plan = plans[sel % plans.len()].clone();
        let depth = (sel / plans.len()) % (plan.chain.len() + 1);
        let body_len = fuzz.byte().unwrap_or(0) as usize;
        let src = self.source(&plan);
        let mut asm = assemble(
            &self.grammars,
            &self.registry,
            &plan.chain,
            depth,
            &src,
            fuzz,
            Fill::Fuzz { body_len },
        )?;
        inject_fault(&mut asm, plan.fault_budget, fuzz, &self.grammars, &self.registry)?;
        let mut effective = plan;
        effective.depth = depth;
        Ok(self.emit(&effective, asm))
    }

    /// Frame emitted by the target: parse, harvest, advance handshakes.
    pub fn send_packet(&mut self, frame: &[u8]) -> ParsedFrame {
        let parsed = parse(frame, &self.grammars, &self.registry);
        let origin = if self.sent > 0 {
            Origin::Solicited
        } else {
            Origin::Unsolicited
        };
        self.store.observe(frame, &parsed, origin, &self.grammars);
        if self.options.stateful {
            match sequence_step(&parsed, &mut self.conn) {
                Ok(Some(reply)) => {
                    if reply.top().is_some_and(|p| self.config.has_protocol(p)) {
                        self.replies.push_back(reply);
                    }
                }
                Ok(None) => {}
                Err(_) => self.state_errors += 1,
            }
        }
        parsed
    }

    /// Records a target frame without advancing connection state.
    pub fn observe(&mut self, frame: &[u8]) {
        self.store.observe_frame(frame, &self.grammars, &self.registry);
    }

    /// Re-parses retained unknown frames, then writes the winning candidate
    /// of every state key into the configuration.
    pub fn analyze(&mut self, timestamp: u64) -> Vec<AuditRecord> {
        self.store.reanalyze(&self.grammars, &self.registry);
        analyze_candidates(self.store.candidates(), &mut self.config, timestamp)
    }
}
