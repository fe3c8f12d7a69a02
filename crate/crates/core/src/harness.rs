//! Drives one target execution through a virtual network.

use std::collections::BTreeSet;

use crate::encapsulator::{EncapError, FuzzStream};
use crate::mock::{BlockId, EnsProfile, MockEns, StepOutput};
use crate::network::VirtualNetwork;

/// A resettable system under test that consumes and emits raw frames.
pub trait TargetExecutor: Send + Sync {
    type Instance: TargetInstance;

    /// Fresh instance in its boot state.
    fn reset(&self) -> Self::Instance;
}

pub trait TargetInstance {
    /// Unsolicited traffic and coverage produced while booting.
    fn boot(&mut self) -> StepOutput;
    fn step(&mut self, frame: &[u8]) -> StepOutput;
    /// Timer work due after an inbound frame.
    fn tick(&mut self) -> StepOutput {
        StepOutput::default()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MockTarget {
    pub profile: EnsProfile,
    pub seed: u64,
}

impl MockTarget {
    pub fn new(profile: EnsProfile, seed: u64) -> Self {
        MockTarget { profile, seed }
    }
}

impl TargetExecutor for MockTarget {
    type Instance = MockEns;

    fn reset(&self) -> MockEns {
        MockEns::reset(self.profile, self.seed)
    }
}

impl TargetInstance for MockEns {
    fn boot(&mut self) -> StepOutput {
        self.take_boot()
    }

    fn step(&mut self, frame: &[u8]) -> StepOutput {
        MockEns::step(self, frame)
    }

    fn tick(&mut self) -> StepOutput {
        MockEns::tick(self)
    }
}

pub type CoverageSet = BTreeSet<BlockId>;

#[derive(Debug, Clone, Default)]
pub struct Execution {
    pub coverage: CoverageSet,
    /// Blocks in the order they were reached, repeats included.
    pub trace: Vec<BlockId>,
    /// Frames delivered to the target.
    pub delivered: usize,
    /// Frames the target emitted.
    pub emitted: Vec<Vec<u8>>,
}

impl Execution {
    fn absorb(&mut self, vn: Option<&mut VirtualNetwork>, out: StepOutput) {
        self.coverage.extend(out.trace.iter().copied());
        self.trace.extend(out.trace);
        if let Some(vn) = vn {
            for f in &out.frames {
                vn.send_packet(f);
            }
        }
        self.emitted.extend(out.frames);
    }
}

/// Resets the target, feeds boot traffic to `vn`, then delivers frames from
/// `get_packet` until the input is spent.
pub fn run_execution<T: TargetExecutor>(
    vn: &mut VirtualNetwork,
    target: &T,
    input: &[u8],
) -> Result<(T::Instance, Execution), EncapError> {
    vn.begin_execution();
    let mut inst = target.reset();
    let mut ex = Execution::default();
    ex.absorb(Some(vn), inst.boot());
    let mut fuzz = FuzzStream::new(input);
    loop {
        match vn.get_packet(&mut fuzz) {
            Ok(frame) => {
                ex.delivered += 1;
                let out = inst.step(&frame);
                ex.absorb(Some(vn), out);
                ex.absorb(Some(vn), inst.tick());
            }
            Err(EncapError::FuzzExhausted) => break,
            Err(e) => return Err(e),
        }
    }
    Ok((inst, ex))
}

/// Boot only: the target never receives a frame.
pub fn run_boot_only<T: TargetExecutor>(target: &T) -> Execution {
    let mut inst = target.reset();
    let mut ex = Execution::default();
    ex.absorb(None, inst.boot());
    ex
}

/// Delivers `frames` verbatim after boot, without a virtual network.
pub fn run_frames<T: TargetExecutor>(target: &T, frames: &[Vec<u8>]) -> Execution {
    let mut inst = target.reset();
    let mut ex = Execution::default();
    ex.absorb(None, inst.boot());
    for f in frames {
        ex.delivered += 1;
        let out = inst.step(f);
        ex.absorb(None, out);
        ex.absorb(None, inst.tick());
    }
    ex
}
