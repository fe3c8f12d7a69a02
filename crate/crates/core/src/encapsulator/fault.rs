use super::assemble::{patch, Assembled, FuzzStream};
use super::EncapError;
use crate::grammar::GrammarSet;
use crate::wire::{write_bits, Bits, Endianness, HandlerRegistry};

/// Control byte: bit 7 enables a fault.
pub const FAULT_ENABLE: u8 = 0x80;
/// Control byte: bit 0 leaves lengths and checksums as mutated.
pub const FAULT_SKIP_REPATCH: u8 = 0x01;
/// Control byte: bit 1 requests a second mutation when the budget allows.
pub const FAULT_SECOND: u8 = 0x02;

/// Record of the fields a fault changed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FaultReport {
    pub mutated: Vec<(String, String)>,
    pub repatched: bool,
}

/// Mutates up to `budget` header fields of `asm`, driven by fuzz bytes.
///
/// Layout: one control byte, then per mutation a field-selector byte
/// (index modulo the number of fields) followed by `ceil(width / 8)`
/// replacement bytes. A budget of 0 consumes nothing.
pub fn inject_fault(
    asm: &mut Assembled,
    budget: u8,
    fuzz: &mut FuzzStream,
    grammars: &GrammarSet,
    registry: &HandlerRegistry,
) -> Result<FaultReport, EncapError> {
    let mut report = FaultReport::default();
    if budget == 0 || asm.slots.is_empty() {
        return Ok(report);
    }
    let Some(ctl) = fuzz.byte() else { return Ok(report) };
    if ctl & FAULT_ENABLE == 0 {
        return Ok(report);
    }
    let count = if budget >= 2 && ctl & FAULT_SECOND != 0 { 2 } else { 1 };
    let mut touched = Vec::new();
    for _ in 0..count {
        let Some(sel) = fuzz.byte() else { break };
        let si = sel as usize % asm.slots.len();
        let slot = asm.slots[si].clone();
        let n = slot.width.div_ceil(8) as usize;
        let mut b = fuzz.take(n).to_vec();
        b.resize(n, 0);
        let mut v = Bits::from_be_slice(slot.width, &b);
        if slot.endianness == Endianness::Little && slot.width.is_multiple_of(8) && slot.width > 8 {
            v = v.byte_swapped();
        }
        write_bits(&mut asm.bytes, slot.bit_offset, &v);
        touched.push(si);
        report
            .mutated
            .push((asm.layers[slot.layer].protocol.clone(), slot.name.clone()));
    }
    if ctl & FAULT_SKIP_REPATCH == 0 {
        let chain: Vec<String> = asm.layers.iter().map(|l| l.protocol.clone()).collect();
        let gs = grammars.chain(&chain)?;
        patch(asm, &gs, registry, &touched)?;
        report.repatched = true;
    }
    Ok(report)
}
