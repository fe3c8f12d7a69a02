use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use super::conn::ConnectionState;
use super::EncapError;
use crate::grammar::{length_value, FieldKind, GrammarSet, ProtocolGrammar};
use crate::wire::{encode_field, read_bits, write_bits, BitWriter, Bits, Endianness, HandlerContext, HandlerRegistry};

/// Raw fuzzing input, consumed front to back.
#[derive(Debug, Clone)]
pub struct FuzzStream<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> FuzzStream<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        FuzzStream { data, pos: 0 }
    }

    pub fn byte(&mut self) -> Option<u8> {
        let b = *self.data.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    /// Up to `n` bytes; fewer when the stream runs out.
    pub fn take(&mut self, n: usize) -> &'a [u8] {
        let end = (self.pos + n).min(self.data.len());
        let out = &self.data[self.pos..end];
        self.pos = end;
        out
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }
}

/// How Fuzzed fields and the body are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fill {
    /// From the fuzz stream; the body takes up to `body_len` bytes.
    Fuzz { body_len: usize },
    /// All zero, consuming nothing. Used for probes and handshakes.
    Zero { body_len: usize },
}

/// Where state-key values come from, highest priority first: plan
/// bindings, connection state, learned values, grammar defaults.
#[derive(Debug, Clone, Copy)]
pub struct ValueSource<'a> {
    pub bindings: &'a BTreeMap<String, Bits>,
    pub conn: Option<&'a ConnectionState>,
    pub values: &'a BTreeMap<String, Bits>,
}

impl ValueSource<'_> {
    fn resolve(&self, key: &str, grammars: &[Arc<ProtocolGrammar>], own: &ProtocolGrammar) -> Option<Bits> {
        self.bindings
            .get(key)
            .cloned()
            .or_else(|| self.conn.and_then(|c| c.value(key)))
            .or_else(|| self.values.get(key).cloned())
            .or_else(|| own.defaults.get(key).cloned())
            .or_else(|| grammars.iter().find_map(|g| g.defaults.get(key).cloned()))
    }
}

/// Re-expresses `v` in `width` bits, keeping the low bits if it is too wide.
pub fn fit(v: &Bits, width: u32) -> Bits {
    v.resize(width)
        .unwrap_or_else(|| Bits::from_be_slice(width, v.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSlot {
    pub layer: usize,
    pub name: String,
    /// Absolute bit offset in the frame.
    pub bit_offset: usize,
    pub width: u32,
    pub endianness: Endianness,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpan {
    pub protocol: String,
    pub start: usize,
    pub header_len: usize,
    pub body_len: usize,
    pub trailer_len: usize,
}

/// An assembled frame plus the layout needed to patch or inspect it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembled {
    pub bytes: Vec<u8>,
    pub layers: Vec<LayerSpan>,
    pub slots: Vec<FieldSlot>,
    /// Raw bytes above the assembled layers.
    pub body: Range<usize>,
    /// Fuzz bytes taken for header and trailer fields.
    pub field_bytes_consumed: usize,
    /// Fuzz bytes taken for the body.
    pub body_bytes_consumed: usize,
}

impl Assembled {
    pub fn slot(&self, layer: usize, name: &str) -> Option<&FieldSlot> {
        self.slots.iter().find(|s| s.layer == layer && s.name == name)
    }

    /// Decoded value of a field as currently on the wire.
    pub fn value(&self, slot: &FieldSlot) -> Bits {
        let raw = read_bits(&self.bytes, slot.bit_offset, slot.width);
        match slot.endianness {
            Endianness::Little if slot.width.is_multiple_of(8) && slot.width > 8 => raw.byte_swapped(),
            _ => raw,
        }
    }

    pub fn field(&self, protocol: &str, name: &str) -> Option<Bits> {
        let layer = self.layers.iter().position(|l| l.protocol == protocol)?;
        self.slot(layer, name).map(|s| self.value(s))
    }

    pub fn payload(&self) -> &[u8] {
        &self.bytes[self.body.clone()]
    }
}

/// Builds one frame: the bottom `depth` layers of `chain` from grammars,
/// everything above from the body. Fields are filled top-down, then lengths
/// and handlers are patched.
pub fn assemble(
    grammars: &GrammarSet,
    registry: &HandlerRegistry,
    chain: &[String],
    depth: usize,
    src: &ValueSource,
    fuzz: &mut FuzzStream,
    fill: Fill,
) -> Result<Assembled, EncapError> {
    if depth > chain.len() {
        return Err(EncapError::Depth {
            depth,
            chain: chain.len(),
        });
    }
    let gs = grammars.chain(chain)?;
    let gs = &gs[..depth];

    let start = fuzz.consumed();
    let fuzzed = |w: u32, fuzz: &mut FuzzStream| match fill {
        Fill::Fuzz { .. } => {
            let n = w.div_ceil(8) as usize;
            let mut b = fuzz.take(n).to_vec();
            b.resize(n, 0);
            Bits::from_be_slice(w, &b)
        }
        Fill::Zero { .. } => Bits::zeros(w),
    };

    let mut values: Vec<Vec<Bits>> = vec![Vec::new(); depth];
    for i in (0..depth).rev() {
        let g = &gs[i];
        for f in &g.fields {
            if f.name == g.body {
                continue;
            }
            let w = f.width.fixed().expect("only the body is variable");
            let v = match &f.kind {
                FieldKind::Static(s) => s.clone(),
                FieldKind::Length { .. } | FieldKind::Handler { .. } => Bits::zeros(w),
                FieldKind::Stateful { key, .. } => {
                    src.resolve(key, gs, g).map_or_else(|| Bits::zeros(w), |v| fit(&v, w))
                }
                FieldKind::NextLayer { map, fallback } => {
                    let mapped = chain.get(i + 1).and_then(|n| map.get(n)).cloned();
                    let fb = || {
                        fallback
                            .as_deref()
                            .and_then(|k| src.resolve(k, gs, g))
                            .map(|v| fit(&v, w))
                    };
                    match mapped.or_else(fb) {
                        Some(v) => v,
                        // no state key to fall back on: fuzz bytes pick one of the mapped protocols
                        None if fallback.is_none() && !map.is_empty() => {
                            let pick = fuzzed(w, fuzz)
                                .as_bytes()
                                .iter()
                                .fold(0usize, |a, b| (a * 256 + usize::from(*b)) % map.len());
                            fit(map.values().nth(pick).unwrap(), w)
                        }
                        None => fuzzed(w, fuzz),
                    }
                }
                FieldKind::Fuzzed => fuzzed(w, fuzz),
            };
            values[i].push(v);
        }
    }
    let field_bytes_consumed = fuzz.consumed() - start;

    let body = match fill {
        Fill::Fuzz { body_len } => fuzz.take(body_len).to_vec(),
        Fill::Zero { body_len } => vec![0; body_len],
    };
    let body_bytes_consumed = fuzz.consumed() - start - field_bytes_consumed;

    let encode = |f: &crate::grammar::FieldSpec, v: &Bits, w: &mut BitWriter| -> Result<(), EncapError> {
        w.put(&encode_field(f, v)?);
        Ok(())
    };
    let mut inner = body;
    let mut sizes = vec![(0usize, 0usize, 0usize); depth];
    for i in (0..depth).rev() {
        let g = &gs[i];
        let bi = g.body_index();
        let mut head = BitWriter::new();
        let mut tail = BitWriter::new();
        let mut vi = 0;
        for (fi, f) in g.fields.iter().enumerate() {
            if fi == bi {
                continue;
            }
            encode(f, &values[i][vi], if fi < bi { &mut head } else { &mut tail })?;
            vi += 1;
        }
        let head = head.into_bytes();
        let tail = tail.into_bytes();
        sizes[i] = (head.len(), inner.len(), tail.len());
        let mut layer = head;
        layer.extend_from_slice(&inner);
        layer.extend_from_slice(&tail);
        inner = layer;
    }

    let mut layers = Vec::with_capacity(depth);
    let mut slots = Vec::new();
    let mut at = 0usize;
    for (i, g) in gs.iter().enumerate() {
        let (hl, bl, tl) = sizes[i];
        let bi = g.body_index();
        let mut header_bit = at * 8;
        let mut trailer_bit = (at + hl + bl) * 8;
        for (fi, f) in g.fields.iter().enumerate() {
            if fi == bi {
                continue;
            }
            let w = f.width.fixed().expect("fixed");
            let pos = if fi < bi { &mut header_bit } else { &mut trailer_bit };
            slots.push(FieldSlot {
                layer: i,
                name: f.name.clone(),
                bit_offset: *pos,
                width: w,
                endianness: f.endianness,
            });
            *pos += w as usize;
        }
        layers.push(LayerSpan {
            protocol: g.name.clone(),
            start: at,
            header_len: hl,
            body_len: bl,
            trailer_len: tl,
        });
        at += hl;
    }
    let body_range = if depth == 0 {
        0..inner.len()
    } else {
        at..at + sizes[depth - 1].1
    };

    let mut out = Assembled {
        bytes: inner,
        layers,
        slots,
        body: body_range,
        field_bytes_consumed,
        body_bytes_consumed,
    };
    patch(&mut out, gs, registry, &[])?;
    Ok(out)
}

/// Recomputes Length fields, then handler fields from the innermost layer
/// out. Slots listed in `keep` are left untouched.
pub fn patch(
    asm: &mut Assembled,
    gs: &[Arc<ProtocolGrammar>],
    registry: &HandlerRegistry,
    keep: &[usize],
) -> Result<(), EncapError> {
    let slot_of =
        |asm: &Assembled, layer: usize, name: &str| asm.slots.iter().position(|s| s.layer == layer && s.name == name);
    for (i, g) in gs.iter().enumerate() {
        let span = asm.layers[i].clone();
        for f in &g.fields {
            let FieldKind::Length {
                scope,
                unit,
                adjustment,
            } = &f.kind
            else {
                continue;
            };
            let si = slot_of(asm, i, &f.name).expect("slot exists");
            if keep.contains(&si) {
                continue;
            }
            let n = length_value(*scope, *unit, *adjustment, span.header_len, span.body_len).max(0) as u64;
            let slot = &asm.slots[si];
            let v = encode_field(f, &Bits::from_u64_truncating(slot.width, n))?;
            write_bits(&mut asm.bytes, slot.bit_offset, &v);
        }
    }
    for i in (0..gs.len()).rev() {
        let g = &gs[i];
        let span = asm.layers[i].clone();
        let ctx = if i == 0 {
            HandlerContext::default()
        } else {
            let parent = &gs[i - 1];
            parent.context_for_upper(|name| slot_of(asm, i - 1, name).map(|s| asm.value(&asm.slots[s])))
        };
        for f in &g.fields {
            let FieldKind::Handler { id, scope, emit_zero } = &f.kind else {
                continue;
            };
            let si = slot_of(asm, i, &f.name).expect("slot exists");
            if keep.contains(&si) {
                continue;
            }
            let slot = asm.slots[si].clone();
            let value = if *emit_zero {
                0
            } else {
                write_bits(&mut asm.bytes, slot.bit_offset, &Bits::zeros(slot.width));
                let layer_end = span.start + span.header_len + span.body_len + span.trailer_len;
                let field_at = slot.bit_offset / 8 - span.start;
                let r = scope.byte_range(span.header_len, span.body_len, field_at);
                let scope_bytes = &asm.bytes[span.start..layer_end][r];
                registry.compute(id, scope_bytes, &ctx)?
            };
            let v = encode_field(f, &Bits::from_u64_truncating(slot.width, value))?;
            write_bits(&mut asm.bytes, slot.bit_offset, &v);
        }
    }
    Ok(())
}
