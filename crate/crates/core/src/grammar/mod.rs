//! Declarative protocol grammars.
//!
//! Every header field is classified into one of six kinds (see [`FieldKind`]).
//! Grammars are loaded from TOML documents, validated once, and shared
//! immutably afterwards.

mod document;
mod set;

pub use document::{load_grammar, to_document};
pub use set::{resolve_stack, GrammarSet};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::ops::Range;

use crate::wire::{Bits, Endianness, HandlerContext, HandlerRegistry, PseudoHeader};

pub const MAX_FIELD_WIDTH: u32 = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("malformed grammar document: {0}")]
    Schema(String),
    #[error("invalid field `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("unknown handler `{handler}` on field `{field}`")]
    UnknownHandler { field: String, handler: String },
    #[error("lower-layer cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("unresolved protocol `{0}`")]
    UnresolvedProtocol(String),
}

fn invalid(field: &str, reason: impl Into<String>) -> GrammarError {
    GrammarError::Validation {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Width {
    Bits(u32),
    Variable,
}

impl Width {
    pub fn fixed(self) -> Option<u32> {
        match self {
            Width::Bits(w) => Some(w),
            Width::Variable => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LengthScope {
    #[serde(rename = "header-only")]
    HeaderOnly,
    #[serde(rename = "header+body")]
    HeaderAndBody,
    #[serde(rename = "body-only")]
    BodyOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Bits,
    Bytes,
}

impl LengthScope {
    /// Byte count covered by this scope.
    pub fn bytes(self, header_len: usize, body_len: usize) -> usize {
        match self {
            LengthScope::HeaderOnly => header_len,
            LengthScope::HeaderAndBody => header_len + body_len,
            LengthScope::BodyOnly => body_len,
        }
    }
}

/// Value a Length field must carry for the given layer sizes.
pub fn length_value(scope: LengthScope, unit: LengthUnit, adjustment: i64, header_len: usize, body_len: usize) -> i128 {
    let n = scope.bytes(header_len, body_len) as i128;
    let n = match unit {
        LengthUnit::Bits => n * 8,
        LengthUnit::Bytes => n,
    };
    n + i128::from(adjustment)
}

/// Byte range a handler covers, relative to its own layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HandlerScope {
    #[serde(rename = "header")]
    Header,
    #[serde(rename = "header+body")]
    HeaderAndBody,
    /// Every byte of the layer before the handler's field.
    #[serde(rename = "preceding")]
    Preceding,
}

impl HandlerScope {
    /// Byte range covered, relative to the layer start. `field_at` is the
    /// byte offset of the handler's own field.
    pub fn byte_range(self, header_len: usize, body_len: usize, field_at: usize) -> Range<usize> {
        match self {
            HandlerScope::Header => 0..header_len,
            HandlerScope::HeaderAndBody => 0..header_len + body_len,
            HandlerScope::Preceding => 0..field_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldKind {
    Static(Bits),
    Length {
        scope: LengthScope,
        unit: LengthUnit,
        adjustment: i64,
    },
    /// Identifies the encapsulated protocol. When the layer is the top of a
    /// chain the value comes from the `fallback` state key, or fuzz input.
    NextLayer {
        map: BTreeMap<String, Bits>,
        fallback: Option<String>,
    },
    Handler {
        id: String,
        scope: HandlerScope,
        emit_zero: bool,
    },
    /// Value taken from network state under `key`. Frames emitted by the
    /// target report this field as a candidate for `harvest`.
    Stateful {
        key: String,
        harvest: Option<String>,
    },
    Fuzzed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub width: Width,
    pub kind: FieldKind,
    pub endianness: Endianness,
}

/// Built-in connection state machines a grammar can opt into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handshake {
    Tcp,
    Dhcp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolGrammar {
    pub name: String,
    pub fields: Vec<FieldSpec>,
    pub body: String,
    /// Immediate lower layers; the first entry is the canonical one.
    pub lower: Vec<String>,
    pub handshake: Option<Handshake>,
    /// Fallback values for state keys nobody has learned yet.
    pub defaults: BTreeMap<String, Bits>,
    /// Values tried during probing for state keys that are still unknown.
    pub probe_values: BTreeMap<String, Vec<Bits>>,
}

impl ProtocolGrammar {
    pub fn body_index(&self) -> usize {
        self.fields
            .iter()
            .position(|f| f.name == self.body)
            .expect("validated grammar has a body field")
    }

    pub fn header(&self) -> &[FieldSpec] {
        &self.fields[..self.body_index()]
    }

    pub fn trailer(&self) -> &[FieldSpec] {
        &self.fields[self.body_index() + 1..]
    }

    pub fn header_bits(&self) -> u32 {
        self.header().iter().filter_map(|f| f.width.fixed()).sum()
    }

    pub fn trailer_bits(&self) -> u32 {
        self.trailer().iter().filter_map(|f| f.width.fixed()).sum()
    }

    pub fn is_frame_level(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Every state key this grammar reads or harvests.
    pub fn state_keys(&self) -> impl Iterator<Item = &str> {
        self.fields
            .iter()
            .flat_map(|f| match &f.kind {
                FieldKind::Stateful { key, harvest } => {
                    vec![Some(key.as_str()), harvest.as_deref()]
                }
                FieldKind::NextLayer { fallback, .. } => vec![fallback.as_deref()],
                _ => vec![],
            })
            .flatten()
    }

    pub fn has_next_layer(&self) -> bool {
        self.fields
            .iter()
            .any(|f| matches!(f.kind, FieldKind::NextLayer { .. }))
    }

    /// Handler context this layer provides to the layer it carries: a
    /// pseudo-header when it has 32-bit `src`/`dst` fields and a selector.
    pub fn context_for_upper(&self, value: impl Fn(&str) -> Option<Bits>) -> HandlerContext {
        let addr = |name: &str| -> Option<[u8; 4]> {
            let v = value(name)?;
            (v.width() == 32).then(|| v.as_bytes().try_into().ok()).flatten()
        };
        let protocol = self
            .fields
            .iter()
            .find(|f| matches!(f.kind, FieldKind::NextLayer { .. }))
            .and_then(|f| value(&f.name))
            .and_then(|v| v.to_u64());
        let pseudo = match (addr("src"), addr("dst"), protocol) {
            (Some(src), Some(dst), Some(p)) if p <= 0xFF => Some(PseudoHeader {
                src,
                dst,
                protocol: p as u8,
            }),
            _ => None,
        };
        HandlerContext { pseudo }
    }

    /// Protocol selected by the value of one of this layer's NextLayer
    /// fields. Selector values are matched against every NextLayer field of
    /// the same width, so port pairs resolve in either direction.
    pub fn select_upper(&self, value: impl Fn(&str) -> Option<Bits>) -> Option<&str> {
        let selectors: Vec<_> = self
            .fields
            .iter()
            .filter_map(|f| match &f.kind {
                FieldKind::NextLayer { map, .. } => Some((f, map)),
                _ => None,
            })
            .collect();
        for (f, _) in &selectors {
            let Some(v) = value(&f.name) else { continue };
            for (g, map) in &selectors {
                if g.width != f.width {
                    continue;
                }
                if let Some((p, _)) = map.iter().find(|(_, m)| **m == v) {
                    return Some(p.as_str());
                }
            }
        }
        None
    }

    /// Checks every structural invariant that does not depend on other
    /// grammars.
    pub fn validate(&self, registry: &HandlerRegistry) -> Result<(), GrammarError> {
        let mut seen = std::collections::HashSet::new();
        for f in &self.fields {
            if !seen.insert(f.name.as_str()) {
                return Err(invalid(&f.name, "duplicate field name"));
            }
        }
        let body_at = self
            .fields
            .iter()
            .position(|f| f.name == self.body)
            .ok_or_else(|| invalid(&self.body, "body field is not declared"))?;
        let body = &self.fields[body_at];
        if body.width != Width::Variable || body.kind != FieldKind::Fuzzed {
            return Err(invalid(&body.name, "body field must be variable-width and fuzzed"));
        }

        let mut offset = 0u32;
        for (i, f) in self.fields.iter().enumerate() {
            if i == body_at {
                if !offset.is_multiple_of(8) {
                    return Err(invalid(&f.name, "header is not byte-aligned before the body"));
                }
                offset = 0;
                continue;
            }
            let w = match f.width {
                Width::Variable => return Err(invalid(&f.name, "only the body field may be variable-width")),
                Width::Bits(w) => w,
            };
            if w == 0 || w > MAX_FIELD_WIDTH {
                return Err(invalid(&f.name, format!("width {w} outside 1..={MAX_FIELD_WIDTH}")));
            }
            if f.endianness == Endianness::Little && (w % 8 != 0 || w <= 8 || !offset.is_multiple_of(8)) {
                return Err(invalid(
                    &f.name,
                    "little-endian requires a byte-aligned multi-byte field",
                ));
            }
            self.validate_kind(f, w, registry)?;
            offset += w;
        }
        if !offset.is_multiple_of(8) {
            return Err(invalid(&self.body, "trailer is not byte-aligned"));
        }
        Ok(())
    }

    fn validate_kind(&self, f: &FieldSpec, w: u32, registry: &HandlerRegistry) -> Result<(), GrammarError> {
        match &f.kind {
            FieldKind::Static(v) => {
                if v.width() != w {
                    return Err(invalid(
                        &f.name,
                        format!("static value has {} bits, field has {w}", v.width()),
                    ));
                }
            }
            FieldKind::Length { .. } | FieldKind::Handler { .. } if w > 64 => {
                return Err(invalid(&f.name, "computed fields are limited to 64 bits"));
            }
            FieldKind::NextLayer { map, .. } => {
                if let Some((p, v)) = map.iter().find(|(_, v)| v.width() != w) {
                    return Err(invalid(&f.name, format!("mapping for `{p}` has {} bits", v.width())));
                }
            }
            _ => {}
        }
        if let FieldKind::Handler { id, .. } = &f.kind {
            if !registry.contains(id) {
                return Err(GrammarError::UnknownHandler {
                    field: f.name.clone(),
                    handler: id.clone(),
                });
            }
        }
        Ok(())
    }
}
