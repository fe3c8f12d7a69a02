use serde::{Deserialize, Serialize};

use crate::grammar::{length_value, FieldKind, GrammarError, GrammarSet, LengthUnit, ProtocolGrammar};
use crate::wire::{decode_field, encode_field, BitReader, BitWriter, Bits, HandlerContext, HandlerRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// Every byte belongs to a recognised layer or the top layer's payload.
    FullyParsed,
    /// A hinted layer failed to parse; its bytes are left as residual.
    Partial,
    /// No frame-level grammar matched.
    Unknown,
}

/// One decoded protocol layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLayer {
    pub protocol: String,
    /// Header and trailer field values in grammar order; the body is absent.
    pub fields: Vec<(String, Bits)>,
    pub header_len: usize,
    pub body_len: usize,
    pub trailer_len: usize,
    /// Bytes of the enclosing body left after this layer's trailer.
    pub slack: Vec<u8>,
}

impl ParsedLayer {
    pub fn get(&self, field: &str) -> Option<&Bits> {
        self.fields.iter().find(|(n, _)| n == field).map(|(_, v)| v)
    }

    pub fn get_u64(&self, field: &str) -> Option<u64> {
        self.get(field).and_then(Bits::to_u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFrame {
    pub layers: Vec<ParsedLayer>,
    /// Body of the top layer when it was not descended into.
    pub payload: Vec<u8>,
    /// Bytes no grammar accounted for: the whole frame when unknown, the
    /// failed inner region when partial.
    pub residual: Vec<u8>,
    pub classification: Classification,
}

impl ParsedFrame {
    pub fn unknown(frame: &[u8]) -> Self {
        ParsedFrame {
            layers: Vec::new(),
            payload: Vec::new(),
            residual: frame.to_vec(),
            classification: Classification::Unknown,
        }
    }

    pub fn layer(&self, protocol: &str) -> Option<&ParsedLayer> {
        self.layers.iter().find(|l| l.protocol == protocol)
    }

    pub fn top(&self) -> Option<&ParsedLayer> {
        self.layers.last()
    }

    pub fn chain(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.protocol.clone()).collect()
    }

    /// Re-encodes the frame from its decoded fields.
    pub fn to_bytes(&self, grammars: &GrammarSet) -> Result<Vec<u8>, GrammarError> {
        let mut out = Vec::new();
        let mut tails = Vec::new();
        for l in &self.layers {
            let g = grammars
                .get(&l.protocol)
                .ok_or_else(|| GrammarError::UnresolvedProtocol(l.protocol.clone()))?;
            let encode = |fields: &[crate::grammar::FieldSpec]| -> Result<Vec<u8>, GrammarError> {
                let mut w = BitWriter::new();
                for f in fields {
                    let v = l.get(&f.name).ok_or_else(|| GrammarError::Validation {
                        field: f.name.clone(),
                        reason: "missing from parsed layer".into(),
                    })?;
                    let wire = encode_field(f, v).map_err(|e| GrammarError::Validation {
                        field: f.name.clone(),
                        reason: e.to_string(),
                    })?;
                    w.put(&wire);
                }
                Ok(w.into_bytes())
            };
            out.extend(encode(g.header())?);
            let mut tail = encode(g.trailer())?;
            tail.extend_from_slice(&l.slack);
            tails.push(tail);
        }
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.residual);
        for t in tails.into_iter().rev() {
            out.extend(t);
        }
        Ok(out)
    }
}

/// Decodes one layer at the start of `data`, checking Static values,
/// Length consistency and handler verification.
pub fn parse_layer(
    g: &ProtocolGrammar,
    data: &[u8],
    ctx: &HandlerContext,
    registry: &HandlerRegistry,
) -> Option<ParsedLayer> {
    let hl = (g.header_bits() / 8) as usize;
    let tl = (g.trailer_bits() / 8) as usize;
    if data.len() < hl + tl {
        return None;
    }
    let avail = data.len() - hl - tl;

    let mut fields = Vec::with_capacity(g.fields.len() - 1);
    let mut r = BitReader::new(&data[..hl]);
    for f in g.header() {
        let raw = r.take(f.width.fixed()?)?;
        fields.push((f.name.clone(), decode_field(f, &raw).ok()?));
    }
    let value = |fields: &[(String, Bits)], name: &str| fields.iter().find(|(n, _)| n == name).map(|(_, v)| v.clone());

    let mut body_len = None;
    for f in g.header() {
        let FieldKind::Length {
            scope,
            unit,
            adjustment,
        } = &f.kind
        else {
            continue;
        };
        let n = i128::from(value(&fields, &f.name)?.to_u64()?) - i128::from(*adjustment);
        let bytes = match unit {
            LengthUnit::Bytes => n,
            LengthUnit::Bits if n % 8 == 0 => n / 8,
            LengthUnit::Bits => return None,
        };
        use crate::grammar::LengthScope::*;
        let implied = match scope {
            HeaderOnly => {
                if bytes != hl as i128 {
                    return None;
                }
                continue;
            }
            HeaderAndBody => bytes - hl as i128,
            BodyOnly => bytes,
        };
        if implied < 0 || implied > avail as i128 || body_len.is_some_and(|b: usize| b as i128 != implied) {
            return None;
        }
        body_len = Some(implied as usize);
    }
    let body_len = body_len.unwrap_or(avail);
    let trailer_at = hl + body_len;

    let mut r = BitReader::new(&data[trailer_at..trailer_at + tl]);
    for f in g.trailer() {
        let raw = r.take(f.width.fixed()?)?;
        fields.push((f.name.clone(), decode_field(f, &raw).ok()?));
    }

    let layer = &data[..trailer_at + tl];
    let mut trailer_bit = trailer_at * 8;
    let mut header_bit = 0usize;
    for f in g.fields.iter() {
        if f.name == g.body {
            continue;
        }
        let w = f.width.fixed()? as usize;
        let in_trailer = g.trailer().iter().any(|t| t.name == f.name);
        let at_bit = if in_trailer { trailer_bit } else { header_bit };
        let v = value(&fields, &f.name)?;
        match &f.kind {
            FieldKind::Static(s) if *s != v => return None,
            FieldKind::Length {
                scope,
                unit,
                adjustment,
            } => {
                let want = length_value(*scope, *unit, *adjustment, hl, body_len);
                if i128::from(v.to_u64()?) != want {
                    return None;
                }
            }
            FieldKind::Handler { id, scope, emit_zero } => {
                let range = scope.byte_range(hl, body_len, at_bit / 8);
                let n = v.to_u64()?;
                let ok = if *emit_zero && n == 0 {
                    true
                } else {
                    registry.verify(id, &layer[range], n, ctx).unwrap_or(false)
                };
                if !ok {
                    return None;
                }
            }
            _ => {}
        }
        if in_trailer {
            trailer_bit += w;
        } else {
            header_bit += w;
        }
    }

    Some(ParsedLayer {
        protocol: g.name.clone(),
        fields,
        header_len: hl,
        body_len,
        trailer_len: tl,
        slack: data[trailer_at + tl..].to_vec(),
    })
}

/// Layered parse of a frame emitted by the target. Every frame-level
/// grammar is tried; descent follows NextLayer selectors.
pub fn parse(frame: &[u8], grammars: &GrammarSet, registry: &HandlerRegistry) -> ParsedFrame {
    let mut best: Option<ParsedFrame> = None;
    for root in grammars.roots() {
        let Some(p) = parse_from(frame, root, grammars, registry, None) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => rank(&p) > rank(b),
        };
        if better {
            best = Some(p);
        }
    }
    best.unwrap_or_else(|| ParsedFrame::unknown(frame))
}

fn rank(p: &ParsedFrame) -> (bool, usize) {
    (p.classification == Classification::FullyParsed, p.layers.len())
}

/// Parses `frame` as exactly the layers in `chain`, ignoring selector
/// values. Bytes above the chain are returned as payload.
pub fn parse_as(frame: &[u8], chain: &[String], grammars: &GrammarSet, registry: &HandlerRegistry) -> ParsedFrame {
    let Some(root) = chain.first().and_then(|n| grammars.get(n)) else {
        return ParsedFrame::unknown(frame);
    };
    parse_from(frame, root, grammars, registry, Some(chain)).unwrap_or_else(|| ParsedFrame::unknown(frame))
}

fn parse_from(
    frame: &[u8],
    root: &ProtocolGrammar,
    grammars: &GrammarSet,
    registry: &HandlerRegistry,
    hint: Option<&[String]>,
) -> Option<ParsedFrame> {
    let mut layers: Vec<ParsedLayer> = Vec::new();
    let mut g = root;
    let (mut start, mut end) = (0usize, frame.len());
    let mut ctx = HandlerContext::default();
    loop {
        let Some(pl) = parse_layer(g, &frame[start..end], &ctx, registry) else {
            if layers.is_empty() {
                return None;
            }
            // A hinted layer must parse. Otherwise the selector named a
            // protocol the body does not hold, and the body stays payload.
            let (payload, residual, classification) = match hint {
                Some(_) => (Vec::new(), frame[start..end].to_vec(), Classification::Partial),
                None => (frame[start..end].to_vec(), Vec::new(), Classification::FullyParsed),
            };
            return Some(ParsedFrame {
                layers,
                payload,
                residual,
                classification,
            });
        };
        let lookup = |name: &str| pl.get(name).cloned();
        let next = match hint {
            Some(h) => h.get(layers.len() + 1).map(String::as_str),
            None => g
                .select_upper(lookup)
                .filter(|p| grammars.get(p).is_some_and(|u| u.lower.contains(&g.name))),
        };
        if hint.is_none() && layers.is_empty() && g.has_next_layer() && next.is_none() {
            return None;
        }
        ctx = g.context_for_upper(lookup);
        let body = start + pl.header_len..start + pl.header_len + pl.body_len;
        layers.push(pl);
        match next.and_then(|p| grammars.get(p)) {
            Some(u) => {
                g = u;
                (start, end) = (body.start, body.end);
            }
            None if next.is_some() => {
                return Some(ParsedFrame {
                    layers,
                    payload: Vec::new(),
                    residual: frame[body].to_vec(),
                    classification: Classification::Partial,
                });
            }
            None => {
                return Some(ParsedFrame {
                    layers,
                    payload: frame[body].to_vec(),
                    residual: Vec::new(),
                    classification: Classification::FullyParsed,
                });
            }
        }
    }
}
