//! TOML grammar documents. The schema is described in `protocols/README.md`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    invalid, FieldKind, FieldSpec, GrammarError, HandlerScope, Handshake, LengthScope, LengthUnit, ProtocolGrammar,
    Width,
};
use crate::wire::{Bits, Endianness, HandlerRegistry};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Literal {
    Int(u64),
    Text(String),
}

impl Literal {
    fn to_bits(&self) -> Result<Bits, String> {
        match self {
            Literal::Int(v) => Ok(Bits::from_u64_truncating(64, *v)),
            Literal::Text(s) => Bits::parse_text(s).map_err(|e| e.to_string()),
        }
    }

    fn to_width(&self, width: u32) -> Result<Bits, String> {
        let raw = self.to_bits()?;
        raw.resize(width)
            .ok_or_else(|| format!("value {} does not fit in {width} bits", raw.to_hex()))
    }

    fn from_bits(b: &Bits) -> Literal {
        Literal::Text(b.to_hex())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum WidthDoc {
    Bits(u32),
    Word(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct KindArgs {
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<Literal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scope: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unit: Option<LengthUnit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adjustment: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    map: Option<BTreeMap<String, Literal>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fallback: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    handler: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zero_checksum: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    harvest: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FieldDoc {
    name: String,
    width: WidthDoc,
    kind: String,
    #[serde(default, skip_serializing_if = "is_default_args")]
    kind_args: KindArgs,
    #[serde(default, skip_serializing_if = "is_big")]
    endianness: Endianness,
}

fn is_default_args(a: &KindArgs) -> bool {
    serde_json::to_value(a)
        .map(|v| v == serde_json::json!({}))
        .unwrap_or(false)
}

fn is_big(e: &Endianness) -> bool {
    *e == Endianness::Big
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct GrammarDoc {
    name: String,
    body: String,
    #[serde(default)]
    lower: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    handshake: Option<Handshake>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    defaults: BTreeMap<String, Literal>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    probe_values: BTreeMap<String, Vec<Literal>>,
    fields: Vec<FieldDoc>,
}

fn require<T: Clone>(field: &str, what: &str, v: &Option<T>) -> Result<T, GrammarError> {
    v.clone()
        .ok_or_else(|| invalid(field, format!("missing kind-arg `{what}`")))
}

fn convert_field(doc: &FieldDoc) -> Result<FieldSpec, GrammarError> {
    let name = doc.name.as_str();
    let width = match &doc.width {
        WidthDoc::Bits(w) => Width::Bits(*w),
        WidthDoc::Word(s) if s == "variable" => Width::Variable,
        WidthDoc::Word(s) => return Err(GrammarError::Schema(format!("field `{name}`: bad width `{s}`"))),
    };
    let fixed = || {
        width
            .fixed()
            .ok_or_else(|| invalid(name, "field kind needs a fixed width"))
    };
    let a = &doc.kind_args;
    let kind = match doc.kind.as_str() {
        "static" => {
            let v = require(name, "value", &a.value)?;
            FieldKind::Static(v.to_width(fixed()?).map_err(|e| invalid(name, e))?)
        }
        "length" => {
            let scope = match require(name, "scope", &a.scope)?.as_str() {
                "header-only" => LengthScope::HeaderOnly,
                "header+body" => LengthScope::HeaderAndBody,
                "body-only" => LengthScope::BodyOnly,
                other => return Err(invalid(name, format!("unknown length scope `{other}`"))),
            };
            FieldKind::Length {
                scope,
                unit: a.unit.unwrap_or(LengthUnit::Bytes),
                adjustment: a.adjustment.unwrap_or(0),
            }
        }
        "next-layer" => {
            let w = fixed()?;
            let map = require(name, "map", &a.map)?
                .iter()
                .map(|(p, v)| Ok((p.clone(), v.to_width(w).map_err(|e| invalid(name, e))?)))
                .collect::<Result<_, GrammarError>>()?;
            FieldKind::NextLayer {
                map,
                fallback: a.fallback.clone(),
            }
        }
        "handler" => {
            let scope = match a.scope.as_deref().unwrap_or("header") {
                "header" => HandlerScope::Header,
                "header+body" => HandlerScope::HeaderAndBody,
                "preceding" => HandlerScope::Preceding,
                other => return Err(invalid(name, format!("unknown handler scope `{other}`"))),
            };
            FieldKind::Handler {
                id: require(name, "handler", &a.handler)?,
                scope,
                emit_zero: a.zero_checksum.unwrap_or(false),
            }
        }
        "stateful" => FieldKind::Stateful {
            key: require(name, "key", &a.key)?,
            harvest: a.harvest.clone(),
        },
        "fuzzed" => FieldKind::Fuzzed,
        other => return Err(GrammarError::Schema(format!("field `{name}`: unknown kind `{other}`"))),
    };
    Ok(FieldSpec {
        name: doc.name.clone(),
        width,
        kind,
        endianness: doc.endianness,
    })
}

/// Parses and validates one grammar document.
pub fn load_grammar(source: &str, registry: &HandlerRegistry) -> Result<ProtocolGrammar, GrammarError> {
    let doc: GrammarDoc = toml::from_str(source).map_err(|e| GrammarError::Schema(e.to_string()))?;
    let fields = doc.fields.iter().map(convert_field).collect::<Result<Vec<_>, _>>()?;
    let lit = |k: &str, v: &Literal| v.to_bits().map_err(|e| invalid(k, e));
    let defaults = doc
        .defaults
        .iter()
        .map(|(k, v)| Ok((k.clone(), lit(k, v)?)))
        .collect::<Result<_, GrammarError>>()?;
    let probe_values = doc
        .probe_values
        .iter()
        .map(|(k, vs)| Ok((k.clone(), vs.iter().map(|v| lit(k, v)).collect::<Result<_, _>>()?)))
        .collect::<Result<_, GrammarError>>()?;
    let g = ProtocolGrammar {
        name: doc.name,
        fields,
        body: doc.body,
        lower: doc.lower,
        handshake: doc.handshake,
        defaults,
        probe_values,
    };
    g.validate(registry)?;
    Ok(g)
}

/// Serializes a grammar back into document form.
pub fn to_document(g: &ProtocolGrammar) -> String {
    let fields = g
        .fields
        .iter()
        .map(|f| {
            let mut a = KindArgs::default();
            let kind = match &f.kind {
                FieldKind::Static(v) => {
                    a.value = Some(Literal::from_bits(v));
                    "static"
                }
                FieldKind::Length {
                    scope,
                    unit,
                    adjustment,
                } => {
                    a.scope = Some(
                        match scope {
                            LengthScope::HeaderOnly => "header-only",
                            LengthScope::HeaderAndBody => "header+body",
                            LengthScope::BodyOnly => "body-only",
                        }
                        .into(),
                    );
                    a.unit = Some(*unit);
                    a.adjustment = Some(*adjustment);
                    "length"
                }
                FieldKind::NextLayer { map, fallback } => {
                    a.map = Some(map.iter().map(|(k, v)| (k.clone(), Literal::from_bits(v))).collect());
                    a.fallback = fallback.clone();
                    "next-layer"
                }
                FieldKind::Handler { id, scope, emit_zero } => {
                    a.handler = Some(id.clone());
                    a.scope = Some(
                        match scope {
                            HandlerScope::Header => "header",
                            HandlerScope::HeaderAndBody => "header+body",
                            HandlerScope::Preceding => "preceding",
                        }
                        .into(),
                    );
                    a.zero_checksum = emit_zero.then_some(true);
                    "handler"
                }
                FieldKind::Stateful { key, harvest } => {
                    a.key = Some(key.clone());
                    a.harvest = harvest.clone();
                    "stateful"
                }
                FieldKind::Fuzzed => "fuzzed",
            };
            FieldDoc {
                name: f.name.clone(),
                width: match f.width {
                    Width::Bits(w) => WidthDoc::Bits(w),
                    Width::Variable => WidthDoc::Word("variable".into()),
                },
                kind: kind.into(),
                kind_args: a,
                endianness: f.endianness,
            }
        })
        .collect();
    let doc = GrammarDoc {
        name: g.name.clone(),
        body: g.body.clone(),
        lower: g.lower.clone(),
        handshake: g.handshake,
        defaults: g
            .defaults
            .iter()
            .map(|(k, v)| (k.clone(), Literal::from_bits(v)))
            .collect(),
        probe_values: g
            .probe_values
            .iter()
            .map(|(k, vs)| (k.clone(), vs.iter().map(Literal::from_bits).collect()))
            .collect(),
        fields,
    };
    toml::to_string(&doc).expect("grammar documents always serialize")
}
