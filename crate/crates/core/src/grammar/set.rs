use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use super::{load_grammar, FieldKind, GrammarError, ProtocolGrammar};
use crate::wire::HandlerRegistry;

const SHIPPED: &[(&str, &str)] = &[
    ("ethernet", include_str!("../../protocols/ethernet.toml")),
    ("arp", include_str!("../../protocols/arp.toml")),
    ("ipv4", include_str!("../../protocols/ipv4.toml")),
    ("icmpv4", include_str!("../../protocols/icmpv4.toml")),
    ("udp", include_str!("../../protocols/udp.toml")),
    ("dhcp", include_str!("../../protocols/dhcp.toml")),
    ("tcp", include_str!("../../protocols/tcp.toml")),
    ("modbus", include_str!("../../protocols/modbus.toml")),
];

/// The grammar library: every protocol the virtual network can speak.
#[derive(Debug, Clone, Default)]
pub struct GrammarSet {
    grammars: BTreeMap<String, Arc<ProtocolGrammar>>,
}

impl GrammarSet {
    /// Builds a set and checks cross-grammar references.
    pub fn new(grammars: impl IntoIterator<Item = ProtocolGrammar>) -> Result<Self, GrammarError> {
        let grammars: BTreeMap<_, _> = grammars.into_iter().map(|g| (g.name.clone(), Arc::new(g))).collect();
        let set = GrammarSet { grammars };
        for g in set.grammars.values() {
            for l in &g.lower {
                set.require(l)?;
            }
            for f in &g.fields {
                if let FieldKind::NextLayer { map, .. } = &f.kind {
                    for p in map.keys() {
                        set.require(p)?;
                    }
                }
            }
        }
        for name in set.grammars.keys() {
            set.resolve_stack(name)?;
        }
        Ok(set)
    }

    /// The eight protocol documents bundled with the crate.
    pub fn shipped(registry: &HandlerRegistry) -> Self {
        let grammars = SHIPPED
            .iter()
            .map(|(name, src)| load_grammar(src, registry).unwrap_or_else(|e| panic!("shipped grammar `{name}`: {e}")))
            .collect::<Vec<_>>();
        Self::new(grammars).expect("shipped grammars are consistent")
    }

    pub fn shipped_sources() -> &'static [(&'static str, &'static str)] {
        SHIPPED
    }

    /// Loads every `*.toml` file in `dir`.
    pub fn load_dir(dir: &Path, registry: &HandlerRegistry) -> Result<Self, GrammarError> {
        let mut out = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| GrammarError::Schema(e.to_string()))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        for p in paths {
            let src = std::fs::read_to_string(&p).map_err(|e| GrammarError::Schema(e.to_string()))?;
            out.push(load_grammar(&src, registry)?);
        }
        Self::new(out)
    }

    fn require(&self, name: &str) -> Result<&Arc<ProtocolGrammar>, GrammarError> {
        self.grammars
            .get(name)
            .ok_or_else(|| GrammarError::UnresolvedProtocol(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<&Arc<ProtocolGrammar>> {
        self.grammars.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.grammars.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.grammars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grammars.is_empty()
    }

    pub fn roots(&self) -> impl Iterator<Item = &Arc<ProtocolGrammar>> {
        self.grammars.values().filter(|g| g.is_frame_level())
    }

    /// Grammars whose canonical lower layer is `name`.
    pub fn uppers_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Arc<ProtocolGrammar>> + 'a {
        self.grammars
            .values()
            .filter(move |g| g.lower.first().map(String::as_str) == Some(name))
    }

    pub fn resolve_stack(&self, top: &str) -> Result<Vec<Arc<ProtocolGrammar>>, GrammarError> {
        let mut chain = vec![self.require(top)?.clone()];
        while let Some(lower) = chain.last().unwrap().lower.first() {
            if chain.iter().any(|g| &g.name == lower) {
                let mut names: Vec<_> = chain.iter().map(|g| g.name.clone()).collect();
                names.push(lower.clone());
                return Err(GrammarError::Cycle(names));
            }
            chain.push(self.require(lower)?.clone());
        }
        chain.reverse();
        Ok(chain)
    }

    /// Looks up every name in `chain`.
    pub fn chain(&self, chain: &[String]) -> Result<Vec<Arc<ProtocolGrammar>>, GrammarError> {
        chain.iter().map(|n| self.require(n).cloned()).collect()
    }
}

/// Bottom-to-top chain ending at `top`, following canonical lower layers.
///
/// Works on an arbitrary list of grammars, so it can report cycles that
/// [`GrammarSet::new`] would refuse to build.
pub fn resolve_stack(grammars: &[ProtocolGrammar], top: &str) -> Result<Vec<String>, GrammarError> {
    let find = |n: &str| {
        grammars
            .iter()
            .find(|g| g.name == n)
            .ok_or_else(|| GrammarError::UnresolvedProtocol(n.to_string()))
    };
    let mut chain = vec![find(top)?.name.clone()];
    let mut cur = find(top)?;
    while let Some(lower) = cur.lower.first() {
        if chain.contains(lower) {
            let mut names = chain.clone();
            names.push(lower.clone());
            return Err(GrammarError::Cycle(names));
        }
        cur = find(lower)?;
        chain.push(cur.name.clone());
    }
    chain.reverse();
    Ok(chain)
}
