//! Object receiver resolution for callback call sites.
//!
//! A demand-driven, flow-sensitive backward alias analysis follows the
//! receiver local of a callback call site along its call chain (through
//! assignments, field loads and stores, and parameter bindings at each hop)
//! until it reaches access paths rooted at the API method's calling object,
//! its parameters, or static fields. The rooted paths then classify the
//! receiver as `this`, a parameter access path, or `unknown`.

use crate::callbacks::{CallChain, CallSiteSet};
use crate::graphs::{CfgNode, Icfg};
use crate::ir::{Constant, MethodRef, Operand, Program, StmtId, StmtKind};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Maximum access-path length; longer aliases are truncated and contribute
/// `unknown` downstream.
pub const ACCESS_PATH_BOUND: usize = 5;

/// One element of an access-path chain: a field or an argument-less call.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathToken {
    Field(String),
    Call(String),
}

impl std::fmt::Display for PathToken {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathToken::Field(name) => f.write_str(name),
            PathToken::Call(name) => write!(f, "{name}()"),
        }
    }
}

pub fn tokens_to_string(tokens: &[PathToken]) -> String {
    tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(".")
}

/// Root of a fully resolved access path: app-visible scopes only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathRoot {
    CallingObject,
    Param(usize),
    Static(String),
}

/// A rooted may-alias access path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccessPath {
    pub root: PathRoot,
    pub tokens: Vec<PathToken>,
}

impl std::fmt::Display for AccessPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.root {
            PathRoot::CallingObject => f.write_str("this")?,
            PathRoot::Param(i) => write!(f, "param({i})")?,
            PathRoot::Static(c) => write!(f, "static({c})")?,
        }
        for t in &self.tokens {
            write!(f, ".{t}")?;
        }
        Ok(())
    }
}

/// Result of the backward alias walk.
#[derive(Debug, Clone, Default)]
pub struct AliasSet {
    pub paths: BTreeSet<AccessPath>,
    /// Some alias exceeded the path bound and was dropped.
    pub truncated: bool,
}

/// Receiver of a callback as seen from the API method's interface.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReceiverSpec {
    This,
    Param { index: usize, path: Vec<PathToken> },
    Unknown,
}

impl std::fmt::Display for ReceiverSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReceiverSpec::This => f.write_str("this"),
            ReceiverSpec::Param { index, path } if path.is_empty() => write!(f, "param({index})"),
            ReceiverSpec::Param { index, path } => {
                write!(f, "param({index}).{}", tokens_to_string(path))
            }
            ReceiverSpec::Unknown => f.write_str("unknown"),
        }
    }
}

/// Resolution of one (call site, chain) pair. `Unknown` only ever appears
/// alone.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReceiverResolution {
    pub site: StmtId,
    pub chain: CallChain,
    pub receivers: Vec<ReceiverSpec>,
}

/// In-flight (unrooted) alias during the backward walk: a local of the
/// current chain method, or an already-rooted static.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Base {
    Local(String),
    Static(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Alias {
    base: Base,
    tokens: Vec<PathToken>,
}

impl Alias {
    fn prepend(&self, tok: PathToken, new_base: Base, truncated: &mut bool) -> Option<Alias> {
        if self.tokens.len() + 1 > ACCESS_PATH_BOUND {
            *truncated = true;
            return None;
        }
        let mut tokens = Vec::with_capacity(self.tokens.len() + 1);
        tokens.push(tok);
        tokens.extend(self.tokens.iter().cloned());
        Some(Alias { base: new_base, tokens })
    }
}

/// Backward transfer of one statement: rewrites an alias valid after the
/// statement into the aliases valid before it.
fn transfer(stmt: &StmtKind, alias: &Alias, truncated: &mut bool) -> Vec<Alias> {
    let is_base = |name: &str| alias.base == Base::Local(name.to_string());
    match stmt {
        StmtKind::AssignLocal { dst, src } if is_base(dst) => match src {
            Operand::Local(y) => vec![Alias { base: Base::Local(y.clone()), tokens: alias.tokens.clone() }],
            Operand::Const(_) => Vec::new(),
        },
        StmtKind::BinaryOp { dst, .. } | StmtKind::New { dst, .. } if is_base(dst) => Vec::new(),
        StmtKind::FieldLoad { dst, base, field } if is_base(dst) => alias
            .prepend(PathToken::Field(field.clone()), Base::Local(base.clone()), truncated)
            .into_iter()
            .collect(),
        StmtKind::StaticLoad { dst, class, field } if is_base(dst) => alias
            .prepend(PathToken::Field(field.clone()), Base::Static(class.clone()), truncated)
            .into_iter()
            .collect(),
        StmtKind::VirtualCall { dst: Some(d), base, method, .. } if is_base(d) => alias
            .prepend(PathToken::Call(method.clone()), Base::Local(base.clone()), truncated)
            .into_iter()
            .collect(),
        StmtKind::StaticCall { dst: Some(d), class, method, .. } if is_base(d) => alias
            .prepend(PathToken::Call(method.clone()), Base::Static(class.clone()), truncated)
            .into_iter()
            .collect(),
        StmtKind::FieldStore { base, field, value } => {
            match (&alias.base, alias.tokens.first()) {
                (Base::Local(b), Some(PathToken::Field(f))) if f == field => {
                    let rest: Vec<PathToken> = alias.tokens[1..].to_vec();
                    let mut out = Vec::new();
                    if let Operand::Local(y) = value {
                        out.push(Alias { base: Base::Local(y.clone()), tokens: rest });
                    }
                    if b != base {
                        // The store may or may not hit this alias's base.
                        out.push(alias.clone());
                    }
                    out
                }
                _ => vec![alias.clone()],
            }
        }
        StmtKind::StaticStore { class, field, value } => {
            match (&alias.base, alias.tokens.first()) {
                (Base::Static(c), Some(PathToken::Field(f))) if c == class && f == field => {
                    let rest: Vec<PathToken> = alias.tokens[1..].to_vec();
                    match value {
                        Operand::Local(y) => {
                            vec![Alias { base: Base::Local(y.clone()), tokens: rest }]
                        }
                        Operand::Const(_) => Vec::new(),
                    }
                }
                _ => vec![alias.clone()],
            }
        }
        _ => vec![alias.clone()],
    }
}

/// Demand-driven backward may-alias analysis for `base`, the receiver local
/// of the callback call site at the tail of `chain`. Loops are traversed at
/// most once (each state is visited once).
pub fn backward_alias(
    program: &Program,
    icfg: &Icfg,
    chain: &CallChain,
    site: &StmtId,
    base: &str,
) -> AliasSet {
    let mut result = AliasSet::default();
    let last = chain.methods.len() - 1;
    let start = Alias { base: Base::Local(base.to_string()), tokens: Vec::new() };

    // State: (chain position, CFG node of that method, alias valid *before*
    // the node executes).
    let mut queue: VecDeque<(usize, CfgNode, Alias)> = VecDeque::new();
    let mut seen: BTreeSet<(usize, CfgNode, Alias)> = BTreeSet::new();
    queue.push_back((last, CfgNode::Stmt(site.idx), start));
    while let Some((k, node, alias)) = queue.pop_front() {
        if !seen.insert((k, node, alias.clone())) {
            continue;
        }
        let method = &chain.methods[k];
        if node == CfgNode::Entry {
            finalize_or_hop(program, chain, k, alias, &mut result, &mut queue);
            continue;
        }
        let Some(cfg) = icfg.cfgs.get(method) else { continue };
        for pred in cfg.preds(node) {
            match pred {
                CfgNode::Stmt(i) => {
                    let stmt = &program.method(method).expect("chain methods have bodies").body[i];
                    let mut truncated = false;
                    for a in transfer(&stmt.kind, &alias, &mut truncated) {
                        queue.push_back((k, pred, a));
                    }
                    result.truncated |= truncated;
                }
                CfgNode::Entry => queue.push_back((k, CfgNode::Entry, alias.clone())),
                CfgNode::Exit => {}
            }
        }
    }
    result
}

fn finalize_or_hop(
    program: &Program,
    chain: &CallChain,
    k: usize,
    alias: Alias,
    result: &mut AliasSet,
    queue: &mut VecDeque<(usize, CfgNode, Alias)>,
) {
    let method = &chain.methods[k];
    let def = program.method(method).expect("chain methods have bodies");
    if k == 0 {
        // Roots of the API method's interface.
        match alias.base {
            Base::Static(c) => {
                result.paths.insert(AccessPath { root: PathRoot::Static(c), tokens: alias.tokens });
            }
            Base::Local(name) if name == "this" && !def.is_static => {
                result
                    .paths
                    .insert(AccessPath { root: PathRoot::CallingObject, tokens: alias.tokens });
            }
            Base::Local(name) => {
                if let Some(i) = def.param_index(&name) {
                    result.paths.insert(AccessPath { root: PathRoot::Param(i), tokens: alias.tokens });
                }
                // Other locals are undefined at entry: no alias.
            }
        }
        return;
    }

    // Parameter binding at the hop site in the caller.
    let hop = &chain.hops[k - 1];
    let caller = &chain.methods[k - 1];
    let hop_stmt = &program.method(caller).expect("chain methods have bodies").body[hop.idx];
    let rebased = match &alias.base {
        Base::Static(_) => Some(alias.clone()),
        Base::Local(name) => {
            let (args, receiver) = match &hop_stmt.kind {
                StmtKind::VirtualCall { base, args, .. } => (args.clone(), Some(base.clone())),
                StmtKind::StaticCall { args, .. } => (args.clone(), None),
                _ => (Vec::new(), None),
            };
            if name == "this" && !def.is_static {
                receiver.map(|r| Alias { base: Base::Local(r), tokens: alias.tokens.clone() })
            } else if let Some(i) = def.param_index(name) {
                match args.get(i) {
                    Some(Operand::Local(y)) => {
                        Some(Alias { base: Base::Local(y.clone()), tokens: alias.tokens.clone() })
                    }
                    // A constant receiver origin is not an object alias.
                    Some(Operand::Const(Constant::Str(_))) | Some(Operand::Const(_)) | None => None,
                }
            } else {
                None
            }
        }
    };
    if let Some(a) = rebased {
        queue.push_back((k - 1, CfgNode::Stmt(hop.idx), a));
    }
}

/// Algorithm: for each (call site, chain), compute the may-aliases of the
/// receiver and map them onto the API method's interface. An empty result
/// forces `{unknown}`.
pub fn resolve_receivers(
    program: &Program,
    icfg: &Icfg,
    callsites: &CallSiteSet,
) -> Vec<ReceiverResolution> {
    let mut out = Vec::new();
    for (site, _) in &callsites.sites {
        let Some(chains) = callsites.chains.get(site) else { continue };
        for chain in chains {
            if chain.api() != &icfg.root {
                continue;
            }
            out.push(resolve_one(program, icfg, site, chain));
        }
    }
    out.sort();
    out
}

/// Resolves a single (call site, chain) pair.
pub fn resolve_one(
    program: &Program,
    icfg: &Icfg,
    site: &StmtId,
    chain: &CallChain,
) -> ReceiverResolution {
    let def = program.method(&site.method).expect("site method has a body");
    let base = match &def.body[site.idx].kind {
        StmtKind::VirtualCall { base, .. } => base.clone(),
        _ => String::new(),
    };
    let aliases = backward_alias(program, icfg, chain, site, &base);
    let mut receivers = BTreeSet::new();
    for p in &aliases.paths {
        match &p.root {
            PathRoot::CallingObject if p.tokens.is_empty() => {
                receivers.insert(ReceiverSpec::This);
            }
            PathRoot::Param(i) => {
                receivers.insert(ReceiverSpec::Param { index: *i, path: p.tokens.clone() });
            }
            _ => {}
        }
    }
    if receivers.is_empty() {
        receivers.insert(ReceiverSpec::Unknown);
    }
    ReceiverResolution { site: site.clone(), chain: chain.clone(), receivers: receivers.into_iter().collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callbacks::{callback_signatures, find_call_chains, link_async_handlers};
    use crate::graphs::{build_call_graph, build_icfg};

    /// Runs the receiver pipeline for every api in the program.
    fn resolve_all(src: &str) -> Vec<ReceiverResolution> {
        let p = crate::ir::parse_program(src).unwrap();
        let mut cg = build_call_graph(&p);
        link_async_handlers(&p, &mut cg);
        let sigs = callback_signatures(&p);
        let set = find_call_chains(&p, &cg, &sigs, 16, 5, 0);
        let mut out = Vec::new();
        for api in p.api_methods() {
            let icfg = build_icfg(&p, &api, &cg, 16).unwrap();
            out.extend(resolve_receivers(&p, &icfg, &set));
        }
        out
    }

    #[test]
    fn direct_this_copy() {
        let res = resolve_all(
            "framework class C {\n\
               public void onUnbind() { return; }\n\
               api public void go() { C c; c = this; virtual c.onUnbind(); return; }\n\
             }",
        );
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].receivers, vec![ReceiverSpec::This]);
    }

    #[test]
    fn receiver_from_param_field() {
        let res = resolve_all(
            "framework class Service { public void onDestroy() { return; } }\n\
             framework class Conn { public Service service; }\n\
             framework class C {\n\
               api public void unbind(Conn conn) { Service s; s = conn.service; virtual s.onDestroy(); return; }\n\
             }",
        );
        assert_eq!(res.len(), 1);
        assert_eq!(
            res[0].receivers,
            vec![ReceiverSpec::Param { index: 0, path: vec![PathToken::Field("service".into())] }]
        );
    }

    #[test]
    fn unknown_when_state_from_other_api() {
        // setText-style: the receiver was stored by a different API method.
        let res = resolve_all(
            "framework class Watcher { public void onTextChanged() { return; } }\n\
             framework class Global { public static Watcher w; }\n\
             framework class TextView {\n\
               api public void addWatcher(Watcher w) { static Global.w = w; return; }\n\
               api public void setText(string t) { Watcher w; w = static Global.w; virtual w.onTextChanged(); return; }\n\
             }",
        );
        // Two chains for the same site are possible only per-api; setText's
        // chain resolves the static without seeing addWatcher's store.
        let set_text: Vec<_> =
            res.iter().filter(|r| r.chain.api().sig.name == "setText").collect();
        assert_eq!(set_text.len(), 1);
        assert_eq!(set_text[0].receivers, vec![ReceiverSpec::Unknown]);
    }

    #[test]
    fn fresh_object_receiver_is_unknown() {
        let res = resolve_all(
            "framework class Watcher { public void onTextChanged() { return; } }\n\
             framework class C { api public void go() { Watcher w; w = new Watcher; virtual w.onTextChanged(); return; } }",
        );
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].receivers, vec![ReceiverSpec::Unknown]);
    }

    #[test]
    fn static_store_resolves_to_param_across_async_hop() {
        let res = resolve_all(
            "framework class Service { public void onCreate() { return; } }\n\
             framework class Global { public static Service service; public static H h; }\n\
             framework class H extends Handler {\n\
               public void handleMessage(int m) { Service s; s = static Global.service; virtual s.onCreate(); return; }\n\
             }\n\
             framework class C {\n\
               api public void start(Service s) { H h; int m; static Global.service = s; h = static Global.h; m = 1; virtual h.sendMessage(m); return; }\n\
             }",
        );
        let create: Vec<_> = res
            .iter()
            .filter(|r| r.chain.methods.last().unwrap().sig.name == "handleMessage")
            .collect();
        assert_eq!(create.len(), 1);
        assert_eq!(create[0].receivers, vec![ReceiverSpec::Param { index: 0, path: vec![] }]);
    }

    #[test]
    fn truncated_paths_fall_back_to_unknown() {
        let res = resolve_all(
            "framework class N { public N next; public void onEvent() { return; } }\n\
             framework class C {\n\
               api public void go(N n) {\n\
                 N a; N b; N c; N d; N e; N f; N g;\n\
                 a = n.next; b = a.next; c = b.next; d = c.next; e = d.next; f = e.next;\n\
                 virtual f.onEvent();\n\
                 return;\n\
               }\n\
             }",
        );
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].receivers, vec![ReceiverSpec::Unknown], "6 fields exceeds the bound");
    }

    #[test]
    fn never_empty_receiver_set() {
        // A receiver that resolves only to a static stays a non-empty set
        // thanks to the unknown fallback.
        let res = resolve_all(
            "framework class W { public void onEvent() { return; } }\n\
             framework class G { public static W w; }\n\
             framework class C { api public void go() { W x; x = static G.w; virtual x.onEvent(); return; } }",
        );
        for r in &res {
            assert!(!r.receivers.is_empty());
        }
    }
}
