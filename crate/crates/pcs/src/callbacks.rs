//! Callback signature discovery, call-site matching, bounded call-chain
//! extraction, and linking of the asynchronous `sendMessage`/`handleMessage`
//! idiom.

use crate::graphs::{CallGraph, CallKind};
use crate::ir::{Diagnostic, MethodRef, MethodSig, Origin, Program, StmtId, StmtKind, Type, Visibility};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// A method an app can override and the framework can invoke via dynamic
/// dispatch: a non-static, non-final, public-or-protected method of a
/// non-final framework class, or any method of a public framework interface.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallbackSignature {
    /// Declaring class or interface.
    pub owner: String,
    pub sig: MethodSig,
    pub from_interface: bool,
}

impl std::fmt::Display for CallbackSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.owner, self.sig)
    }
}

/// A call path from an API method `m0` down to the method containing a
/// matched call site, with the call-site statement taken at each hop.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallChain {
    /// `methods[0]` is the API method; the last element contains the call site.
    pub methods: Vec<MethodRef>,
    /// `hops[i]` is the call site in `methods[i]` that reaches `methods[i+1]`.
    pub hops: Vec<StmtId>,
}

impl CallChain {
    pub fn api(&self) -> &MethodRef {
        &self.methods[0]
    }

    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }

    /// Whether any hop is an async (`sendMessage`) edge per `cg`.
    pub fn is_async(&self, cg: &CallGraph) -> bool {
        self.hops.iter().enumerate().any(|(i, site)| {
            cg.callees_of_site(site)
                .iter()
                .any(|e| e.kind == CallKind::Async && e.callee == self.methods[i + 1])
        })
    }
}

/// All call sites matching some callback signature, with the call chains
/// that reach them from API methods. An empty chain list means the site is
/// unreachable from any API method within the bounds.
#[derive(Debug, Clone, Default)]
pub struct CallSiteSet {
    pub sites: BTreeMap<StmtId, CallbackSignature>,
    pub chains: BTreeMap<StmtId, Vec<CallChain>>,
}

/// Enumerates the potential callback signatures of the framework part of a
/// program.
pub fn callback_signatures(program: &Program) -> BTreeSet<CallbackSignature> {
    let mut out = BTreeSet::new();
    for class in program.classes() {
        if class.origin != Origin::Framework || class.is_final || class.is_builtin {
            continue;
        }
        for m in &class.methods {
            if m.is_static || m.is_final {
                continue;
            }
            if !matches!(m.visibility, Visibility::Public | Visibility::Protected) {
                continue;
            }
            out.insert(CallbackSignature {
                owner: class.name.clone(),
                sig: m.sig(),
                from_interface: false,
            });
        }
    }
    for iface in program.interfaces() {
        if iface.origin != Origin::Framework {
            continue;
        }
        for (sig, _, _) in &iface.methods {
            out.insert(CallbackSignature {
                owner: iface.name.clone(),
                sig: sig.clone(),
                from_interface: true,
            });
        }
    }
    out
}

/// The signature a virtual call site matches, if any: the nearest declaration
/// of the called method walking up from the declared receiver type, falling
/// back to a declaring interface.
pub fn match_call_site(
    program: &Program,
    sigs: &BTreeSet<CallbackSignature>,
    caller: &MethodRef,
    stmt_idx: usize,
) -> Option<CallbackSignature> {
    let def = program.method(caller)?;
    let stmt = def.body.get(stmt_idx)?;
    let StmtKind::VirtualCall { base, method, args, .. } = &stmt.kind else {
        return None;
    };
    let decl = match def.local_type(&caller.class, base) {
        Some(Type::Class(name)) => name,
        _ => return None,
    };
    let resolved = program.resolve_call(&decl, method, args.len());
    if let Some(target) = &resolved {
        let candidate = CallbackSignature {
            owner: target.class.clone(),
            sig: target.sig.clone(),
            from_interface: false,
        };
        if sigs.contains(&candidate) {
            return Some(candidate);
        }
    }
    if program.class(&decl).is_some() {
        if let Some(r) = &resolved {
            if let Some(iface) = program.declaring_interface(&decl, &r.sig) {
                let candidate =
                    CallbackSignature { owner: iface, sig: r.sig.clone(), from_interface: true };
                if sigs.contains(&candidate) {
                    return Some(candidate);
                }
            }
        }
    } else if program.interface(&decl).is_some() {
        // Interface-typed receiver: the interface itself declares the method.
        if let Some(idef) = program.interface(&decl) {
            if let Some((sig, _, _)) =
                idef.methods.iter().find(|(s, _, _)| s.name == *method && s.params.len() == args.len())
            {
                let candidate =
                    CallbackSignature { owner: decl, sig: sig.clone(), from_interface: true };
                if sigs.contains(&candidate) {
                    return Some(candidate);
                }
            }
        }
    }
    None
}

/// Stable string hash for deriving per-site RNG streams from the user seed.
fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Finds every framework call site matching a callback signature and the
/// call chains that reach it, traversing the call graph backwards from the
/// site until an API method is hit.
///
/// Chains longer than `max_len` methods are pruned. When a method has more
/// than `max_callers` distinct callers, a seeded pseudo-random sample is
/// explored; the traversal is reproducible for a given `seed` regardless of
/// scheduling.
pub fn find_call_chains(
    program: &Program,
    cg: &CallGraph,
    sigs: &BTreeSet<CallbackSignature>,
    max_len: usize,
    max_callers: usize,
    seed: u64,
) -> CallSiteSet {
    let mut set = CallSiteSet::default();
    for (mref, def) in program.methods() {
        if program.origin(&mref.class) != Some(Origin::Framework) {
            continue;
        }
        for stmt in &def.body {
            if let Some(sig) = match_call_site(program, sigs, &mref, stmt.id) {
                let site = StmtId { method: mref.clone(), idx: stmt.id };
                let chains = chains_to(program, cg, &site, max_len, max_callers, seed);
                set.sites.insert(site.clone(), sig);
                set.chains.insert(site, chains);
            }
        }
    }
    set
}

fn chains_to(
    program: &Program,
    cg: &CallGraph,
    site: &StmtId,
    max_len: usize,
    max_callers: usize,
    seed: u64,
) -> Vec<CallChain> {
    let mut out = Vec::new();
    // Backward suffixes under construction, ending at the site's method.
    let mut stack: Vec<(Vec<MethodRef>, Vec<StmtId>)> =
        vec![(vec![site.method.clone()], Vec::new())];
    while let Some((methods, hops)) = stack.pop() {
        let head = methods[0].clone();
        if program.method(&head).map(|m| m.is_api) == Some(true) {
            out.push(CallChain { methods, hops });
            continue;
        }
        if methods.len() >= max_len {
            continue; // adding a caller would exceed the bound
        }
        // Distinct caller methods of `head`, sampled when over the budget.
        let mut callers: Vec<MethodRef> = cg
            .callers_of(&head)
            .iter()
            .map(|e| e.site.method.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        callers.retain(|c| !methods.contains(c)); // keep chains acyclic
        if callers.len() > max_callers {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stable_hash(&format!("{site}|{head}")));
            callers.shuffle(&mut rng);
            callers.truncate(max_callers);
            callers.sort();
        }
        for caller in callers {
            for edge in cg.callers_of(&head) {
                if edge.site.method != caller {
                    continue;
                }
                let mut m2 = Vec::with_capacity(methods.len() + 1);
                m2.push(caller.clone());
                m2.extend(methods.iter().cloned());
                let mut h2 = Vec::with_capacity(hops.len() + 1);
                h2.push(edge.site.clone());
                h2.extend(hops.iter().cloned());
                stack.push((m2, h2));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Links every `h.sendMessage(..)` call site to the `handleMessage` of the
/// declared class of `h` (walking up the hierarchy), adding an implicit
/// async call edge. Receivers outside the builtin `Handler` hierarchy are
/// ignored; a handler class without a reachable `handleMessage` yields a
/// warning diagnostic and no edge.
pub fn link_async_handlers(program: &Program, cg: &mut CallGraph) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for (mref, def) in program.methods() {
        for stmt in &def.body {
            let StmtKind::VirtualCall { base, method, .. } = &stmt.kind else {
                continue;
            };
            if method != "sendMessage" {
                continue;
            }
            let Some(Type::Class(decl)) = def.local_type(&mref.class, base) else {
                continue;
            };
            if !program.is_subclass_of(&decl, "Handler") {
                continue;
            }
            let site = StmtId { method: mref.clone(), idx: stmt.id };
            match program.resolve_by_name(&decl, "handleMessage") {
                Some(handler) => cg.add_async_edge(site, handler),
                None => diags.push(Diagnostic::warning(
                    stmt.pos,
                    format!("no handleMessage found for sendMessage receiver class {decl}"),
                )),
            }
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::build_call_graph;
    use crate::ir::parse_program;

    #[test]
    fn final_class_and_private_methods_excluded() {
        let p = parse_program(
            "framework final class X { public void m() { return; } }\n\
             framework class Y { private void m() { return; } protected void n() { return; } }",
        )
        .unwrap();
        let sigs = callback_signatures(&p);
        assert!(!sigs.iter().any(|s| s.owner == "X"));
        assert!(!sigs.iter().any(|s| s.owner == "Y" && s.sig.name == "m"));
        assert!(sigs.iter().any(|s| s.owner == "Y" && s.sig.name == "n"));
    }

    #[test]
    fn interface_methods_are_signatures() {
        let p = parse_program("framework interface W { void onChanged(int v); }").unwrap();
        let sigs = callback_signatures(&p);
        assert_eq!(sigs.len(), 1);
        assert!(sigs.iter().next().unwrap().from_interface);
    }

    #[test]
    fn app_classes_contribute_no_signatures() {
        let p = parse_program("app class A { public void onTap() { return; } }").unwrap();
        assert!(callback_signatures(&p).is_empty());
    }

    #[test]
    fn static_and_final_methods_excluded() {
        let p = parse_program(
            "framework class F { public static void s() { return; } public final void f() { return; } }",
        )
        .unwrap();
        assert!(callback_signatures(&p).is_empty());
    }

    #[test]
    fn direct_chain_from_api() {
        let p = parse_program(
            "framework class W { public void onEvent() { return; } }\n\
             framework class C { api public void go(W w) { virtual w.onEvent(); return; } }",
        )
        .unwrap();
        let cg = build_call_graph(&p);
        let sigs = callback_signatures(&p);
        let set = find_call_chains(&p, &cg, &sigs, 16, 5, 0);
        assert_eq!(set.sites.len(), 1);
        let chains = set.chains.values().next().unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].methods.len(), 1);
        assert_eq!(chains[0].api().sig.name, "go");
    }

    #[test]
    fn chain_length_bound_enforced() {
        // api -> f1 -> ... -> f16 (contains the site): 17 methods, over the bound.
        let mut src = String::from("framework class W { public void onEvent() { return; } }\n");
        src.push_str("framework class C {\n api public void go() { virtual this.f1(); return; }\n");
        for i in 1..16 {
            src.push_str(&format!(
                " private void f{i}() {{ virtual this.f{}(); return; }}\n",
                i + 1
            ));
        }
        src.push_str(" private void f16() { W w; w = new W; virtual w.onEvent(); return; }\n}");
        let p = parse_program(&src).unwrap();
        let cg = build_call_graph(&p);
        let sigs = callback_signatures(&p);
        let set = find_call_chains(&p, &cg, &sigs, 16, 5, 0);
        let chains: Vec<_> = set.chains.values().flatten().collect();
        assert!(chains.is_empty(), "length-17 chain must be pruned: {chains:?}");
        let relaxed = find_call_chains(&p, &cg, &sigs, 17, 5, 0);
        assert_eq!(relaxed.chains.values().flatten().count(), 1);
    }

    #[test]
    fn caller_sampling_is_reproducible_and_bounded() {
        let mut src = String::from(
            "framework class W { public void onEvent() { return; } }\n\
             framework class H { public final void hot(W w) { virtual w.onEvent(); return; } }\n\
             framework class C {\n",
        );
        for i in 0..10 {
            src.push_str(&format!(
                " api public void go{i}(W w, H h) {{ virtual h.hot(w); return; }}\n"
            ));
        }
        src.push('}');
        let p = parse_program(&src).unwrap();
        let cg = build_call_graph(&p);
        let sigs = callback_signatures(&p);
        let bounded = find_call_chains(&p, &cg, &sigs, 16, 5, 42);
        let bounded2 = find_call_chains(&p, &cg, &sigs, 16, 5, 42);
        let all = find_call_chains(&p, &cg, &sigs, 16, usize::MAX, 7);
        let site = bounded.chains.keys().next().unwrap().clone();
        assert_eq!(bounded.chains[&site], bounded2.chains[&site], "same seed, same sample");
        assert_eq!(bounded.chains[&site].len(), 5);
        assert_eq!(all.chains[&site].len(), 10);
        for c in &bounded.chains[&site] {
            assert!(all.chains[&site].contains(c), "bounded run is a subset");
        }
    }

    #[test]
    fn async_link_uses_inherited_handler() {
        let p = parse_program(
            "framework class Base extends Handler { public void handleMessage(int m) { return; } }\n\
             framework class Sub extends Base { }\n\
             framework class C { api public void go(Sub h) { int m; m = 1; virtual h.sendMessage(m); return; } }",
        )
        .unwrap();
        let mut cg = build_call_graph(&p);
        let diags = link_async_handlers(&p, &mut cg);
        assert!(diags.is_empty());
        let asyncs: Vec<_> = cg.edges.iter().filter(|e| e.kind == CallKind::Async).collect();
        assert_eq!(asyncs.len(), 1);
        assert_eq!(asyncs[0].callee.class, "Base", "inherited definition");
    }

    #[test]
    fn handlerless_send_warns_and_no_handler_usage_is_identity() {
        let p = parse_program(
            "framework class NoHm extends Handler { }\n\
             framework class C { api public void go(NoHm h) { int m; m = 0; virtual h.sendMessage(m); return; } }",
        )
        .unwrap();
        let mut cg = build_call_graph(&p);
        let before = cg.edges.clone();
        let diags = link_async_handlers(&p, &mut cg);
        assert_eq!(diags.len(), 1);
        assert_eq!(cg.edges, before, "no edge added");

        let p2 = parse_program("framework class C { api public void go() { return; } }").unwrap();
        let mut cg2 = build_call_graph(&p2);
        let before2 = cg2.edges.clone();
        assert!(link_async_handlers(&p2, &mut cg2).is_empty());
        assert_eq!(cg2.edges, before2);
    }

    #[test]
    fn chain_through_async_edge() {
        let p = parse_program(
            "framework class W { public void onEvent() { return; } }\n\
             framework class Global { public static W target; }\n\
             framework class MyHandler extends Handler {\n\
               public void handleMessage(int m) { W w; w = static Global.target; virtual w.onEvent(); return; }\n\
             }\n\
             framework class C {\n\
               api public void go(MyHandler h) { int m; m = 1; virtual h.sendMessage(m); return; }\n\
             }",
        )
        .unwrap();
        let mut cg = build_call_graph(&p);
        link_async_handlers(&p, &mut cg);
        let sigs = callback_signatures(&p);
        let set = find_call_chains(&p, &cg, &sigs, 16, 5, 0);
        let chains: Vec<_> = set.chains.values().flatten().collect();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].methods.len(), 2);
        assert_eq!(chains[0].methods[0].sig.name, "go");
        assert_eq!(chains[0].methods[1].sig.name, "handleMessage");
        assert!(chains[0].is_async(&cg));
    }
}
