//! Per-method control flow graphs, postdominator-based control dependence
//! (*influence*), the CHA call graph, and per-API-method interprocedural
//! CFGs.

use crate::ir::{MethodDef, MethodRef, Program, StmtId, StmtKind, Type};
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// How a call edge resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CallKind {
    Virtual,
    Static,
    /// Implicit `sendMessage` -> `handleMessage` link.
    Async,
}

/// A node in a per-method CFG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CfgNode {
    Entry,
    Stmt(usize),
    Exit,
}

impl std::fmt::Display for CfgNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CfgNode::Entry => f.write_str("entry"),
            CfgNode::Stmt(i) => write!(f, "{i}"),
            CfgNode::Exit => f.write_str("exit"),
        }
    }
}

/// Control flow graph of one method. Statement order is preserved: node `i+1`
/// in index space is statement `i`. Branch out-edges are labeled
/// `true`/`false`; all other edges are unlabeled.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub method: MethodRef,
    pub stmt_count: usize,
    /// (from, to, branch label) in deterministic order.
    pub edges: Vec<(CfgNode, CfgNode, Option<bool>)>,
    /// Statements with no path from entry; kept for stable numbering.
    pub unreachable: BTreeSet<usize>,
    succs: Vec<Vec<(usize, Option<bool>)>>,
    preds: Vec<Vec<usize>>,
}

impl Cfg {
    /// Total node count including the synthetic entry and exit.
    pub fn node_count(&self) -> usize {
        self.stmt_count + 2
    }

    fn index(&self, n: CfgNode) -> usize {
        match n {
            CfgNode::Entry => 0,
            CfgNode::Stmt(i) => i + 1,
            CfgNode::Exit => self.stmt_count + 1,
        }
    }

    fn node(&self, idx: usize) -> CfgNode {
        if idx == 0 {
            CfgNode::Entry
        } else if idx == self.stmt_count + 1 {
            CfgNode::Exit
        } else {
            CfgNode::Stmt(idx - 1)
        }
    }

    pub fn succs(&self, n: CfgNode) -> Vec<(CfgNode, Option<bool>)> {
        self.succs[self.index(n)].iter().map(|&(i, l)| (self.node(i), l)).collect()
    }

    pub fn preds(&self, n: CfgNode) -> Vec<CfgNode> {
        self.preds[self.index(n)].iter().map(|&i| self.node(i)).collect()
    }

    /// Build a CFG from an explicit edge list; used by synthetic graphs in
    /// tests. Node indices: 0 = entry, 1..=stmts, stmts+1 = exit.
    pub fn from_edges(
        method: MethodRef,
        stmt_count: usize,
        edges: Vec<(CfgNode, CfgNode, Option<bool>)>,
    ) -> Cfg {
        let n = stmt_count + 2;
        let mut cfg = Cfg {
            method,
            stmt_count,
            edges,
            unreachable: BTreeSet::new(),
            succs: vec![Vec::new(); n],
            preds: vec![Vec::new(); n],
        };
        let edge_list = cfg.edges.clone();
        for &(from, to, label) in &edge_list {
            let (f, t) = (cfg.index(from), cfg.index(to));
            cfg.succs[f].push((t, label));
            cfg.preds[t].push(f);
        }
        cfg.mark_unreachable();
        cfg
    }

    fn mark_unreachable(&mut self) {
        let mut seen = vec![false; self.stmt_count + 2];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                continue;
            }
            seen[i] = true;
            for &(s, _) in &self.succs[i] {
                stack.push(s);
            }
        }
        self.unreachable = (0..self.stmt_count).filter(|&i| !seen[i + 1]).collect();
    }

    /// Branch statements: nodes with labeled out-edges.
    pub fn branches(&self) -> Vec<usize> {
        (0..self.stmt_count)
            .filter(|&i| self.succs[i + 1].iter().any(|&(_, l)| l.is_some()))
            .collect()
    }
}

/// Builds the CFG of a method body. Branch targets come from labels; a
/// missing trailing `return` falls through to the exit.
pub fn build_cfg(method: &MethodRef, def: &MethodDef) -> Cfg {
    let n = def.body.len();
    let label_at = |name: &str| -> Option<usize> {
        def.body.iter().find(|s| s.labels.iter().any(|l| l == name)).map(|s| s.id)
    };
    let mut edges: Vec<(CfgNode, CfgNode, Option<bool>)> = Vec::new();
    if n == 0 {
        edges.push((CfgNode::Entry, CfgNode::Exit, None));
    } else {
        edges.push((CfgNode::Entry, CfgNode::Stmt(0), None));
    }
    for s in &def.body {
        let fall = if s.id + 1 < n { CfgNode::Stmt(s.id + 1) } else { CfgNode::Exit };
        match &s.kind {
            StmtKind::IfGoto { target, .. } => {
                let t = label_at(target).map(CfgNode::Stmt).unwrap_or(CfgNode::Exit);
                edges.push((CfgNode::Stmt(s.id), t, Some(true)));
                edges.push((CfgNode::Stmt(s.id), fall, Some(false)));
            }
            StmtKind::Goto { target } => {
                let t = label_at(target).map(CfgNode::Stmt).unwrap_or(CfgNode::Exit);
                edges.push((CfgNode::Stmt(s.id), t, None));
            }
            StmtKind::Return { .. } => {
                edges.push((CfgNode::Stmt(s.id), CfgNode::Exit, None));
            }
            _ => {
                edges.push((CfgNode::Stmt(s.id), fall, None));
            }
        }
    }
    Cfg::from_edges(method.clone(), n, edges)
}

/// Immediate postdominators, indexed like `Cfg` nodes. `None` for nodes that
/// cannot reach the exit and for the exit itself.
pub fn postdominators(cfg: &Cfg) -> Vec<Option<usize>> {
    let n = cfg.stmt_count + 2;
    let exit = n - 1;
    // Post-order of the reverse graph, rooted at exit.
    let mut order = Vec::new();
    let mut state = vec![0u8; n]; // 0 unseen, 1 on stack, 2 done
    let mut stack = vec![(exit, 0usize)];
    while let Some(&mut (v, ref mut ei)) = stack.last_mut() {
        if state[v] == 0 {
            state[v] = 1;
        }
        if *ei < cfg.preds[v].len() {
            let next = cfg.preds[v][*ei];
            *ei += 1;
            if state[next] == 0 {
                stack.push((next, 0));
            }
        } else {
            state[v] = 2;
            order.push(v);
            stack.pop();
        }
    }
    order.reverse(); // now reverse post-order from exit

    let mut rpo_num = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        rpo_num[v] = i;
    }
    let mut ipdom: Vec<Option<usize>> = vec![None; n];
    ipdom[exit] = Some(exit);
    fn intersect(ipdom: &[Option<usize>], rpo: &[usize], mut a: usize, mut b: usize) -> usize {
        while a != b {
            while rpo[a] > rpo[b] {
                a = ipdom[a].expect("processed node");
            }
            while rpo[b] > rpo[a] {
                b = ipdom[b].expect("processed node");
            }
        }
        a
    }
    let mut changed = true;
    while changed {
        changed = false;
        for &v in order.iter().skip(1) {
            // Successors in the original graph are the predecessors of the
            // postdominance problem.
            let mut new = None;
            for &(s, _) in &cfg.succs[v] {
                if ipdom[s].is_some() {
                    new = Some(match new {
                        None => s,
                        Some(cur) => intersect(&ipdom, &rpo_num, s, cur),
                    });
                }
            }
            if let Some(nv) = new {
                if ipdom[v] != Some(nv) {
                    ipdom[v] = Some(nv);
                    changed = true;
                }
            }
        }
    }
    ipdom[exit] = None;
    ipdom
}

/// Statements directly control dependent on branch node `b` (by node index).
fn control_dependents(cfg: &Cfg, ipdom: &[Option<usize>], b: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let stop = ipdom[b];
    for &(succ, _) in &cfg.succs[b] {
        let mut cur = Some(succ);
        while let Some(y) = cur {
            if Some(y) == stop {
                break;
            }
            out.insert(y);
            if y == b {
                break; // loop back to the branch itself
            }
            cur = ipdom[y];
        }
    }
    out.remove(&b);
    out
}

/// All statements transitively control dependent on `branch`
/// (a statement id of an `if-goto`). This is the influence set used to
/// identify predicate nodes.
pub fn influence(cfg: &Cfg, branch: usize) -> Result<BTreeSet<usize>> {
    let idx = branch + 1;
    if branch >= cfg.stmt_count || !cfg.succs[idx].iter().any(|&(_, l)| l.is_some()) {
        return Err(Error::Precondition(format!(
            "influence: statement {branch} of {} is not a conditional branch",
            cfg.method
        )));
    }
    let ipdom = postdominators(cfg);
    let mut result: BTreeSet<usize> = BTreeSet::new();
    let mut work = vec![idx];
    let mut seen_branches = BTreeSet::new();
    while let Some(b) = work.pop() {
        if !seen_branches.insert(b) {
            continue;
        }
        for d in control_dependents(cfg, &ipdom, b) {
            result.insert(d);
            if cfg.succs[d].iter().any(|&(_, l)| l.is_some()) {
                work.push(d);
            }
        }
    }
    // Report statement ids, not internal node indices.
    Ok(result
        .into_iter()
        .filter(|&i| i >= 1 && i <= cfg.stmt_count)
        .map(|i| i - 1)
        .collect())
}

/// One call-graph edge: a call site resolving to a callee.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CgEdge {
    pub site: StmtId,
    pub callee: MethodRef,
    pub kind: CallKind,
}

/// Class-hierarchy-analysis call graph. Virtual calls resolve to every
/// override in the subtype cone of the declared receiver type plus the
/// inherited definition.
#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    pub edges: Vec<CgEdge>,
    pub policy: &'static str,
}

impl CallGraph {
    pub fn callees_of_site(&self, site: &StmtId) -> Vec<&CgEdge> {
        self.edges.iter().filter(|e| &e.site == site).collect()
    }

    /// Edges whose callee is `method`, i.e. its callers.
    pub fn callers_of(&self, method: &MethodRef) -> Vec<&CgEdge> {
        self.edges.iter().filter(|e| &e.callee == method).collect()
    }

    pub fn add_async_edge(&mut self, site: StmtId, callee: MethodRef) {
        self.edges.push(CgEdge { site, callee, kind: CallKind::Async });
        self.edges.sort();
        self.edges.dedup();
    }
}

/// Builds the CHA call graph over every method body in the program.
/// Call sites resolve by method name and arity; opaque builtin receivers
/// contribute no edges.
pub fn build_call_graph(program: &Program) -> CallGraph {
    let mut edges = Vec::new();
    for (mref, def) in program.methods() {
        for stmt in &def.body {
            let site = StmtId { method: mref.clone(), idx: stmt.id };
            match &stmt.kind {
                StmtKind::VirtualCall { base, method, args, .. } => {
                    let Some(Type::Class(decl)) = def.local_type(&mref.class, base) else {
                        continue;
                    };
                    let mut targets = BTreeSet::new();
                    for sub in program.cone(&decl) {
                        if let Some(t) = program.resolve_call(&sub, method, args.len()) {
                            targets.insert(t);
                        }
                    }
                    for callee in targets {
                        edges.push(CgEdge { site: site.clone(), callee, kind: CallKind::Virtual });
                    }
                }
                StmtKind::StaticCall { class, method, args, .. } => {
                    if let Some(callee) = program.resolve_call(class, method, args.len()) {
                        edges.push(CgEdge { site, callee, kind: CallKind::Static });
                    }
                }
                _ => {}
            }
        }
    }
    edges.sort();
    edges.dedup();
    CallGraph { edges, policy: "cha" }
}

/// A node of an interprocedural CFG: a CFG node within a materialized method.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IcfgNode {
    pub method: MethodRef,
    pub node: CfgNode,
}

impl std::fmt::Display for IcfgNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.method, self.node)
    }
}

/// Interprocedural CFG of one API method. Each reachable method body is
/// materialized at most once; call/return edge pairs are matched by
/// construction. Async (`sendMessage` -> `handleMessage`) edges splice the
/// handler body in like a call.
#[derive(Debug, Clone)]
pub struct Icfg {
    pub root: MethodRef,
    pub cfgs: BTreeMap<MethodRef, Cfg>,
    /// Call sites with at least one materialized callee.
    pub calls: BTreeMap<StmtId, Vec<(MethodRef, CallKind)>>,
}

impl Icfg {
    pub fn entry(&self) -> IcfgNode {
        IcfgNode { method: self.root.clone(), node: CfgNode::Entry }
    }

    pub fn exit(&self) -> IcfgNode {
        IcfgNode { method: self.root.clone(), node: CfgNode::Exit }
    }

    /// Total node count over all materialized methods, including the
    /// synthetic entry/exit of each.
    pub fn node_count(&self) -> usize {
        self.cfgs.values().map(|c| c.node_count()).sum()
    }

    /// Number of interprocedural edges (each call contributes a call edge and
    /// a matched return edge).
    pub fn interprocedural_edge_count(&self) -> usize {
        self.calls.values().map(|v| v.len()).sum::<usize>() * 2
    }

    /// Whether `site` dispatches through an async edge (its callees were
    /// linked from a `sendMessage`).
    pub fn is_async_call(&self, site: &StmtId) -> bool {
        self.calls
            .get(site)
            .map(|v| v.iter().any(|(_, k)| *k == CallKind::Async))
            .unwrap_or(false)
    }

    /// Successors with branch labels; interprocedural edges are unlabeled.
    pub fn succs(&self, n: &IcfgNode) -> Vec<(IcfgNode, Option<bool>)> {
        let cfg = &self.cfgs[&n.method];
        match n.node {
            CfgNode::Exit => {
                if n.method == self.root {
                    return Vec::new();
                }
                // Matched return edges: back to the statement after each
                // call site that targets this method.
                let mut out = Vec::new();
                for (site, callees) in &self.calls {
                    if callees.iter().any(|(m, _)| m == &n.method) {
                        let caller_cfg = &self.cfgs[&site.method];
                        for (ret, _) in caller_cfg.succs(CfgNode::Stmt(site.idx)) {
                            out.push((IcfgNode { method: site.method.clone(), node: ret }, None));
                        }
                    }
                }
                out.sort();
                out.dedup();
                out
            }
            node => {
                if let CfgNode::Stmt(idx) = node {
                    let site = StmtId { method: n.method.clone(), idx };
                    if let Some(callees) = self.calls.get(&site) {
                        return callees
                            .iter()
                            .map(|(m, _)| {
                                (IcfgNode { method: m.clone(), node: CfgNode::Entry }, None)
                            })
                            .collect();
                    }
                }
                cfg.succs(node)
                    .into_iter()
                    .map(|(s, l)| (IcfgNode { method: n.method.clone(), node: s }, l))
                    .collect()
            }
        }
    }

    /// All nodes, in deterministic order.
    pub fn nodes(&self) -> Vec<IcfgNode> {
        let mut out = Vec::new();
        for (m, cfg) in &self.cfgs {
            out.push(IcfgNode { method: m.clone(), node: CfgNode::Entry });
            for i in 0..cfg.stmt_count {
                out.push(IcfgNode { method: m.clone(), node: CfgNode::Stmt(i) });
            }
            out.push(IcfgNode { method: m.clone(), node: CfgNode::Exit });
        }
        out
    }
}

/// Builds the ICFG for `api`, inlining methods reachable through the call
/// graph up to `max_depth` methods deep (the call-chain bound). Each body is
/// materialized once; recursion therefore shows up as cycles, not copies.
pub fn build_icfg(
    program: &Program,
    api: &MethodRef,
    cg: &CallGraph,
    max_depth: usize,
) -> Result<Icfg> {
    let def =
        program.method(api).ok_or_else(|| Error::Precondition(format!("unknown method {api}")))?;
    if !def.is_api {
        return Err(Error::Precondition(format!("{api} is not flagged api")));
    }

    let mut cfgs = BTreeMap::new();
    let mut calls: BTreeMap<StmtId, Vec<(MethodRef, CallKind)>> = BTreeMap::new();
    let mut depth: BTreeMap<MethodRef, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    depth.insert(api.clone(), 1);
    queue.push_back(api.clone());
    while let Some(mref) = queue.pop_front() {
        let d = depth[&mref];
        let mdef = program.method(&mref).expect("materialized methods have bodies");
        cfgs.insert(mref.clone(), build_cfg(&mref, mdef));
        for stmt in &mdef.body {
            if !stmt.is_call() {
                continue;
            }
            let site = StmtId { method: mref.clone(), idx: stmt.id };
            for edge in cg.callees_of_site(&site) {
                if program.method(&edge.callee).is_none() {
                    continue; // opaque builtins and interface-only signatures
                }
                if d + 1 > max_depth {
                    continue;
                }
                if !depth.contains_key(&edge.callee) {
                    depth.insert(edge.callee.clone(), d + 1);
                    queue.push_back(edge.callee.clone());
                }
                let entry = calls.entry(site.clone()).or_default();
                if !entry.iter().any(|(m, _)| m == &edge.callee) {
                    entry.push((edge.callee.clone(), edge.kind));
                }
            }
        }
    }
    // Drop call records whose callee was never materialized (depth pruning).
    for callees in calls.values_mut() {
        callees.retain(|(m, _)| cfgs.contains_key(m));
        callees.sort_by(|a, b| a.0.cmp(&b.0));
    }
    calls.retain(|_, v| !v.is_empty());
    Ok(Icfg { root: api.clone(), cfgs, calls })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    fn method_of(p: &Program, class: &str, name: &str) -> (MethodRef, Cfg) {
        let c = p.class(class).unwrap();
        let m = c.methods.iter().find(|m| m.name == name).unwrap();
        let mref = MethodRef::new(class, m.sig());
        let cfg = build_cfg(&mref, m);
        (mref, cfg)
    }

    #[test]
    fn straight_line_cfg() {
        let p =
            parse_program("app class A { public void m() { int a; a = 1; a = 2; a = 3; } }")
                .unwrap();
        let (_, cfg) = method_of(&p, "A", "m");
        assert_eq!(cfg.node_count(), 5);
        // entry -> s0 -> s1 -> s2 -> exit, the last edge synthesized.
        assert_eq!(cfg.succs(CfgNode::Stmt(2)), vec![(CfgNode::Exit, None)]);
        assert!(cfg.unreachable.is_empty());
    }

    #[test]
    fn diamond_influence() {
        let p = parse_program(
            "app class A { public void m(int x) { int y;\n\
             if x < 1 goto Lelse;\n y = 1;\n goto Lend;\n Lelse:\n y = 2;\n Lend:\n return; } }",
        )
        .unwrap();
        let (_, cfg) = method_of(&p, "A", "m");
        // s0 branch, s1/s2 then-side, s3 else-side, s4 join.
        let inf = influence(&cfg, 0).unwrap();
        assert_eq!(inf, BTreeSet::from([1, 2, 3]));
        assert!(!inf.contains(&4), "join postdominates the branch");
    }

    #[test]
    fn nested_influence_is_transitive() {
        let p = parse_program(
            "app class A { public void m(int x) { int y;\n\
             if x < 1 goto Lend;\n if x < 2 goto Lend;\n y = 1;\n Lend:\n return; } }",
        )
        .unwrap();
        let (_, cfg) = method_of(&p, "A", "m");
        let inf = influence(&cfg, 0).unwrap();
        assert!(inf.contains(&1) && inf.contains(&2), "{inf:?}");
    }

    #[test]
    fn influence_requires_branch() {
        let p = parse_program("app class A { public void m() { int a; a = 1; } }").unwrap();
        let (_, cfg) = method_of(&p, "A", "m");
        assert!(influence(&cfg, 0).is_err());
    }

    #[test]
    fn cha_virtual_and_static_edges() {
        let p = parse_program(
            "framework class Service { public void onCreate() { return; } }\n\
             app class MyService extends Service { public void onCreate() { return; } }\n\
             framework class Util { public static void log() { return; } }\n\
             app class Caller { public void go(Service s) { virtual s.onCreate(); static Util.log(); } }",
        )
        .unwrap();
        let cg = build_call_graph(&p);
        let virtuals: Vec<_> = cg.edges.iter().filter(|e| e.kind == CallKind::Virtual).collect();
        assert_eq!(virtuals.len(), 2, "Service.onCreate and MyService.onCreate");
        let statics: Vec<_> = cg.edges.iter().filter(|e| e.kind == CallKind::Static).collect();
        assert_eq!(statics.len(), 1);
    }

    #[test]
    fn icfg_of_call_free_api_is_its_cfg() {
        let p =
            parse_program("framework class C { api public void go() { int a; a = 1; return; } }")
                .unwrap();
        let cg = build_call_graph(&p);
        let api = p.api_methods()[0].clone();
        let icfg = build_icfg(&p, &api, &cg, 16).unwrap();
        assert_eq!(icfg.node_count(), 4);
        assert_eq!(icfg.interprocedural_edge_count(), 0);
    }

    #[test]
    fn icfg_inlines_helper_with_matched_edges() {
        let p = parse_program(
            "framework class C {\n\
             api public void outer() { virtual this.helper(); return; }\n\
             private void helper() { int a; a = 1; return; }\n}",
        )
        .unwrap();
        let cg = build_call_graph(&p);
        let api = p.api_methods()[0].clone();
        let icfg = build_icfg(&p, &api, &cg, 16).unwrap();
        assert_eq!(icfg.cfgs.len(), 2);
        assert_eq!(icfg.interprocedural_edge_count(), 2);
        // The call site's successor is the helper entry; the helper exit
        // returns to the statement after the call.
        let call = IcfgNode { method: api.clone(), node: CfgNode::Stmt(0) };
        let succ = icfg.succs(&call);
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].0.node, CfgNode::Entry);
        let helper = succ[0].0.method.clone();
        let back = icfg.succs(&IcfgNode { method: helper, node: CfgNode::Exit });
        assert_eq!(back, vec![(IcfgNode { method: api, node: CfgNode::Stmt(1) }, None)]);
    }

    #[test]
    fn depth_bound_prunes_materialization() {
        let p = parse_program(
            "framework class C {\n\
             api public void a() { virtual this.b(); return; }\n\
             private void b() { virtual this.c(); return; }\n\
             private void c() { return; }\n}",
        )
        .unwrap();
        let cg = build_call_graph(&p);
        let api = p.api_methods()[0].clone();
        let icfg = build_icfg(&p, &api, &cg, 2).unwrap();
        assert_eq!(icfg.cfgs.len(), 2, "c is beyond the bound");
    }
}
