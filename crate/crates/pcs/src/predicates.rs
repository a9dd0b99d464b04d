//! Predicate node identification and abstraction.
//!
//! A branch is a predicate node for a program point `p` when `p` is
//! transitively control dependent on it. The branch condition is then
//! rewritten into an expression over *abstract variables* - app-visible
//! (scope, class type, access path) triples - by symbolic back-substitution
//! along all backward paths to the API method entry, with loops unrolled
//! once. Path results merge into a disjunction; operands that cannot be
//! resolved flag the expression `unresolved`.

use crate::callbacks::CallChain;
use crate::graphs::{influence, Cfg, CfgNode, Icfg};
use crate::ir::{ArithOp, Constant, MethodRef, Operand, Program, RelOp, StmtId, StmtKind};
use crate::receivers::{PathToken, ACCESS_PATH_BOUND};
use crate::Result;
use std::collections::{BTreeSet, VecDeque};

/// Disjunction-size cap; beyond it the expression is flagged unresolved.
pub const MAX_TERMS: usize = 64;

/// Scope of an abstract variable: app-visible roots only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarScope {
    Static(String),
    CallingObject,
    Param(usize),
}

impl std::fmt::Display for VarScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarScope::Static(_) => f.write_str("static"),
            VarScope::CallingObject => f.write_str("calling-object"),
            VarScope::Param(i) => write!(f, "param({i})"),
        }
    }
}

/// An app-visible value descriptor: where it is anchored, the class type of
/// the anchor, and how to reach it (field and call tokens).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbstractVariable {
    pub scope: VarScope,
    pub class_type: String,
    pub path: Vec<PathToken>,
}

impl std::fmt::Display for AbstractVariable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let path = crate::receivers::tokens_to_string(&self.path);
        write!(f, "({}, {}, {})", self.scope, self.class_type, path)
    }
}

/// One side of a term: a constant, an abstract variable, or an arithmetic
/// expression over them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymOperand {
    Const(Constant),
    Var(AbstractVariable),
    Arith { op: ArithOp, lhs: Box<SymOperand>, rhs: Box<SymOperand> },
}

impl std::fmt::Display for SymOperand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SymOperand::Const(c) => write!(f, "{c}"),
            SymOperand::Var(v) => write!(f, "{v}"),
            SymOperand::Arith { op, lhs, rhs } => write!(f, "({lhs} {op} {rhs})"),
        }
    }
}

impl SymOperand {
    pub fn variables(&self, out: &mut BTreeSet<AbstractVariable>) {
        match self {
            SymOperand::Const(_) => {}
            SymOperand::Var(v) => {
                out.insert(v.clone());
            }
            SymOperand::Arith { lhs, rhs, .. } => {
                lhs.variables(out);
                rhs.variables(out);
            }
        }
    }
}

/// A relational term `a op b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub lhs: SymOperand,
    pub op: RelOp,
    pub rhs: SymOperand,
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op, self.rhs)
    }
}

/// Disjunction of terms, one per backward path (deduplicated, canonically
/// ordered). `unresolved` marks expressions where some path could not be
/// rewritten into app-visible form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AbstractExpr {
    pub terms: Vec<Term>,
    pub unresolved: bool,
}

impl std::fmt::Display for AbstractExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            f.write_str("<unresolved>")?;
        } else {
            let parts: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
            f.write_str(&parts.join(" \\/ "))?;
        }
        if self.unresolved && !self.terms.is_empty() {
            f.write_str(" (unresolved)")?;
        }
        Ok(())
    }
}

impl AbstractExpr {
    pub fn variables(&self) -> BTreeSet<AbstractVariable> {
        let mut out = BTreeSet::new();
        for t in &self.terms {
            t.lhs.variables(&mut out);
            t.rhs.variables(&mut out);
        }
        out
    }
}

/// A predicate node: a branch statement plus its abstracted condition.
/// Outcome labels live on the summary graph's out-edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateNode {
    pub branch: StmtId,
    pub expr: AbstractExpr,
}

/// Branches of `cfg` that `p` (a statement id) is transitively control
/// dependent on.
pub fn identify_predicate_nodes(cfg: &Cfg, p: usize) -> Result<BTreeSet<usize>> {
    if p >= cfg.stmt_count {
        return Err(crate::Error::Precondition(format!(
            "statement {p} not in CFG of {}",
            cfg.method
        )));
    }
    let mut out = BTreeSet::new();
    for b in cfg.branches() {
        if influence(cfg, b)?.contains(&p) {
            out.insert(b);
        }
    }
    Ok(out)
}

/// All predicate branches guarding `site` along `chain`: for each chain
/// method, the branches that the next hop (or the callback site itself) is
/// control dependent on. Returns each branch with the chain prefix needed to
/// rebase its condition to the API method.
pub fn predicate_branches_for_chain(
    icfg: &Icfg,
    chain: &CallChain,
    site: &StmtId,
) -> Result<Vec<(StmtId, CallChain)>> {
    let mut out = Vec::new();
    for (i, method) in chain.methods.iter().enumerate() {
        let point = if i + 1 < chain.methods.len() { &chain.hops[i] } else { site };
        let Some(cfg) = icfg.cfgs.get(method) else { continue };
        for b in identify_predicate_nodes(cfg, point.idx)? {
            let prefix = CallChain {
                methods: chain.methods[..=i].to_vec(),
                hops: chain.hops[..i].to_vec(),
            };
            out.push((StmtId { method: method.clone(), idx: b }, prefix));
        }
    }
    Ok(out)
}

// In-flight symbolic operand during back-substitution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Sym {
    Const(Constant),
    Path { base: SymBase, tokens: Vec<PathToken> },
    Arith { op: ArithOp, lhs: Box<Sym>, rhs: Box<Sym> },
    Dead,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SymBase {
    Local(String),
    Rooted(VarScope, String),
}

impl Sym {
    fn from_operand(op: &Operand) -> Sym {
        match op {
            Operand::Local(x) => Sym::Path { base: SymBase::Local(x.clone()), tokens: Vec::new() },
            Operand::Const(c) => Sym::Const(c.clone()),
        }
    }

    fn has_local(&self) -> bool {
        match self {
            Sym::Path { base: SymBase::Local(_), .. } => true,
            Sym::Arith { lhs, rhs, .. } => lhs.has_local() || rhs.has_local(),
            _ => false,
        }
    }

    fn has_dead(&self) -> bool {
        match self {
            Sym::Dead => true,
            Sym::Arith { lhs, rhs, .. } => lhs.has_dead() || rhs.has_dead(),
            _ => false,
        }
    }

    fn to_operand(&self) -> Option<SymOperand> {
        match self {
            Sym::Const(c) => Some(SymOperand::Const(c.clone())),
            Sym::Path { base: SymBase::Rooted(scope, ct), tokens } => Some(SymOperand::Var(
                AbstractVariable { scope: scope.clone(), class_type: ct.clone(), path: tokens.clone() },
            )),
            Sym::Arith { op, lhs, rhs } => Some(SymOperand::Arith {
                op: *op,
                lhs: Box::new(lhs.to_operand()?),
                rhs: Box::new(rhs.to_operand()?),
            }),
            _ => None,
        }
    }

    /// Rewrites through one statement, backwards. Heap stores are not,
    /// applied: intervening writes surface as update nodes instead.
    fn subst(&self, stmt: &StmtKind) -> Sym {
        match self {
            Sym::Arith { op, lhs, rhs } => Sym::Arith {
                op: *op,
                lhs: Box::new(lhs.subst(stmt)),
                rhs: Box::new(rhs.subst(stmt)),
            },
            Sym::Path { base: SymBase::Local(name), tokens } => {
                let mine = |dst: &str| dst == name;
                match stmt {
                    StmtKind::AssignLocal { dst, src } if mine(dst) => match src {
                        Operand::Local(y) => {
                            Sym::Path { base: SymBase::Local(y.clone()), tokens: tokens.clone() }
                        }
                        Operand::Const(c) if tokens.is_empty() => Sym::Const(c.clone()),
                        Operand::Const(_) => Sym::Dead,
                    },
                    StmtKind::BinaryOp { dst, op, lhs, rhs } if mine(dst) => {
                        if !tokens.is_empty() {
                            return Sym::Dead;
                        }
                        match op {
                            ArithOp::Add | ArithOp::Sub => Sym::Arith {
                                op: *op,
                                lhs: Box::new(Sym::from_operand(lhs)),
                                rhs: Box::new(Sym::from_operand(rhs)),
                            },
                            // Other binary operators abstract to unresolved.
                            ArithOp::Mul | ArithOp::Div => Sym::Dead,
                        }
                    }
                    StmtKind::FieldLoad { dst, base, field } if mine(dst) => {
                        self.prepend(PathToken::Field(field.clone()), SymBase::Local(base.clone()))
                    }
                    StmtKind::StaticLoad { dst, class, field } if mine(dst) => self.prepend(
                        PathToken::Field(field.clone()),
                        SymBase::Rooted(VarScope::Static(class.clone()), class.clone()),
                    ),
                    StmtKind::New { dst, .. } if mine(dst) => Sym::Dead,
                    StmtKind::VirtualCall { dst: Some(d), base, method, .. } if mine(d) => {
                        self.prepend(PathToken::Call(method.clone()), SymBase::Local(base.clone()))
                    }
                    StmtKind::StaticCall { dst: Some(d), class, method, .. } if mine(d) => self
                        .prepend(
                            PathToken::Call(method.clone()),
                            SymBase::Rooted(VarScope::Static(class.clone()), class.clone()),
                        ),
                    _ => self.clone(),
                }
            }
            _ => self.clone(),
        }
    }

    fn prepend(&self, tok: PathToken, new_base: SymBase) -> Sym {
        let Sym::Path { tokens, .. } = self else { return Sym::Dead };
        if tokens.len() + 1 > ACCESS_PATH_BOUND {
            return Sym::Dead;
        }
        let mut t = Vec::with_capacity(tokens.len() + 1);
        t.push(tok);
        t.extend(tokens.iter().cloned());
        Sym::Path { base: new_base, tokens: t }
    }

    /// Rebinds locals at a chain hop: parameters to actual arguments, `this`
    /// to the call receiver. Anything else local dies.
    fn rebase(&self, params: &[(String, usize)], args: &[Operand], receiver: Option<&str>) -> Sym {
        match self {
            Sym::Arith { op, lhs, rhs } => Sym::Arith {
                op: *op,
                lhs: Box::new(lhs.rebase(params, args, receiver)),
                rhs: Box::new(rhs.rebase(params, args, receiver)),
            },
            Sym::Path { base: SymBase::Local(name), tokens } => {
                if name == "this" {
                    return match receiver {
                        Some(r) => {
                            Sym::Path { base: SymBase::Local(r.to_string()), tokens: tokens.clone() }
                        }
                        None => Sym::Dead,
                    };
                }
                match params.iter().find(|(n, _)| n == name) {
                    Some((_, i)) => match args.get(*i) {
                        Some(Operand::Local(y)) => {
                            Sym::Path { base: SymBase::Local(y.clone()), tokens: tokens.clone() }
                        }
                        Some(Operand::Const(c)) if tokens.is_empty() => Sym::Const(c.clone()),
                        _ => Sym::Dead,
                    },
                    None => Sym::Dead,
                }
            }
            _ => self.clone(),
        }
    }

    /// Roots remaining locals against the API method `m0` itself.
    fn root_at_api(&self, program: &Program, api: &MethodRef) -> Sym {
        match self {
            Sym::Arith { op, lhs, rhs } => Sym::Arith {
                op: *op,
                lhs: Box::new(lhs.root_at_api(program, api)),
                rhs: Box::new(rhs.root_at_api(program, api)),
            },
            Sym::Path { base: SymBase::Local(name), tokens } => {
                let def = program.method(api).expect("api has a body");
                if name == "this" && !def.is_static {
                    return Sym::Path {
                        base: SymBase::Rooted(VarScope::CallingObject, api.class.clone()),
                        tokens: tokens.clone(),
                    };
                }
                match def.param_index(name) {
                    Some(i) => Sym::Path {
                        base: SymBase::Rooted(
                            VarScope::Param(i),
                            def.params[i].ty.to_string(),
                        ),
                        tokens: tokens.clone(),
                    },
                    None => Sym::Dead,
                }
            }
            _ => self.clone(),
        }
    }
}

/// Symbolic back-substitution of the branch condition along `prefix`
/// (the chain from the API method to the branch's method). Returns the
/// disjunction of per-path results rebased to the API method's interface.
pub fn back_substitute(
    program: &Program,
    icfg: &Icfg,
    branch: &StmtId,
    prefix: &CallChain,
) -> Result<AbstractExpr> {
    let def = program
        .method(&branch.method)
        .ok_or_else(|| crate::Error::Precondition(format!("unknown method {}", branch.method)))?;
    let StmtKind::IfGoto { lhs, op, rhs, .. } = &def.body[branch.idx].kind else {
        return Err(crate::Error::Precondition(format!("{branch} is not a conditional branch")));
    };

    let mut expr = AbstractExpr::default();
    let mut terms: BTreeSet<Term> = BTreeSet::new();
    let start = (Sym::from_operand(lhs), *op, Sym::from_operand(rhs));
    let last = prefix.methods.len() - 1;

    let mut queue: VecDeque<(usize, CfgNode, (Sym, RelOp, Sym))> = VecDeque::new();
    let mut seen: BTreeSet<(usize, CfgNode, (Sym, RelOp, Sym))> = BTreeSet::new();
    queue.push_back((last, CfgNode::Stmt(branch.idx), start));

    while let Some((k, node, term)) = queue.pop_front() {
        if terms.len() >= MAX_TERMS {
            expr.unresolved = true;
            break;
        }
        if !seen.insert((k, node, term.clone())) {
            continue;
        }
        let (l, op, r) = &term;
        if l.has_dead() || r.has_dead() {
            expr.unresolved = true;
            continue;
        }
        if !l.has_local() && !r.has_local() {
            // Fully resolved to abstract variables and constants.
            if let (Some(lo), Some(ro)) = (l.to_operand(), r.to_operand()) {
                terms.insert(Term { lhs: lo, op: *op, rhs: ro });
            }
            continue;
        }
        let method = &prefix.methods[k];
        if node == CfgNode::Entry {
            if k == 0 {
                let l2 = l.root_at_api(program, method);
                let r2 = r.root_at_api(program, method);
                if l2.has_dead() || r2.has_dead() {
                    expr.unresolved = true;
                } else if let (Some(lo), Some(ro)) = (l2.to_operand(), r2.to_operand()) {
                    terms.insert(Term { lhs: lo, op: *op, rhs: ro });
                }
            } else {
                // Hop into the caller at the recorded call site.
                let hop = &prefix.hops[k - 1];
                let callee_def = program.method(method).expect("chain methods have bodies");
                let params: Vec<(String, usize)> = callee_def
                    .params
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (p.name.clone(), i))
                    .collect();
                let hop_def = program.method(&hop.method).expect("chain methods have bodies");
                let (args, receiver) = match &hop_def.body[hop.idx].kind {
                    StmtKind::VirtualCall { base, args, .. } => (args.clone(), Some(base.clone())),
                    StmtKind::StaticCall { args, .. } => (args.clone(), None),
                    _ => (Vec::new(), None),
                };
                let l2 = l.rebase(&params, &args, receiver.as_deref());
                let r2 = r.rebase(&params, &args, receiver.as_deref());
                queue.push_back((k - 1, CfgNode::Stmt(hop.idx), (l2, *op, r2)));
            }
            continue;
        }
        let Some(cfg) = icfg.cfgs.get(method) else { continue };
        for pred in cfg.preds(node) {
            match pred {
                CfgNode::Stmt(i) => {
                    let stmt = &program.method(method).expect("has body").body[i];
                    let term2 = (l.subst(&stmt.kind), *op, r.subst(&stmt.kind));
                    queue.push_back((k, pred, term2));
                }
                CfgNode::Entry => queue.push_back((k, CfgNode::Entry, term.clone())),
                CfgNode::Exit => {}
            }
        }
    }

    expr.terms = terms.into_iter().collect();
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_call_graph, build_cfg, build_icfg};
    use crate::ir::parse_program;

    fn api_icfg(src: &str) -> (Program, Icfg) {
        let p = parse_program(src).unwrap();
        let cg = build_call_graph(&p);
        let api = p.api_methods()[0].clone();
        let icfg = build_icfg(&p, &api, &cg, 16).unwrap();
        (p, icfg)
    }

    use crate::ir::Program;

    fn svar(class: &str, path: &[&str]) -> SymOperand {
        SymOperand::Var(AbstractVariable {
            scope: VarScope::Static(class.to_string()),
            class_type: class.to_string(),
            path: path.iter().map(|f| PathToken::Field((*f).to_string())).collect(),
        })
    }

    #[test]
    fn callback_at_entry_has_no_predicates() {
        let (p, icfg) = api_icfg(
            "framework class W { public void onEvent() { return; } }\n\
             framework class C { api public void go(W w) { virtual w.onEvent(); return; } }",
        );
        let api = p.api_methods()[0].clone();
        let cfg = &icfg.cfgs[&api];
        assert!(identify_predicate_nodes(cfg, 0).unwrap().is_empty());
    }

    #[test]
    fn static_branch_is_single_term() {
        let (p, icfg) = api_icfg(
            "framework class Global { public static bool started; }\n\
             framework class W { public void onEvent() { return; } }\n\
             framework class C {\n\
               api public void go(W w) { bool st;\n\
                 st = static Global.started;\n\
                 if st != true goto Lfire;\n\
                 return;\n\
               Lfire:\n\
                 virtual w.onEvent();\n\
                 return;\n\
               }\n\
             }",
        );
        let api = p.api_methods()[0].clone();
        let cfg = &icfg.cfgs[&api];
        let preds = identify_predicate_nodes(cfg, 3).unwrap();
        assert_eq!(preds, BTreeSet::from([1]));
        let prefix = CallChain { methods: vec![api.clone()], hops: vec![] };
        let expr = back_substitute(
            &p,
            &icfg,
            &StmtId { method: api, idx: 1 },
            &prefix,
        )
        .unwrap();
        assert!(!expr.unresolved);
        assert_eq!(expr.terms.len(), 1);
        assert_eq!(
            expr.terms[0],
            Term {
                lhs: svar("Global", &["started"]),
                op: RelOp::Ne,
                rhs: SymOperand::Const(Constant::Bool(true)),
            }
        );
    }

    #[test]
    fn two_paths_merge_into_disjunction() {
        // The loader shape: a local read from either a direct field or a
        // map lookup on the calling object, merged with a disjunction.
        let (p, icfg) = api_icfg(
            "framework class Loader { public bool mHaveData; }\n\
             framework class Client { public void onReset() { return; } }\n\
             framework class LoaderManager {\n\
               public Map mLoaders;\n\
               public Loader oldLoader;\n\
               api public void initLoader(int id, Client c) {\n\
                 Loader lo;\n\
                 Map ml;\n\
                 bool haveData;\n\
                 ml = this.mLoaders;\n\
                 lo = virtual ml.get(id);\n\
                 if lo != null goto Lgot;\n\
                 lo = this.oldLoader;\n\
               Lgot:\n\
                 haveData = lo.mHaveData;\n\
                 if haveData == true goto Lreset;\n\
                 goto Lend;\n\
               Lreset:\n\
                 virtual c.onReset();\n\
               Lend:\n\
                 return;\n\
               }\n\
             }",
        );
        let api = p.api_methods()[0].clone();
        let prefix = CallChain { methods: vec![api.clone()], hops: vec![] };
        let expr =
            back_substitute(&p, &icfg, &StmtId { method: api, idx: 5 }, &prefix).unwrap();
        assert!(!expr.unresolved, "{expr}");
        assert_eq!(expr.terms.len(), 2, "{expr}");
        let mk = |path: Vec<PathToken>| Term {
            lhs: SymOperand::Var(AbstractVariable {
                scope: VarScope::CallingObject,
                class_type: "LoaderManager".into(),
                path,
            }),
            op: RelOp::Eq,
            rhs: SymOperand::Const(Constant::Bool(true)),
        };
        let expected = vec![
            mk(vec![
                PathToken::Field("mLoaders".into()),
                PathToken::Call("get".into()),
                PathToken::Field("mHaveData".into()),
            ]),
            mk(vec![PathToken::Field("oldLoader".into()), PathToken::Field("mHaveData".into())]),
        ];
        assert_eq!(expr.terms, expected);
    }

    #[test]
    fn untracked_source_flags_unresolved() {
        let (p, icfg) = api_icfg(
            "framework class W { public void onEvent() { return; } }\n\
             framework class C {\n\
               api public void go(W w, int a) { int x;\n\
                 x = a * 3;\n\
                 if x > 0 goto Lfire;\n\
                 return;\n\
               Lfire:\n\
                 virtual w.onEvent();\n\
                 return;\n\
               }\n\
             }",
        );
        let api = p.api_methods()[0].clone();
        let prefix = CallChain { methods: vec![api.clone()], hops: vec![] };
        let expr =
            back_substitute(&p, &icfg, &StmtId { method: api, idx: 1 }, &prefix).unwrap();
        assert!(expr.unresolved);
        assert!(expr.terms.is_empty());
    }

    #[test]
    fn arithmetic_add_sub_substitutes() {
        let (p, icfg) = api_icfg(
            "framework class W { public void onEvent() { return; } }\n\
             framework class C {\n\
               api public void go(W w, int a, int b) { int x;\n\
                 x = a - b;\n\
                 if x >= 1 goto Lfire;\n\
                 return;\n\
               Lfire:\n\
                 virtual w.onEvent();\n\
                 return;\n\
               }\n\
             }",
        );
        let api = p.api_methods()[0].clone();
        let prefix = CallChain { methods: vec![api.clone()], hops: vec![] };
        let expr =
            back_substitute(&p, &icfg, &StmtId { method: api, idx: 1 }, &prefix).unwrap();
        assert!(!expr.unresolved);
        assert_eq!(expr.terms.len(), 1);
        match &expr.terms[0].lhs {
            SymOperand::Arith { op: ArithOp::Sub, lhs, rhs } => {
                assert!(matches!(**lhs, SymOperand::Var(_)));
                assert!(matches!(**rhs, SymOperand::Var(_)));
            }
            other => panic!("expected arithmetic operand, got {other}"),
        }
    }

    #[test]
    fn condition_rebases_across_chain_hop() {
        let (p, icfg) = api_icfg(
            "framework class Global { public static bool flag; }\n\
             framework class W { public void onEvent() { return; } }\n\
             framework class C {\n\
               api public void go(W w) { virtual this.inner(w); return; }\n\
               private void inner(W w) { bool f;\n\
                 f = static Global.flag;\n\
                 if f == true goto Lfire;\n\
                 return;\n\
               Lfire:\n\
                 virtual w.onEvent();\n\
                 return;\n\
               }\n\
             }",
        );
        let api = p.api_methods()[0].clone();
        let inner = icfg.cfgs.keys().find(|m| m.sig.name == "inner").unwrap().clone();
        let chain = CallChain {
            methods: vec![api.clone(), inner.clone()],
            hops: vec![StmtId { method: api.clone(), idx: 0 }],
        };
        let branches = predicate_branches_for_chain(
            &icfg,
            &chain,
            &StmtId { method: inner.clone(), idx: 3 },
        )
        .unwrap();
        assert_eq!(branches.len(), 1);
        let (branch, prefix) = &branches[0];
        assert_eq!(branch.method, inner);
        let expr = back_substitute(&p, &icfg, branch, prefix).unwrap();
        assert_eq!(expr.terms.len(), 1);
        assert_eq!(expr.terms[0].lhs, svar("Global", &["flag"]));
    }

    #[test]
    fn term_cap_flags_unresolved() {
        // A chain of branches multiplying backward paths: 2^7 = 128 merge
        // points exceeds the 64-term cap.
        let mut body = String::from("int x;\nint y;\ny = 0;\n");
        for i in 0..7 {
            body.push_str(&format!(
                "if p{i} == 0 goto LA{i};\n x = {i}; goto LB{i};\nLA{i}:\n x = p{i};\nLB{i}:\n y = y + x;\n"
            ));
        }
        body.push_str("if y > 0 goto Lfire;\nreturn;\nLfire:\nvirtual w.onEvent();\nreturn;\n");
        let params: String =
            (0..7).map(|i| format!(", int p{i}")).collect::<Vec<_>>().join("");
        let src = format!(
            "framework class W {{ public void onEvent() {{ return; }} }}\n\
             framework class C {{ api public void go(W w{params}) {{ {body} }} }}"
        );
        let (p, icfg) = api_icfg(&src);
        let api = p.api_methods()[0].clone();
        let cfg = build_cfg(&api, p.method(&api).unwrap());
        let fire = p.method(&api).unwrap().body.iter().rev().find(|s| s.is_call()).unwrap().id;
        let branches = identify_predicate_nodes(&cfg, fire).unwrap();
        let last_branch = *branches.iter().max().unwrap();
        let prefix = CallChain { methods: vec![api.clone()], hops: vec![] };
        let expr =
            back_substitute(&p, &icfg, &StmtId { method: api, idx: last_branch }, &prefix).unwrap();
        assert!(expr.unresolved, "terms: {}", expr.terms.len());
    }
}
