//! The MiniFW IR: a line-oriented, object-oriented three-address language
//! that models the framework/app split of callback-heavy platforms.
//!
//! A program is a set of classes and interfaces, each tagged `framework` or
//! `app`. Framework methods flagged `api` are the roots of summarization.
//! The collection classes `List`, `Set`, `Map`, `ArrayMap`, `SparseArray` and
//! the message-passing class `Handler` are predeclared opaque builtins; their
//! behavior is modeled by the update templates and the async handler linking
//! rather than by IR bodies.

mod lex;
mod parse;
mod print;

pub use parse::{parse_program, parse_programs};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Opaque classes that exist in every program without a declaration.
pub const BUILTIN_CLASSES: &[&str] = &["List", "Set", "Map", "ArrayMap", "SparseArray", "Handler"];

/// The implicit root of the class hierarchy.
pub const OBJECT: &str = "Object";

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A parse or validation diagnostic with a source location.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub file: Option<String>,
    pub pos: Pos,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { file: None, pos, severity: Severity::Error, message: message.into() }
    }

    pub fn warning(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { file: None, pos, severity: Severity::Warning, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.file {
            Some(name) => write!(f, "{name}:{}: {sev}: {}", self.pos, self.message),
            None => write!(f, "{}: {sev}: {}", self.pos, self.message),
        }
    }
}

/// Where a class or interface was declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Origin {
    Framework,
    App,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Framework => f.write_str("framework"),
            Origin::App => f.write_str("app"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Int,
    Bool,
    Str,
    Void,
    Class(String),
}

impl Type {
    pub fn class_name(&self) -> Option<&str> {
        match self {
            Type::Class(name) => Some(name),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Bool => f.write_str("bool"),
            Type::Str => f.write_str("string"),
            Type::Void => f.write_str("void"),
            Type::Class(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Visibility {
    Public,
    Protected,
    Private,
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Visibility::Public => f.write_str("public"),
            Visibility::Protected => f.write_str("protected"),
            Visibility::Private => f.write_str("private"),
        }
    }
}

/// Constants: the only literal values in the IR. String constants double as
/// component references when passed to component-launching API methods.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constant {
    Int(i64),
    Bool(bool),
    Str(String),
    Null,
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(v) => write!(f, "{v}"),
            Constant::Bool(v) => write!(f, "{v}"),
            Constant::Str(v) => write!(f, "\"{}\"", v.replace('\\', "\\\\").replace('"', "\\\"")),
            Constant::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Local(String),
    Const(Constant),
}

impl Operand {
    pub fn as_local(&self) -> Option<&str> {
        match self {
            Operand::Local(name) => Some(name),
            Operand::Const(_) => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Local(name) => f.write_str(name),
            Operand::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelOp {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

impl RelOp {
    pub fn negate(self) -> Self {
        match self {
            RelOp::Lt => RelOp::Ge,
            RelOp::Gt => RelOp::Le,
            RelOp::Le => RelOp::Gt,
            RelOp::Ge => RelOp::Lt,
            RelOp::Eq => RelOp::Ne,
            RelOp::Ne => RelOp::Eq,
        }
    }
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelOp::Lt => "<",
            RelOp::Gt => ">",
            RelOp::Le => "<=",
            RelOp::Ge => ">=",
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
        })
    }
}

/// A single three-address statement.
#[derive(Debug, Clone)]
pub struct Stmt {
    /// Dense index within the enclosing method body.
    pub id: usize,
    pub labels: Vec<String>,
    pub kind: StmtKind,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    /// `x = y;` or `x = 3;`
    AssignLocal { dst: String, src: Operand },
    /// `x = a + b;`
    BinaryOp { dst: String, op: ArithOp, lhs: Operand, rhs: Operand },
    /// `x = y.f;`
    FieldLoad { dst: String, base: String, field: String },
    /// `x.f = y;`
    FieldStore { base: String, field: String, value: Operand },
    /// `x = static C.f;`
    StaticLoad { dst: String, class: String, field: String },
    /// `static C.f = y;`
    StaticStore { class: String, field: String, value: Operand },
    /// `x = new C;`
    New { dst: String, class: String },
    /// `[x =] virtual b.m(a0, a1);`
    VirtualCall { dst: Option<String>, base: String, method: String, args: Vec<Operand> },
    /// `[x =] static C.m(a0, a1);`
    StaticCall { dst: Option<String>, class: String, method: String, args: Vec<Operand> },
    /// `if a < b goto L;`
    IfGoto { lhs: Operand, op: RelOp, rhs: Operand, target: String },
    Goto { target: String },
    Return { value: Option<Operand> },
}

impl Stmt {
    /// Local written by this statement, if any.
    pub fn def(&self) -> Option<&str> {
        match &self.kind {
            StmtKind::AssignLocal { dst, .. }
            | StmtKind::BinaryOp { dst, .. }
            | StmtKind::FieldLoad { dst, .. }
            | StmtKind::StaticLoad { dst, .. }
            | StmtKind::New { dst, .. } => Some(dst),
            StmtKind::VirtualCall { dst, .. } | StmtKind::StaticCall { dst, .. } => dst.as_deref(),
            _ => None,
        }
    }

    pub fn is_branch(&self) -> bool {
        matches!(self.kind, StmtKind::IfGoto { .. })
    }

    pub fn is_call(&self) -> bool {
        matches!(self.kind, StmtKind::VirtualCall { .. } | StmtKind::StaticCall { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone)]
pub struct Local {
    pub name: String,
    pub ty: Type,
}

/// Name plus parameter types; the key used for dispatch and overriding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodSig {
    pub name: String,
    pub params: Vec<Type>,
}

impl fmt::Display for MethodSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

/// Fully qualified method reference: declaring class plus signature.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodRef {
    pub class: String,
    pub sig: MethodSig,
}

impl MethodRef {
    pub fn new(class: impl Into<String>, sig: MethodSig) -> Self {
        MethodRef { class: class.into(), sig }
    }
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.class, self.sig)
    }
}

/// A statement within a specific method.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StmtId {
    pub method: MethodRef,
    pub idx: usize,
}

impl fmt::Display for StmtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.method, self.idx)
    }
}

#[derive(Debug, Clone)]
pub struct FieldDef {
    pub name: String,
    pub ty: Type,
    pub is_static: bool,
    pub is_final: bool,
    pub visibility: Visibility,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct MethodDef {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Type,
    pub is_static: bool,
    pub is_final: bool,
    pub is_api: bool,
    pub visibility: Visibility,
    pub locals: Vec<Local>,
    pub body: Vec<Stmt>,
    pub pos: Pos,
}

impl MethodDef {
    pub fn sig(&self) -> MethodSig {
        MethodSig { name: self.name.clone(), params: self.params.iter().map(|p| p.ty.clone()).collect() }
    }

    /// Declared type of a local, a parameter, or the implicit `this`.
    pub fn local_type<'a>(&'a self, class: &str, name: &str) -> Option<Type> {
        if name == "this" && !self.is_static {
            return Some(Type::Class(class.to_string()));
        }
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.ty.clone())
            .or_else(|| self.locals.iter().find(|l| l.name == name).map(|l| l.ty.clone()))
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct ClassDef {
    pub name: String,
    /// `None` means the implicit root `Object`.
    pub superclass: Option<String>,
    pub interfaces: Vec<String>,
    pub is_final: bool,
    pub is_builtin: bool,
    pub origin: Origin,
    pub fields: Vec<FieldDef>,
    pub methods: Vec<MethodDef>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct InterfaceDef {
    pub name: String,
    pub origin: Origin,
    pub methods: Vec<(MethodSig, Type, Pos)>,
    pub pos: Pos,
}

/// A validated MiniFW program. Immutable after construction; safe to share
/// across concurrent analyses.
#[derive(Debug, Clone)]
pub struct Program {
    classes: Vec<ClassDef>,
    interfaces: Vec<InterfaceDef>,
    class_index: BTreeMap<String, usize>,
    interface_index: BTreeMap<String, usize>,
}

impl Program {
    pub(crate) fn from_parts(classes: Vec<ClassDef>, interfaces: Vec<InterfaceDef>) -> Self {
        let class_index = classes.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
        let interface_index =
            interfaces.iter().enumerate().map(|(i, d)| (d.name.clone(), i)).collect();
        Program { classes, interfaces, class_index, interface_index }
    }

    /// Declared classes plus the predeclared builtins, in source order.
    pub fn classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.classes.iter()
    }

    pub fn interfaces(&self) -> impl Iterator<Item = &InterfaceDef> {
        self.interfaces.iter()
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.class_index.get(name).map(|&i| &self.classes[i])
    }

    pub fn interface(&self, name: &str) -> Option<&InterfaceDef> {
        self.interface_index.get(name).map(|&i| &self.interfaces[i])
    }

    pub fn origin(&self, class: &str) -> Option<Origin> {
        self.class(class)
            .map(|c| c.origin)
            .or_else(|| self.interface(class).map(|i| i.origin))
    }

    pub fn method(&self, mref: &MethodRef) -> Option<&MethodDef> {
        self.class(&mref.class)?.methods.iter().find(|m| m.sig() == mref.sig)
    }

    /// All methods with bodies, in source order.
    pub fn methods(&self) -> impl Iterator<Item = (MethodRef, &MethodDef)> {
        self.classes.iter().flat_map(|c| {
            c.methods.iter().map(move |m| (MethodRef::new(c.name.clone(), m.sig()), m))
        })
    }

    /// Framework methods flagged `api`, in source order.
    pub fn api_methods(&self) -> Vec<MethodRef> {
        self.methods().filter(|(_, m)| m.is_api).map(|(r, _)| r).collect()
    }

    /// Walk `class` then its superclass chain for a matching method.
    /// Absence is a valid result (e.g. interface-only signatures).
    pub fn resolve_dispatch(&self, receiver_class: &str, sig: &MethodSig) -> Option<MethodRef> {
        let mut cur = Some(receiver_class.to_string());
        while let Some(name) = cur {
            if let Some(class) = self.class(&name) {
                if class.methods.iter().any(|m| m.sig() == *sig) {
                    return Some(MethodRef::new(name, sig.clone()));
                }
                cur = Some(class.superclass.clone().unwrap_or_else(|| OBJECT.to_string()));
                if name == OBJECT {
                    return None;
                }
            } else {
                return None;
            }
        }
        None
    }

    /// Dispatch by name and arity, the information available at a call site
    /// (argument types are not statically evident for constants).
    pub fn resolve_call(&self, receiver_class: &str, name: &str, arity: usize) -> Option<MethodRef> {
        let mut cur = receiver_class.to_string();
        loop {
            let class = self.class(&cur)?;
            if let Some(m) = class.methods.iter().find(|m| m.name == name && m.params.len() == arity)
            {
                return Some(MethodRef::new(cur, m.sig()));
            }
            if cur == OBJECT {
                return None;
            }
            cur = class.superclass.clone().unwrap_or_else(|| OBJECT.to_string());
        }
    }

    /// Like `resolve_dispatch` but matches by method name only; used for the
    /// builtin `handleMessage` lookup where parameter types are opaque.
    pub fn resolve_by_name(&self, receiver_class: &str, name: &str) -> Option<MethodRef> {
        let mut cur = receiver_class.to_string();
        loop {
            let class = self.class(&cur)?;
            if let Some(m) = class.methods.iter().find(|m| m.name == name) {
                return Some(MethodRef::new(cur, m.sig()));
            }
            if cur == OBJECT {
                return None;
            }
            cur = class.superclass.clone().unwrap_or_else(|| OBJECT.to_string());
        }
    }

    /// Nearest declaration of `sig` walking up from `class`, i.e. the class
    /// whose declaration a call through a `class`-typed reference names.
    pub fn declaring_class(&self, class: &str, sig: &MethodSig) -> Option<String> {
        self.resolve_dispatch(class, sig).map(|r| r.class)
    }

    /// Interface (implemented anywhere in the hierarchy of `class`) declaring `sig`.
    pub fn declaring_interface(&self, class: &str, sig: &MethodSig) -> Option<String> {
        let mut cur = Some(class.to_string());
        while let Some(name) = cur {
            let c = self.class(&name)?;
            for iface in &c.interfaces {
                if let Some(def) = self.interface(iface) {
                    if def.methods.iter().any(|(s, _, _)| s == sig) {
                        return Some(iface.clone());
                    }
                }
            }
            if name == OBJECT {
                return None;
            }
            cur = Some(c.superclass.clone().unwrap_or_else(|| OBJECT.to_string()));
        }
        None
    }

    pub fn is_subclass_of(&self, class: &str, ancestor: &str) -> bool {
        let mut cur = class.to_string();
        loop {
            if cur == ancestor {
                return true;
            }
            match self.class(&cur) {
                Some(c) if cur != OBJECT => {
                    cur = c.superclass.clone().unwrap_or_else(|| OBJECT.to_string());
                }
                _ => return false,
            }
        }
    }

    /// The subtype cone of a class or interface name: the type itself (for
    /// classes) plus every class below it, sorted by name.
    pub fn cone(&self, type_name: &str) -> Vec<String> {
        let mut out = BTreeSet::new();
        if self.class(type_name).is_some() {
            for c in &self.classes {
                if self.is_subclass_of(&c.name, type_name) {
                    out.insert(c.name.clone());
                }
            }
        } else if self.interface(type_name).is_some() {
            for c in &self.classes {
                if self.implements(&c.name, type_name) {
                    out.insert(c.name.clone());
                }
            }
        }
        out.into_iter().collect()
    }

    fn implements(&self, class: &str, iface: &str) -> bool {
        let mut cur = class.to_string();
        loop {
            match self.class(&cur) {
                Some(c) => {
                    if c.interfaces.iter().any(|i| i == iface) {
                        return true;
                    }
                    if cur == OBJECT {
                        return false;
                    }
                    cur = c.superclass.clone().unwrap_or_else(|| OBJECT.to_string());
                }
                None => return false,
            }
        }
    }

    /// Declared type of a field, walking the superclass chain.
    pub fn field_type(&self, class: &str, field: &str) -> Option<(String, &FieldDef)> {
        let mut cur = class.to_string();
        loop {
            let c = self.class(&cur)?;
            if let Some(f) = c.fields.iter().find(|f| f.name == field) {
                return Some((cur, f));
            }
            if cur == OBJECT {
                return None;
            }
            cur = c.superclass.clone().unwrap_or_else(|| OBJECT.to_string());
        }
    }

    /// Canonical textual form; reparsing it yields a structurally identical
    /// program.
    pub fn pretty(&self) -> String {
        print::pretty(self)
    }
}

/// Appends the predeclared builtin classes (and the `Object` root) that the
/// source did not declare itself.
pub(crate) fn builtin_classes() -> Vec<ClassDef> {
    let mut out = Vec::new();
    out.push(ClassDef {
        name: OBJECT.to_string(),
        superclass: None,
        interfaces: Vec::new(),
        is_final: false,
        is_builtin: true,
        origin: Origin::Framework,
        fields: Vec::new(),
        methods: Vec::new(),
        pos: Pos::default(),
    });
    for name in BUILTIN_CLASSES {
        out.push(ClassDef {
            name: (*name).to_string(),
            superclass: None,
            interfaces: Vec::new(),
            is_final: false,
            is_builtin: true,
            origin: Origin::Framework,
            fields: Vec::new(),
            methods: Vec::new(),
            pos: Pos::default(),
        });
    }
    out
}
