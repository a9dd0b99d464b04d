//! Recursive-descent parser and semantic validation.
//!
//! Parsing keeps going after an error so one run reports as many diagnostics
//! as possible. A program is only returned when no errors were found.

use super::lex::{tokenize, Kw, Punct, Tok, Token};
use super::*;

/// Parse and validate a single source text.
pub fn parse_program(text: &str) -> std::result::Result<Program, Vec<Diagnostic>> {
    parse_programs(&[("<input>", text)])
}

/// Parse several sources (e.g. a framework file plus an app file) into one
/// validated program. Diagnostics carry the source name they came from.
pub fn parse_programs(
    sources: &[(&str, &str)],
) -> std::result::Result<Program, Vec<Diagnostic>> {
    let mut classes = builtin_classes();
    let mut interfaces = Vec::new();
    let mut diags = Vec::new();

    for (name, text) in sources {
        let (tokens, mut lex_diags) = tokenize(text);
        for d in &mut lex_diags {
            d.file = Some((*name).to_string());
        }
        diags.extend(lex_diags);
        let mut parser = Parser { tokens, pos: 0, diags: Vec::new() };
        parser.parse_top(&mut classes, &mut interfaces);
        for d in &mut parser.diags {
            d.file = Some((*name).to_string());
        }
        diags.extend(parser.diags);
    }

    let program = Program::from_parts(classes, interfaces);
    validate(&program, &mut diags);

    if diags.iter().any(|d| d.severity == Severity::Error) {
        Err(diags)
    } else {
        Ok(program)
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn here(&self) -> Pos {
        self.tokens[self.pos].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&mut self, msg: impl Into<String>) {
        let pos = self.here();
        self.diags.push(Diagnostic::error(pos, msg));
    }

    fn eat_punct(&mut self, p: Punct, what: &str) -> bool {
        if *self.peek() == Tok::Punct(p) {
            self.bump();
            true
        } else {
            self.error(format!("expected {what}"));
            false
        }
    }

    fn eat_ident(&mut self, what: &str) -> Option<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Some(name)
            }
            _ => {
                self.error(format!("expected {what}"));
                None
            }
        }
    }

    /// Skip to just past the next `;`, or stop before `}`/EOF.
    fn recover_stmt(&mut self) {
        loop {
            match self.peek() {
                Tok::Punct(Punct::Semi) => {
                    self.bump();
                    return;
                }
                Tok::Punct(Punct::RBrace) | Tok::Eof => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    /// Skip a braced block with balanced nesting (for recovery).
    fn recover_block(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Punct(Punct::LBrace) => {
                    depth += 1;
                    self.bump();
                }
                Tok::Punct(Punct::RBrace) => {
                    self.bump();
                    if depth <= 1 {
                        return;
                    }
                    depth -= 1;
                }
                Tok::Eof => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn parse_top(&mut self, classes: &mut Vec<ClassDef>, interfaces: &mut Vec<InterfaceDef>) {
        loop {
            match self.peek().clone() {
                Tok::Eof => return,
                Tok::Kw(Kw::Framework) | Tok::Kw(Kw::App) => {
                    let origin = if *self.peek() == Tok::Kw(Kw::Framework) {
                        Origin::Framework
                    } else {
                        Origin::App
                    };
                    self.bump();
                    let mut is_final = false;
                    if *self.peek() == Tok::Kw(Kw::Final) {
                        is_final = true;
                        self.bump();
                    }
                    match self.peek().clone() {
                        Tok::Kw(Kw::Class) => {
                            self.bump();
                            if let Some(c) = self.parse_class(origin, is_final) {
                                classes.push(c);
                            }
                        }
                        Tok::Kw(Kw::Interface) => {
                            self.bump();
                            if let Some(i) = self.parse_interface(origin) {
                                interfaces.push(i);
                            }
                        }
                        _ => {
                            self.error("expected 'class' or 'interface'");
                            self.recover_block();
                        }
                    }
                }
                _ => {
                    self.error("expected 'framework' or 'app' declaration");
                    self.bump();
                }
            }
        }
    }

    fn parse_class(&mut self, origin: Origin, is_final: bool) -> Option<ClassDef> {
        let pos = self.here();
        let name = self.eat_ident("class name")?;
        let mut superclass = None;
        let mut ifaces = Vec::new();
        if *self.peek() == Tok::Kw(Kw::Extends) {
            self.bump();
            let sup = self.eat_ident("superclass name")?;
            if sup != OBJECT {
                superclass = Some(sup);
            }
        }
        if *self.peek() == Tok::Kw(Kw::Implements) {
            self.bump();
            loop {
                ifaces.push(self.eat_ident("interface name")?);
                if *self.peek() == Tok::Punct(Punct::Comma) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.eat_punct(Punct::LBrace, "'{'");
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        loop {
            match self.peek() {
                Tok::Punct(Punct::RBrace) => {
                    self.bump();
                    break;
                }
                Tok::Eof => {
                    self.error("unexpected end of input in class body");
                    break;
                }
                _ => self.parse_member(&mut fields, &mut methods),
            }
        }
        Some(ClassDef {
            name,
            superclass,
            interfaces: ifaces,
            is_final,
            is_builtin: false,
            origin,
            fields,
            methods,
            pos,
        })
    }

    fn parse_interface(&mut self, origin: Origin) -> Option<InterfaceDef> {
        let pos = self.here();
        let name = self.eat_ident("interface name")?;
        self.eat_punct(Punct::LBrace, "'{'");
        let mut methods = Vec::new();
        loop {
            match self.peek() {
                Tok::Punct(Punct::RBrace) => {
                    self.bump();
                    break;
                }
                Tok::Eof => {
                    self.error("unexpected end of input in interface body");
                    break;
                }
                _ => {
                    let mpos = self.here();
                    let Some(ret) = self.parse_type() else {
                        self.recover_stmt();
                        continue;
                    };
                    let Some(mname) = self.eat_ident("method name") else {
                        self.recover_stmt();
                        continue;
                    };
                    self.eat_punct(Punct::LParen, "'('");
                    let params = self.parse_params();
                    self.eat_punct(Punct::Semi, "';'");
                    let sig =
                        MethodSig { name: mname, params: params.into_iter().map(|p| p.ty).collect() };
                    methods.push((sig, ret, mpos));
                }
            }
        }
        Some(InterfaceDef { name, origin, methods, pos })
    }

    fn parse_modifiers(&mut self) -> (Option<Visibility>, bool, bool, bool) {
        let mut visibility = None;
        let mut is_static = false;
        let mut is_final = false;
        let mut is_api = false;
        loop {
            match self.peek() {
                Tok::Kw(Kw::Public) => visibility = Some(Visibility::Public),
                Tok::Kw(Kw::Protected) => visibility = Some(Visibility::Protected),
                Tok::Kw(Kw::Private) => visibility = Some(Visibility::Private),
                // `static` is also a statement/call prefix, but inside a
                // member header position it is always a modifier.
                Tok::Kw(Kw::Static) => is_static = true,
                Tok::Kw(Kw::Final) => is_final = true,
                Tok::Kw(Kw::Api) => is_api = true,
                _ => return (visibility, is_static, is_final, is_api),
            }
            self.bump();
        }
    }

    fn parse_type(&mut self) -> Option<Type> {
        let name = match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                name
            }
            _ => {
                self.error("expected type name");
                return None;
            }
        };
        Some(match name.as_str() {
            "int" => Type::Int,
            "bool" => Type::Bool,
            "string" => Type::Str,
            "void" => Type::Void,
            _ => Type::Class(name),
        })
    }

    fn parse_params(&mut self) -> Vec<Param> {
        let mut params = Vec::new();
        if *self.peek() == Tok::Punct(Punct::RParen) {
            self.bump();
            return params;
        }
        loop {
            let Some(ty) = self.parse_type() else { break };
            let Some(name) = self.eat_ident("parameter name") else { break };
            params.push(Param { name, ty });
            match self.peek() {
                Tok::Punct(Punct::Comma) => {
                    self.bump();
                }
                _ => break,
            }
        }
        self.eat_punct(Punct::RParen, "')'");
        params
    }

    fn parse_member(&mut self, fields: &mut Vec<FieldDef>, methods: &mut Vec<MethodDef>) {
        let pos = self.here();
        let (visibility, is_static, is_final, is_api) = self.parse_modifiers();
        let visibility = visibility.unwrap_or(Visibility::Public);
        let Some(ty) = self.parse_type() else {
            self.recover_stmt();
            return;
        };
        let Some(name) = self.eat_ident("member name") else {
            self.recover_stmt();
            return;
        };
        match self.peek() {
            Tok::Punct(Punct::Semi) => {
                self.bump();
                if is_api {
                    self.diags.push(Diagnostic::error(pos, "'api' is not a field modifier"));
                }
                if ty == Type::Void {
                    self.diags.push(Diagnostic::error(pos, "field cannot have type void"));
                }
                fields.push(FieldDef { name, ty, is_static, is_final, visibility, pos });
            }
            Tok::Punct(Punct::LParen) => {
                self.bump();
                let params = self.parse_params();
                let (locals, body) = self.parse_body();
                methods.push(MethodDef {
                    name,
                    params,
                    ret: ty,
                    is_static,
                    is_final,
                    is_api,
                    visibility,
                    locals,
                    body,
                    pos,
                });
            }
            _ => {
                self.error("expected ';' (field) or '(' (method)");
                self.recover_stmt();
            }
        }
    }

    fn parse_body(&mut self) -> (Vec<Local>, Vec<Stmt>) {
        let mut locals = Vec::new();
        let mut body: Vec<Stmt> = Vec::new();
        if !self.eat_punct(Punct::LBrace, "'{'") {
            self.recover_block();
            return (locals, body);
        }
        // Local declarations come first: `Type name;` pairs.
        while matches!(self.peek(), Tok::Ident(_))
            && matches!(self.peek_at(1), Tok::Ident(_))
            && *self.peek_at(2) == Tok::Punct(Punct::Semi)
        {
            let ty = self.parse_type().expect("checked ident");
            let name = self.eat_ident("local name").expect("checked ident");
            self.bump(); // ';'
            locals.push(Local { name, ty });
        }
        let mut labels: Vec<String> = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Punct(Punct::RBrace) => {
                    self.bump();
                    if !labels.is_empty() {
                        self.error("label at end of body has no statement");
                    }
                    break;
                }
                Tok::Eof => {
                    self.error("unexpected end of input in method body");
                    break;
                }
                Tok::Ident(name) if *self.peek_at(1) == Tok::Punct(Punct::Colon) => {
                    self.bump();
                    self.bump();
                    labels.push(name);
                }
                _ => {
                    let pos = self.here();
                    let id = body.len();
                    match self.parse_stmt() {
                        Some(kind) => {
                            body.push(Stmt { id, labels: std::mem::take(&mut labels), kind, pos });
                        }
                        None => {
                            labels.clear();
                            self.recover_stmt();
                        }
                    }
                }
            }
        }
        (locals, body)
    }

    fn parse_operand(&mut self) -> Option<Operand> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Some(Operand::Local(name))
            }
            Tok::Int(v) => {
                self.bump();
                Some(Operand::Const(Constant::Int(v)))
            }
            Tok::Punct(Punct::Minus) => {
                self.bump();
                match self.peek().clone() {
                    Tok::Int(v) => {
                        self.bump();
                        Some(Operand::Const(Constant::Int(-v)))
                    }
                    _ => {
                        self.error("expected integer literal after '-'");
                        None
                    }
                }
            }
            Tok::Kw(Kw::True) => {
                self.bump();
                Some(Operand::Const(Constant::Bool(true)))
            }
            Tok::Kw(Kw::False) => {
                self.bump();
                Some(Operand::Const(Constant::Bool(false)))
            }
            Tok::Kw(Kw::Null) => {
                self.bump();
                Some(Operand::Const(Constant::Null))
            }
            Tok::Str(s) => {
                self.bump();
                Some(Operand::Const(Constant::Str(s)))
            }
            _ => {
                self.error("expected operand");
                None
            }
        }
    }

    fn parse_args(&mut self) -> Option<Vec<Operand>> {
        let mut args = Vec::new();
        if *self.peek() == Tok::Punct(Punct::RParen) {
            self.bump();
            return Some(args);
        }
        loop {
            args.push(self.parse_operand()?);
            match self.peek() {
                Tok::Punct(Punct::Comma) => {
                    self.bump();
                }
                _ => break,
            }
        }
        if self.eat_punct(Punct::RParen, "')'") {
            Some(args)
        } else {
            None
        }
    }

    fn relop(&mut self) -> Option<RelOp> {
        let op = match self.peek() {
            Tok::Punct(Punct::Lt) => RelOp::Lt,
            Tok::Punct(Punct::Gt) => RelOp::Gt,
            Tok::Punct(Punct::Le) => RelOp::Le,
            Tok::Punct(Punct::Ge) => RelOp::Ge,
            Tok::Punct(Punct::EqEq) => RelOp::Eq,
            Tok::Punct(Punct::Ne) => RelOp::Ne,
            _ => {
                self.error("expected relational operator");
                return None;
            }
        };
        self.bump();
        Some(op)
    }

    fn arith_op(&self) -> Option<ArithOp> {
        match self.peek() {
            Tok::Punct(Punct::Plus) => Some(ArithOp::Add),
            Tok::Punct(Punct::Minus) => Some(ArithOp::Sub),
            Tok::Punct(Punct::Star) => Some(ArithOp::Mul),
            Tok::Punct(Punct::Slash) => Some(ArithOp::Div),
            _ => None,
        }
    }

    fn parse_stmt(&mut self) -> Option<StmtKind> {
        match self.peek().clone() {
            Tok::Kw(Kw::If) => {
                self.bump();
                let lhs = self.parse_operand()?;
                let op = self.relop()?;
                let rhs = self.parse_operand()?;
                if *self.peek() != Tok::Kw(Kw::Goto) {
                    self.error("expected 'goto'");
                    return None;
                }
                self.bump();
                let target = self.eat_ident("label")?;
                self.eat_punct(Punct::Semi, "';'").then_some(())?;
                Some(StmtKind::IfGoto { lhs, op, rhs, target })
            }
            Tok::Kw(Kw::Goto) => {
                self.bump();
                let target = self.eat_ident("label")?;
                self.eat_punct(Punct::Semi, "';'").then_some(())?;
                Some(StmtKind::Goto { target })
            }
            Tok::Kw(Kw::Return) => {
                self.bump();
                if *self.peek() == Tok::Punct(Punct::Semi) {
                    self.bump();
                    return Some(StmtKind::Return { value: None });
                }
                let value = self.parse_operand()?;
                self.eat_punct(Punct::Semi, "';'").then_some(())?;
                Some(StmtKind::Return { value: Some(value) })
            }
            Tok::Kw(Kw::Virtual) => {
                let (base, method, args) = self.parse_virtual_tail()?;
                self.eat_punct(Punct::Semi, "';'").then_some(())?;
                Some(StmtKind::VirtualCall { dst: None, base, method, args })
            }
            Tok::Kw(Kw::Static) => {
                self.bump();
                let class = self.eat_ident("class name")?;
                self.eat_punct(Punct::Dot, "'.'").then_some(())?;
                let member = self.eat_ident("member name")?;
                match self.peek() {
                    Tok::Punct(Punct::LParen) => {
                        self.bump();
                        let args = self.parse_args()?;
                        self.eat_punct(Punct::Semi, "';'").then_some(())?;
                        Some(StmtKind::StaticCall { dst: None, class, method: member, args })
                    }
                    Tok::Punct(Punct::Assign) => {
                        self.bump();
                        let value = self.parse_operand()?;
                        self.eat_punct(Punct::Semi, "';'").then_some(())?;
                        Some(StmtKind::StaticStore { class, field: member, value })
                    }
                    _ => {
                        self.error("expected '(' (static call) or '=' (static store)");
                        None
                    }
                }
            }
            Tok::Kw(Kw::Special) => {
                self.error("'special' is reserved and not supported");
                None
            }
            Tok::Ident(first) => {
                self.bump();
                match self.peek().clone() {
                    // x.f = v;
                    Tok::Punct(Punct::Dot) => {
                        self.bump();
                        let field = self.eat_ident("field name")?;
                        self.eat_punct(Punct::Assign, "'='").then_some(())?;
                        let value = self.parse_operand()?;
                        self.eat_punct(Punct::Semi, "';'").then_some(())?;
                        Some(StmtKind::FieldStore { base: first, field, value })
                    }
                    Tok::Punct(Punct::Assign) => {
                        self.bump();
                        self.parse_rhs(first)
                    }
                    _ => {
                        self.error("expected '=' or '.' after identifier");
                        None
                    }
                }
            }
            _ => {
                self.error("expected statement");
                None
            }
        }
    }

    fn parse_virtual_tail(&mut self) -> Option<(String, String, Vec<Operand>)> {
        self.bump(); // 'virtual'
        let base = self.eat_ident("receiver local")?;
        self.eat_punct(Punct::Dot, "'.'").then_some(())?;
        let method = self.eat_ident("method name")?;
        self.eat_punct(Punct::LParen, "'('").then_some(())?;
        let args = self.parse_args()?;
        Some((base, method, args))
    }

    /// Right-hand side of `dst = ...;`.
    fn parse_rhs(&mut self, dst: String) -> Option<StmtKind> {
        match self.peek().clone() {
            Tok::Kw(Kw::New) => {
                self.bump();
                let class = self.eat_ident("class name")?;
                self.eat_punct(Punct::Semi, "';'").then_some(())?;
                Some(StmtKind::New { dst, class })
            }
            Tok::Kw(Kw::Virtual) => {
                let (base, method, args) = self.parse_virtual_tail()?;
                self.eat_punct(Punct::Semi, "';'").then_some(())?;
                Some(StmtKind::VirtualCall { dst: Some(dst), base, method, args })
            }
            Tok::Kw(Kw::Static) => {
                self.bump();
                let class = self.eat_ident("class name")?;
                self.eat_punct(Punct::Dot, "'.'").then_some(())?;
                let member = self.eat_ident("member name")?;
                if *self.peek() == Tok::Punct(Punct::LParen) {
                    self.bump();
                    let args = self.parse_args()?;
                    self.eat_punct(Punct::Semi, "';'").then_some(())?;
                    Some(StmtKind::StaticCall { dst: Some(dst), class, method: member, args })
                } else {
                    self.eat_punct(Punct::Semi, "';'").then_some(())?;
                    Some(StmtKind::StaticLoad { dst, class, field: member })
                }
            }
            _ => {
                // `x = y.f;`, `x = a OP b;`, or a plain copy/constant.
                if let (Tok::Ident(base), Tok::Punct(Punct::Dot)) =
                    (self.peek().clone(), self.peek_at(1).clone())
                {
                    self.bump();
                    self.bump();
                    let field = self.eat_ident("field name")?;
                    self.eat_punct(Punct::Semi, "';'").then_some(())?;
                    return Some(StmtKind::FieldLoad { dst, base, field });
                }
                let lhs = self.parse_operand()?;
                if let Some(op) = self.arith_op() {
                    self.bump();
                    let rhs = self.parse_operand()?;
                    self.eat_punct(Punct::Semi, "';'").then_some(())?;
                    return Some(StmtKind::BinaryOp { dst, op, lhs, rhs });
                }
                self.eat_punct(Punct::Semi, "';'").then_some(())?;
                Some(StmtKind::AssignLocal { dst, src: lhs })
            }
        }
    }
}

const RESERVED_TYPE_NAMES: &[&str] = &["int", "bool", "string", "void"];

fn validate(program: &Program, diags: &mut Vec<Diagnostic>) {
    let mut seen = BTreeMap::new();
    for c in program.classes() {
        if RESERVED_TYPE_NAMES.contains(&c.name.as_str()) {
            diags.push(Diagnostic::error(c.pos, format!("reserved type name '{}'", c.name)));
        }
        if let Some(_prev) = seen.insert(c.name.clone(), c.pos) {
            if !c.is_builtin {
                diags.push(Diagnostic::error(c.pos, format!("duplicate class '{}'", c.name)));
            }
        }
    }
    for i in program.interfaces() {
        if let Some(_prev) = seen.insert(i.name.clone(), i.pos) {
            diags.push(Diagnostic::error(i.pos, format!("duplicate type name '{}'", i.name)));
        }
    }

    // Hierarchy resolution and acyclicity.
    for c in program.classes() {
        if let Some(sup) = &c.superclass {
            if program.class(sup).is_none() {
                diags.push(Diagnostic::error(c.pos, format!("unresolved superclass {sup}")));
            }
        }
        for iface in &c.interfaces {
            if program.interface(iface).is_none() {
                diags.push(Diagnostic::error(c.pos, format!("unresolved interface {iface}")));
            }
        }
    }
    for c in program.classes() {
        let mut hops = 0usize;
        let mut cur = c.superclass.clone();
        while let Some(name) = cur {
            if name == c.name {
                diags.push(Diagnostic::error(c.pos, format!("inheritance cycle through '{}'", c.name)));
                break;
            }
            hops += 1;
            if hops > seen.len() + 1 {
                break; // cycle among other classes, reported on its own member
            }
            cur = program.class(&name).and_then(|k| k.superclass.clone());
        }
    }

    let type_exists = |t: &Type| match t {
        Type::Class(name) => program.class(name).is_some() || program.interface(name).is_some(),
        _ => true,
    };

    for c in program.classes().filter(|c| !c.is_builtin) {
        let mut field_names = BTreeSet::new();
        for f in &c.fields {
            if !field_names.insert(f.name.clone()) {
                diags.push(Diagnostic::error(f.pos, format!("duplicate field '{}.{}'", c.name, f.name)));
            }
            if !type_exists(&f.ty) {
                diags.push(Diagnostic::error(f.pos, format!("unresolved type {}", f.ty)));
            }
        }
        let mut method_sigs = BTreeSet::new();
        for m in &c.methods {
            if !method_sigs.insert(m.sig()) {
                diags.push(Diagnostic::error(m.pos, format!("duplicate method '{}.{}'", c.name, m.sig())));
            }
            if m.is_api && c.origin == Origin::App {
                diags.push(Diagnostic::error(m.pos, format!("'api' flag on app class method '{}.{}'", c.name, m.name)));
            }
            if !type_exists(&m.ret) {
                diags.push(Diagnostic::error(m.pos, format!("unresolved type {}", m.ret)));
            }
            validate_method(program, c, m, &type_exists, diags);
        }
    }
}

fn validate_method(
    program: &Program,
    class: &ClassDef,
    method: &MethodDef,
    type_exists: &dyn Fn(&Type) -> bool,
    diags: &mut Vec<Diagnostic>,
) {
    let mut names = BTreeSet::new();
    names.insert("this".to_string());
    for p in &method.params {
        if !names.insert(p.name.clone()) {
            diags.push(Diagnostic::error(method.pos, format!("duplicate parameter '{}'", p.name)));
        }
        if !type_exists(&p.ty) || p.ty == Type::Void {
            diags.push(Diagnostic::error(method.pos, format!("unresolved parameter type {}", p.ty)));
        }
    }
    for l in &method.locals {
        if !names.insert(l.name.clone()) {
            diags.push(Diagnostic::error(method.pos, format!("duplicate local '{}'", l.name)));
        }
        if !type_exists(&l.ty) || l.ty == Type::Void {
            diags.push(Diagnostic::error(method.pos, format!("unresolved local type {}", l.ty)));
        }
    }

    let mut labels = BTreeSet::new();
    for s in &method.body {
        for l in &s.labels {
            if !labels.insert(l.clone()) {
                diags.push(Diagnostic::error(s.pos, format!("duplicate label '{l}'")));
            }
        }
    }

    let local_defined = |name: &str| -> bool {
        name == "this" && !method.is_static
            || method.params.iter().any(|p| p.name == name)
            || method.locals.iter().any(|l| l.name == name)
    };
    let local_class = |name: &str| -> Option<String> {
        method.local_type(&class.name, name).and_then(|t| t.class_name().map(str::to_string))
    };

    for s in &method.body {
        let mut errs: Vec<String> = Vec::new();
        let check_local = |errs: &mut Vec<String>, name: &str| {
            if !local_defined(name) {
                errs.push(format!("unresolved local '{name}'"));
            }
        };
        let check_operand = |errs: &mut Vec<String>, op: &Operand| {
            if let Operand::Local(name) = op {
                if !local_defined(name) {
                    errs.push(format!("unresolved local '{name}'"));
                }
            }
        };
        let check_field_base = |errs: &mut Vec<String>, base: &str, field: &str| {
            if let Some(cname) = local_class(base) {
                if program.field_type(&cname, field).is_none() {
                    errs.push(format!("unknown field '{field}' on {cname}"));
                }
            } else if local_defined(base) {
                errs.push(format!("field access on non-object local '{base}'"));
            }
        };
        let check_static_field = |errs: &mut Vec<String>, cname: &str, field: &str| {
            if program.class(cname).is_none() {
                errs.push(format!("unresolved class '{cname}'"));
            } else if program.field_type(cname, field).map(|(_, f)| f.is_static) != Some(true) {
                errs.push(format!("unknown static field '{cname}.{field}'"));
            }
        };
        match &s.kind {
            StmtKind::AssignLocal { dst, src } => {
                check_local(&mut errs, dst);
                check_operand(&mut errs, src);
            }
            StmtKind::BinaryOp { dst, lhs, rhs, .. } => {
                check_local(&mut errs, dst);
                check_operand(&mut errs, lhs);
                check_operand(&mut errs, rhs);
            }
            StmtKind::FieldLoad { dst, base, field } => {
                check_local(&mut errs, dst);
                check_local(&mut errs, base);
                check_field_base(&mut errs, base, field);
            }
            StmtKind::FieldStore { base, field, value } => {
                check_local(&mut errs, base);
                check_operand(&mut errs, value);
                check_field_base(&mut errs, base, field);
            }
            StmtKind::StaticLoad { dst, class: cname, field } => {
                check_local(&mut errs, dst);
                check_static_field(&mut errs, cname, field);
            }
            StmtKind::StaticStore { class: cname, field, value } => {
                check_operand(&mut errs, value);
                check_static_field(&mut errs, cname, field);
            }
            StmtKind::New { dst, class: cname } => {
                check_local(&mut errs, dst);
                if program.class(cname).is_none() {
                    if program.interface(cname).is_some() {
                        errs.push(format!("cannot instantiate interface '{cname}'"));
                    } else {
                        errs.push(format!("unresolved class '{cname}'"));
                    }
                }
            }
            StmtKind::VirtualCall { dst, base, args, .. } => {
                if let Some(d) = dst {
                    check_local(&mut errs, d);
                }
                check_local(&mut errs, base);
                if local_defined(base) && local_class(base).is_none() {
                    errs.push(format!("virtual call on non-object local '{base}'"));
                }
                for a in args {
                    check_operand(&mut errs, a);
                }
            }
            StmtKind::StaticCall { dst, class: cname, args, .. } => {
                if let Some(d) = dst {
                    check_local(&mut errs, d);
                }
                if program.class(cname).is_none() {
                    errs.push(format!("unresolved class '{cname}'"));
                }
                for a in args {
                    check_operand(&mut errs, a);
                }
            }
            StmtKind::IfGoto { lhs, rhs, target, .. } => {
                check_operand(&mut errs, lhs);
                check_operand(&mut errs, rhs);
                if !labels.contains(target) {
                    errs.push(format!("unresolved label '{target}'"));
                }
            }
            StmtKind::Goto { target } => {
                if !labels.contains(target) {
                    errs.push(format!("unresolved label '{target}'"));
                }
            }
            StmtKind::Return { value } => {
                if let Some(v) = value {
                    check_operand(&mut errs, v);
                    if method.ret == Type::Void {
                        errs.push("value returned from void method".to_string());
                    }
                }
            }
        }
        diags.extend(errs.into_iter().map(|m| Diagnostic::error(s.pos, m)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_framework_class() {
        let p = parse_program("framework class Service { public void onCreate() { return; } }")
            .expect("parses");
        let c = p.class("Service").unwrap();
        assert_eq!(c.origin, Origin::Framework);
        assert!(!c.is_final);
        let m = &c.methods[0];
        assert_eq!(m.visibility, Visibility::Public);
        assert!(!m.is_final);
    }

    #[test]
    fn unresolved_superclass_reported() {
        let err = parse_program("app class A extends B { }").unwrap_err();
        assert!(err.iter().any(|d| d.message.contains("unresolved superclass B")), "{err:?}");
    }

    #[test]
    fn duplicate_class_reported() {
        let err = parse_program("app class A { } app class A { }").unwrap_err();
        assert!(err.iter().any(|d| d.message.contains("duplicate class 'A'")));
    }

    #[test]
    fn api_on_app_class_rejected() {
        let err = parse_program("app class A { api public void go() { return; } }").unwrap_err();
        assert!(err.iter().any(|d| d.message.contains("'api' flag on app class")));
    }

    #[test]
    fn multiple_diagnostics_collected() {
        let err = parse_program(
            "app class A extends B { public void m() { x = 1; goto Nowhere; } }",
        )
        .unwrap_err();
        assert!(err.len() >= 3, "{err:?}");
    }

    #[test]
    fn inheritance_cycle_rejected() {
        let err = parse_program("app class A extends B { } app class B extends A { }").unwrap_err();
        assert!(err.iter().any(|d| d.message.contains("inheritance cycle")));
    }

    #[test]
    fn dispatch_walks_superclass_chain() {
        let p = parse_program(
            "framework class Service { public void onCreate() { return; } public void onStartCommand() { return; } }\n\
             app class MyService extends Service { public void onCreate() { return; } }",
        )
        .unwrap();
        let on_create = MethodSig { name: "onCreate".into(), params: vec![] };
        let on_start = MethodSig { name: "onStartCommand".into(), params: vec![] };
        let missing = MethodSig { name: "undeclaredMethod".into(), params: vec![] };
        assert_eq!(p.resolve_dispatch("MyService", &on_create).unwrap().class, "MyService");
        assert_eq!(p.resolve_dispatch("MyService", &on_start).unwrap().class, "Service");
        assert!(p.resolve_dispatch("Service", &missing).is_none());
    }

    #[test]
    fn builtins_are_predeclared() {
        let p = parse_program("app class A extends Handler { public void handleMessage(int m) { return; } }")
            .unwrap();
        assert!(p.class("Handler").unwrap().is_builtin);
        assert!(p.is_subclass_of("A", "Handler"));
    }

    #[test]
    fn labels_and_branches_parse() {
        let p = parse_program(
            "app class A { public void m(int x) { int y;\n if x < 3 goto Lend;\n y = x + 1;\n Lend:\n return; } }",
        )
        .unwrap();
        let m = &p.class("A").unwrap().methods[0];
        assert_eq!(m.body.len(), 3);
        assert_eq!(m.body[2].labels, vec!["Lend".to_string()]);
        assert!(m.body[0].is_branch());
    }

    #[test]
    fn stmt_ids_dense_and_stable() {
        let text = "app class A { public void m() { int a; a = 1; a = 2; a = 3; return; } }";
        let p = parse_program(text).unwrap();
        let ids: Vec<usize> =
            p.class("A").unwrap().methods[0].body.iter().map(|s| s.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        let p2 = parse_program(text).unwrap();
        let ids2: Vec<usize> =
            p2.class("A").unwrap().methods[0].body.iter().map(|s| s.id).collect();
        assert_eq!(ids, ids2);
    }

    #[test]
    fn reserved_special_keyword() {
        let err = parse_program("app class A { public void m() { special A.m(); } }").unwrap_err();
        assert!(err.iter().any(|d| d.message.contains("reserved")));
    }
}
