//! Canonical pretty-printer. `parse(pretty(p))` is structurally identical to
//! `p`, and `pretty` is idempotent over a parse/print cycle.

use super::*;
use std::fmt::Write;

pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    let mut first = true;
    for c in program.classes().filter(|c| !c.is_builtin) {
        if !first {
            out.push('\n');
        }
        first = false;
        class(&mut out, c);
    }
    for i in program.interfaces() {
        if !first {
            out.push('\n');
        }
        first = false;
        interface(&mut out, i);
    }
    out
}

fn class(out: &mut String, c: &ClassDef) {
    let _ = write!(out, "{} ", c.origin);
    if c.is_final {
        out.push_str("final ");
    }
    let _ = write!(out, "class {}", c.name);
    if let Some(sup) = &c.superclass {
        let _ = write!(out, " extends {sup}");
    }
    if !c.interfaces.is_empty() {
        let _ = write!(out, " implements {}", c.interfaces.join(", "));
    }
    out.push_str(" {\n");
    for f in &c.fields {
        let _ = write!(out, "    {} ", f.visibility);
        if f.is_static {
            out.push_str("static ");
        }
        if f.is_final {
            out.push_str("final ");
        }
        let _ = writeln!(out, "{} {};", f.ty, f.name);
    }
    for (k, m) in c.methods.iter().enumerate() {
        if !c.fields.is_empty() || k > 0 {
            out.push('\n');
        }
        method(out, m);
    }
    out.push_str("}\n");
}

fn interface(out: &mut String, i: &InterfaceDef) {
    let _ = writeln!(out, "{} interface {} {{", i.origin, i.name);
    for (sig, ret, _) in &i.methods {
        let _ = write!(out, "    {ret} {}(", sig.name);
        for (k, t) in sig.params.iter().enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{t} p{k}");
        }
        out.push_str(");\n");
    }
    out.push_str("}\n");
}

fn method(out: &mut String, m: &MethodDef) {
    out.push_str("    ");
    if m.is_api {
        out.push_str("api ");
    }
    let _ = write!(out, "{} ", m.visibility);
    if m.is_static {
        out.push_str("static ");
    }
    if m.is_final {
        out.push_str("final ");
    }
    let _ = write!(out, "{} {}(", m.ret, m.name);
    for (k, p) in m.params.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{} {}", p.ty, p.name);
    }
    out.push_str(") {\n");
    for l in &m.locals {
        let _ = writeln!(out, "        {} {};", l.ty, l.name);
    }
    for s in &m.body {
        for label in &s.labels {
            let _ = writeln!(out, "    {label}:");
        }
        let _ = writeln!(out, "        {};", stmt_text(&s.kind));
    }
    out.push_str("    }\n");
}

/// Single-line rendering of a statement without the trailing semicolon; also
/// used for DOT node labels.
pub fn stmt_text(kind: &StmtKind) -> String {
    match kind {
        StmtKind::AssignLocal { dst, src } => format!("{dst} = {src}"),
        StmtKind::BinaryOp { dst, op, lhs, rhs } => format!("{dst} = {lhs} {op} {rhs}"),
        StmtKind::FieldLoad { dst, base, field } => format!("{dst} = {base}.{field}"),
        StmtKind::FieldStore { base, field, value } => format!("{base}.{field} = {value}"),
        StmtKind::StaticLoad { dst, class, field } => format!("{dst} = static {class}.{field}"),
        StmtKind::StaticStore { class, field, value } => format!("static {class}.{field} = {value}"),
        StmtKind::New { dst, class } => format!("{dst} = new {class}"),
        StmtKind::VirtualCall { dst, base, method, args } => {
            let args = args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
            match dst {
                Some(d) => format!("{d} = virtual {base}.{method}({args})"),
                None => format!("virtual {base}.{method}({args})"),
            }
        }
        StmtKind::StaticCall { dst, class, method, args } => {
            let args = args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
            match dst {
                Some(d) => format!("{d} = static {class}.{method}({args})"),
                None => format!("static {class}.{method}({args})"),
            }
        }
        StmtKind::IfGoto { lhs, op, rhs, target } => format!("if {lhs} {op} {rhs} goto {target}"),
        StmtKind::Goto { target } => format!("goto {target}"),
        StmtKind::Return { value } => match value {
            Some(v) => format!("return {v}"),
            None => "return".to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use crate::ir::parse_program;

    #[test]
    fn roundtrip_is_stable() {
        let text = r#"
framework class Global {
    public static bool started;
    public static void init() {
        return;
    }
}
framework class Service extends Object {
    public void onCreate() {
        int x;
        x = 1;
        x = x + 2;
      Lend:
        return;
    }
}
framework interface Watcher {
    void onChanged(int v);
}
"#;
        let p1 = parse_program(text).unwrap();
        let printed = p1.pretty();
        let p2 = parse_program(&printed).unwrap();
        assert_eq!(printed, p2.pretty(), "pretty is a fixpoint after one parse");
    }
}
