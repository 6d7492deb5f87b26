use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

/// Canonical source layout. `parse(pretty(u))` is structurally equal to `u`.
pub fn pretty(unit: &SourceUnit) -> String {
    let mut sections = Vec::new();
    if !unit.globals.is_empty() {
        let mut s = String::new();
        for g in &unit.globals {
            let _ = writeln!(s, "global {} {} = {};", g.ty, g.name, g.init);
        }
        sections.push(s);
    }
    if let Some(entry) = &unit.entry {
        sections.push(format!("entry {entry};\n"));
    }
    for f in &unit.functions {
        sections.push(function(f));
    }
    sections.join("\n")
}

pub fn function(f: &FunctionDef) -> String {
    let params: Vec<String> = f.params.iter().map(|p| format!("{}:{}", p.name, p.ty)).collect();
    let mut out = format!("fn {}({})->{} ", f.name, params.join(", "), f.ret);
    block(&f.body, 0, &mut out);
    out.push('\n');
    out
}

fn block(node: &AstNode, depth: usize, out: &mut String) {
    if node.children.is_empty() {
        out.push_str("{ }");
        return;
    }
    out.push_str("{\n");
    for stmt in &node.children {
        statement(stmt, depth + 1, out);
    }
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}

fn statement(stmt: &AstNode, depth: usize, out: &mut String) {
    out.push_str(&INDENT.repeat(depth));
    match stmt.kind {
        NodeKind::If => if_chain(stmt, depth, out),
        NodeKind::While => {
            let _ = write!(out, "while ({}) ", expr(&stmt.children[0]));
            block(&stmt.children[1], depth, out);
        }
        NodeKind::For => {
            out.push_str(&header(stmt));
            out.push(' ');
            block(&stmt.children[3], depth, out);
        }
        _ => out.push_str(&simple(stmt)),
    }
    out.push('\n');
}

fn if_chain(stmt: &AstNode, depth: usize, out: &mut String) {
    let _ = write!(out, "if ({}) ", expr(&stmt.children[0]));
    block(&stmt.children[1], depth, out);
    if let Some(els) = stmt.children.get(2) {
        out.push_str(" else ");
        match els.children.as_slice() {
            [only] if only.kind == NodeKind::If => if_chain(only, depth, out),
            _ => block(els, depth, out),
        }
    }
}

/// One-line rendering of a simple statement, with trailing `;`.
fn simple(stmt: &AstNode) -> String {
    match stmt.kind {
        NodeKind::Return if stmt.children.is_empty() => "return;".to_string(),
        NodeKind::Return => format!("return {};", expr(&stmt.children[0])),
        NodeKind::Throw => match &stmt.token {
            Token::Message(m) => format!("throw {};", quote(m)),
            _ => "throw \"\";".to_string(),
        },
        NodeKind::ExprStmt => format!("{};", expr(&stmt.children[0])),
        NodeKind::Output => format!("output({});", expr(&stmt.children[0])),
        _ => format!("{};", clause(stmt)),
    }
}

/// Declaration or assignment without the trailing `;` (also used in `for` headers).
fn clause(stmt: &AstNode) -> String {
    match (&stmt.kind, &stmt.token) {
        (NodeKind::VarDecl, Token::Decl(name, ty)) => format!("{ty} {name} = {}", expr(&stmt.children[0])),
        (NodeKind::Assign, _) => format!("{} = {}", expr(&stmt.children[0]), expr(&stmt.children[1])),
        _ => String::new(),
    }
}

/// Single-line summary of a statement: full text for simple statements,
/// the header for compound ones.
pub fn header(stmt: &AstNode) -> String {
    match stmt.kind {
        NodeKind::If => format!("if ({})", expr(&stmt.children[0])),
        NodeKind::While => format!("while ({})", expr(&stmt.children[0])),
        NodeKind::For => format!(
            "for ({}; {}; {})",
            clause(&stmt.children[0]),
            expr(&stmt.children[1]),
            clause(&stmt.children[2])
        ),
        NodeKind::Block => "{ ... }".to_string(),
        k if k.is_statement() => simple(stmt),
        _ => expr(stmt),
    }
}

fn quote(msg: &str) -> String {
    let mut s = String::from("\"");
    for c in msg.chars() {
        match c {
            '"' => s.push_str("\\\""),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            c => s.push(c),
        }
    }
    s.push('"');
    s
}

pub fn expr(node: &AstNode) -> String {
    match (&node.kind, &node.token) {
        (NodeKind::Literal, Token::Lit(v)) => v.to_string(),
        (NodeKind::VarRef, Token::Ident(name)) => name.clone(),
        (NodeKind::Call, Token::Ident(name)) => {
            let args: Vec<String> = node.children.iter().map(expr).collect();
            format!("{name}({})", args.join(", "))
        }
        (NodeKind::Index, _) => {
            let base = &node.children[0];
            let base_text = if matches!(base.kind, NodeKind::VarRef | NodeKind::Call | NodeKind::Index) {
                expr(base)
            } else {
                format!("({})", expr(base))
            };
            format!("{base_text}[{}]", expr(&node.children[1]))
        }
        (NodeKind::UnOp, Token::Unary(op)) => {
            let operand = &node.children[0];
            let bare = matches!(operand.kind, NodeKind::VarRef | NodeKind::Call | NodeKind::Index)
                || (operand.kind == NodeKind::Literal && matches!(operand.token, Token::Lit(Value::Bool(_))));
            if bare {
                format!("{}{}", op.symbol(), expr(operand))
            } else {
                format!("{}({})", op.symbol(), expr(operand))
            }
        }
        (NodeKind::BinOp, Token::Binary(op)) => {
            let prec = op.precedence();
            let side = |child: &AstNode, strict: bool| {
                let text = expr(child);
                match child.token {
                    Token::Binary(inner) if inner.precedence() < prec || (strict && inner.precedence() == prec) => {
                        format!("({text})")
                    }
                    _ => text,
                }
            };
            format!("{} {} {}", side(&node.children[0], false), op.symbol(), side(&node.children[1], true))
        }
        _ => format!("<{:?}>", node.kind),
    }
}
