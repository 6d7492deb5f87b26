use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::FrontendError;

/// Built-in functions: `len(int[]) -> int` and `array(int) -> int[]`.
pub const BUILTINS: [&str; 2] = ["len", "array"];

/// Static types of every expression node, keyed by node id.
#[derive(Clone, Debug, Default)]
pub struct TypeInfo {
    pub expr_types: HashMap<NodeId, TypeTag>,
}

impl TypeInfo {
    pub fn type_of(&self, id: NodeId) -> Option<TypeTag> {
        self.expr_types.get(&id).copied()
    }
}

pub fn validate(unit: &SourceUnit) -> Result<TypeInfo, FrontendError> {
    let mut signatures: HashMap<&str, (&[Param], TypeTag)> = HashMap::new();
    for f in &unit.functions {
        if BUILTINS.contains(&f.name.as_str()) {
            return type_error(f.span, format!("`{}` is a reserved builtin name", f.name));
        }
        if signatures.insert(&f.name, (&f.params, f.ret)).is_some() {
            return type_error(f.span, format!("duplicate function `{}`", f.name));
        }
    }

    let mut globals: HashMap<&str, TypeTag> = HashMap::new();
    for g in &unit.globals {
        if g.ty == TypeTag::Void {
            return type_error(g.span, format!("global `{}` cannot be void", g.name));
        }
        if g.init.type_tag() != g.ty {
            return type_error(
                g.span,
                format!("global `{}` declared {} but initialised with {}", g.name, g.ty, g.init.type_tag()),
            );
        }
        if globals.insert(&g.name, g.ty).is_some() {
            return type_error(g.span, format!("duplicate global `{}`", g.name));
        }
    }

    if let Some(entry) = &unit.entry {
        if !signatures.contains_key(entry.as_str()) {
            return type_error(Span::default(), format!("entry function `{entry}` is not defined"));
        }
    }

    let mut info = TypeInfo::default();
    for f in &unit.functions {
        let mut checker = Checker {
            signatures: &signatures,
            globals: &globals,
            scopes: vec![HashMap::new()],
            ret: f.ret,
            info: &mut info,
        };
        let mut seen = HashSet::new();
        for p in &f.params {
            if p.ty == TypeTag::Void {
                return type_error(f.span, format!("parameter `{}` cannot be void", p.name));
            }
            if !seen.insert(p.name.as_str()) {
                return type_error(f.span, format!("duplicate parameter `{}`", p.name));
            }
            checker.declare(&p.name, p.ty, f.span)?;
        }
        let terminates = checker.block(&f.body)?;
        if f.ret != TypeTag::Void && !terminates {
            return type_error(
                f.span,
                format!("function `{}` may finish without returning a {}", f.name, f.ret),
            );
        }
    }
    Ok(info)
}

fn type_error<T>(span: Span, msg: String) -> Result<T, FrontendError> {
    Err(FrontendError::Type { line: span.line, col: span.col, msg })
}

struct Checker<'a, 'u> {
    signatures: &'a HashMap<&'u str, (&'u [Param], TypeTag)>,
    globals: &'a HashMap<&'u str, TypeTag>,
    scopes: Vec<HashMap<String, TypeTag>>,
    ret: TypeTag,
    info: &'a mut TypeInfo,
}

impl Checker<'_, '_> {
    fn lookup(&self, name: &str) -> Option<TypeTag> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name).copied())
            .or_else(|| self.globals.get(name).copied())
    }

    // Shadowing is rejected so that a name identifies one binding in a snapshot.
    fn declare(&mut self, name: &str, ty: TypeTag, span: Span) -> Result<(), FrontendError> {
        if self.lookup(name).is_some() {
            return type_error(span, format!("`{name}` is already declared in this scope"));
        }
        self.scopes.last_mut().expect("scope").insert(name.to_string(), ty);
        Ok(())
    }

    /// Returns whether every path through the block ends in return/throw.
    fn block(&mut self, block: &AstNode) -> Result<bool, FrontendError> {
        self.scopes.push(HashMap::new());
        let mut terminates = false;
        for stmt in &block.children {
            terminates |= self.statement(stmt)?;
        }
        self.scopes.pop();
        Ok(terminates)
    }

    fn expect_type(&mut self, node: &AstNode, want: TypeTag, what: &str) -> Result<(), FrontendError> {
        let got = self.expr(node)?;
        if got != want {
            return type_error(node.span, format!("{what} must be {want}, found {got}"));
        }
        Ok(())
    }

    fn statement(&mut self, stmt: &AstNode) -> Result<bool, FrontendError> {
        match stmt.kind {
            NodeKind::VarDecl => {
                let Token::Decl(name, ty) = &stmt.token else {
                    return type_error(stmt.span, "malformed declaration".into());
                };
                if *ty == TypeTag::Void {
                    return type_error(stmt.span, format!("variable `{name}` cannot be void"));
                }
                self.expect_type(&stmt.children[0], *ty, "initializer")?;
                self.declare(name, *ty, stmt.span)?;
                Ok(false)
            }
            NodeKind::Assign => {
                let target = &stmt.children[0];
                let target_ty = match target.kind {
                    NodeKind::VarRef => self.expr(target)?,
                    NodeKind::Index if target.children[0].kind == NodeKind::VarRef => self.expr(target)?,
                    _ => return type_error(target.span, "invalid assignment target".into()),
                };
                self.expect_type(&stmt.children[1], target_ty, "assigned value")?;
                Ok(false)
            }
            NodeKind::If => {
                self.expect_type(&stmt.children[0], TypeTag::Bool, "condition")?;
                let then_ends = self.block(&stmt.children[1])?;
                let else_ends = match stmt.children.get(2) {
                    Some(b) => self.block(b)?,
                    None => false,
                };
                Ok(then_ends && else_ends)
            }
            NodeKind::While => {
                self.expect_type(&stmt.children[0], TypeTag::Bool, "loop condition")?;
                self.block(&stmt.children[1])?;
                Ok(false)
            }
            NodeKind::For => {
                self.scopes.push(HashMap::new());
                let init = &stmt.children[0];
                if !matches!(init.kind, NodeKind::VarDecl | NodeKind::Assign) {
                    return type_error(init.span, "for-loop initializer must be a declaration or assignment".into());
                }
                self.statement(init)?;
                self.expect_type(&stmt.children[1], TypeTag::Bool, "loop condition")?;
                let update = &stmt.children[2];
                if update.kind != NodeKind::Assign {
                    return type_error(update.span, "for-loop update must be an assignment".into());
                }
                self.statement(update)?;
                self.block(&stmt.children[3])?;
                self.scopes.pop();
                Ok(false)
            }
            NodeKind::Return => {
                match (stmt.children.first(), self.ret) {
                    (None, TypeTag::Void) => {}
                    (None, ty) => return type_error(stmt.span, format!("missing return value of type {ty}")),
                    (Some(_), TypeTag::Void) => {
                        return type_error(stmt.span, "void function cannot return a value".into())
                    }
                    (Some(value), ty) => self.expect_type(value, ty, "return value")?,
                }
                Ok(true)
            }
            NodeKind::Throw => Ok(true),
            NodeKind::ExprStmt => {
                let call = &stmt.children[0];
                if call.kind != NodeKind::Call {
                    return type_error(stmt.span, "only calls may be used as statements".into());
                }
                self.call(call, true)?;
                Ok(false)
            }
            NodeKind::Output => {
                let ty = self.expr(&stmt.children[0])?;
                if ty == TypeTag::Void {
                    return type_error(stmt.span, "cannot output a void value".into());
                }
                Ok(false)
            }
            other => type_error(stmt.span, format!("{other:?} is not a statement")),
        }
    }

    fn call(&mut self, call: &AstNode, as_statement: bool) -> Result<TypeTag, FrontendError> {
        let name = call.name().unwrap_or_default();
        let ty = match name {
            "len" => {
                self.builtin_arity(call, 1)?;
                self.expect_type(&call.children[0], TypeTag::IntArray, "argument of `len`")?;
                TypeTag::Int
            }
            "array" => {
                self.builtin_arity(call, 1)?;
                self.expect_type(&call.children[0], TypeTag::Int, "argument of `array`")?;
                TypeTag::IntArray
            }
            _ => {
                let Some(&(params, ret)) = self.signatures.get(name) else {
                    return type_error(call.span, format!("call to undefined function `{name}`"));
                };
                if params.len() != call.children.len() {
                    return type_error(
                        call.span,
                        format!("`{name}` expects {} arguments, found {}", params.len(), call.children.len()),
                    );
                }
                for (arg, p) in call.children.iter().zip(params) {
                    self.expect_type(arg, p.ty, &format!("argument `{}`", p.name))?;
                }
                ret
            }
        };
        if ty == TypeTag::Void && !as_statement {
            return type_error(call.span, format!("void function `{name}` used as a value"));
        }
        self.info.expr_types.insert(call.id, ty);
        Ok(ty)
    }

    fn builtin_arity(&self, call: &AstNode, n: usize) -> Result<(), FrontendError> {
        if call.children.len() != n {
            return type_error(call.span, format!("builtin expects {n} argument(s)"));
        }
        Ok(())
    }

    fn expr(&mut self, node: &AstNode) -> Result<TypeTag, FrontendError> {
        let ty = match node.kind {
            NodeKind::Literal => match &node.token {
                Token::Lit(v) => v.type_tag(),
                _ => return type_error(node.span, "malformed literal".into()),
            },
            NodeKind::VarRef => {
                let name = node.name().unwrap_or_default();
                match self.lookup(name) {
                    Some(ty) => ty,
                    None => return type_error(node.span, format!("undeclared variable `{name}`")),
                }
            }
            NodeKind::Index => {
                self.expect_type(&node.children[0], TypeTag::IntArray, "indexed value")?;
                self.expect_type(&node.children[1], TypeTag::Int, "index")?;
                TypeTag::Int
            }
            NodeKind::UnOp => match node.token {
                Token::Unary(UnaryOp::Neg) => {
                    self.expect_type(&node.children[0], TypeTag::Int, "operand of `-`")?;
                    TypeTag::Int
                }
                _ => {
                    self.expect_type(&node.children[0], TypeTag::Bool, "operand of `!`")?;
                    TypeTag::Bool
                }
            },
            NodeKind::BinOp => {
                let Token::Binary(op) = node.token else {
                    return type_error(node.span, "malformed operator".into());
                };
                if op.is_arithmetic() || op.is_relational() && !matches!(op, BinaryOp::Eq | BinaryOp::Ne) {
                    self.expect_type(&node.children[0], TypeTag::Int, &format!("left operand of `{}`", op.symbol()))?;
                    self.expect_type(&node.children[1], TypeTag::Int, &format!("right operand of `{}`", op.symbol()))?;
                    if op.is_arithmetic() { TypeTag::Int } else { TypeTag::Bool }
                } else if op.is_logical() {
                    self.expect_type(&node.children[0], TypeTag::Bool, &format!("left operand of `{}`", op.symbol()))?;
                    self.expect_type(&node.children[1], TypeTag::Bool, &format!("right operand of `{}`", op.symbol()))?;
                    TypeTag::Bool
                } else {
                    let lhs = self.expr(&node.children[0])?;
                    let rhs = self.expr(&node.children[1])?;
                    if lhs != rhs {
                        return type_error(node.span, format!("cannot compare {lhs} with {rhs}"));
                    }
                    TypeTag::Bool
                }
            }
            NodeKind::Call => return self.call(node, false),
            other => return type_error(node.span, format!("{other:?} is not an expression")),
        };
        self.info.expr_types.insert(node.id, ty);
        Ok(ty)
    }
}
