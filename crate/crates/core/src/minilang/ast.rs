use std::fmt;

use serde::{Deserialize, Serialize};

pub type NodeId = u32;

/// Source location of the first token of a node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeTag {
    Int,
    Bool,
    IntArray,
    Void,
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeTag::Int => "int",
            TypeTag::Bool => "bool",
            TypeTag::IntArray => "int[]",
            TypeTag::Void => "void",
        })
    }
}

/// Runtime and literal values. Serialized untagged, so the JSON form is
/// injective: numbers, booleans, arrays of numbers and `null` never collide.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Array(Vec<i64>),
    Void,
}

impl Value {
    pub fn type_tag(&self) -> TypeTag {
        match self {
            Value::Int(_) => TypeTag::Int,
            Value::Bool(_) => TypeTag::Bool,
            Value::Array(_) => TypeTag::IntArray,
            Value::Void => TypeTag::Void,
        }
    }

    pub fn default_for(ty: TypeTag) -> Value {
        match ty {
            TypeTag::Int => Value::Int(0),
            TypeTag::Bool => Value::Bool(false),
            TypeTag::IntArray => Value::Array(Vec::new()),
            TypeTag::Void => Value::Void,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Array(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Void => f.write_str("void"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Block,
    VarDecl,
    Assign,
    If,
    While,
    For,
    Return,
    Throw,
    ExprStmt,
    Output,
    Call,
    BinOp,
    UnOp,
    Index,
    Literal,
    VarRef,
}

impl NodeKind {
    /// Statement kinds that occupy a slot in a block. `Block` itself is a
    /// container and is not counted.
    pub fn is_statement(self) -> bool {
        matches!(
            self,
            NodeKind::VarDecl
                | NodeKind::Assign
                | NodeKind::If
                | NodeKind::While
                | NodeKind::For
                | NodeKind::Return
                | NodeKind::Throw
                | NodeKind::ExprStmt
                | NodeKind::Output
        )
    }

    pub fn is_expression(self) -> bool {
        matches!(
            self,
            NodeKind::Call
                | NodeKind::BinOp
                | NodeKind::UnOp
                | NodeKind::Index
                | NodeKind::Literal
                | NodeKind::VarRef
        )
    }

    pub fn is_loop(self) -> bool {
        matches!(self, NodeKind::While | NodeKind::For)
    }

    pub fn is_exit(self) -> bool {
        matches!(self, NodeKind::Return | NodeKind::Throw)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub const ARITHMETIC: [BinaryOp; 5] =
        [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Rem];
    pub const RELATIONAL: [BinaryOp; 6] = [
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
        BinaryOp::Eq,
        BinaryOp::Ne,
    ];
    pub const LOGICAL: [BinaryOp; 2] = [BinaryOp::And, BinaryOp::Or];

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        Self::ARITHMETIC.contains(&self)
    }

    pub fn is_relational(self) -> bool {
        Self::RELATIONAL.contains(&self)
    }

    pub fn is_logical(self) -> bool {
        Self::LOGICAL.contains(&self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Not => "!",
        }
    }
}

/// Payload carried by a node in addition to its kind.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    None,
    Ident(String),
    Decl(String, TypeTag),
    Binary(BinaryOp),
    Unary(UnaryOp),
    Lit(Value),
    Message(String),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::None => Ok(()),
            Token::Ident(name) => f.write_str(name),
            Token::Decl(name, ty) => write!(f, "{ty} {name}"),
            Token::Binary(op) => f.write_str(op.symbol()),
            Token::Unary(op) => f.write_str(op.symbol()),
            Token::Lit(v) => write!(f, "{v}"),
            Token::Message(m) => write!(f, "{m:?}"),
        }
    }
}

/// A node of the syntax tree. Child layout per kind:
///
/// - `Block`: statements
/// - `VarDecl`: `[init]`, token `Decl(name, type)`
/// - `Assign`: `[target, value]`, target is `VarRef` or `Index(VarRef, expr)`
/// - `If`: `[cond, then, else?]` with `Block` branches
/// - `While`: `[cond, body]`
/// - `For`: `[init, cond, update, body]`
/// - `Return`: `[value?]`; `Throw`: none, token `Message`
/// - `ExprStmt`: `[call]`; `Output`: `[value]`
/// - `Call`: arguments, token `Ident(callee)`
/// - `BinOp`: `[lhs, rhs]`; `UnOp`: `[operand]`; `Index`: `[array, index]`
/// - `Literal`, `VarRef`: leaves
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub token: Token,
    pub span: Span,
    pub children: Vec<AstNode>,
}

impl AstNode {
    pub fn new(kind: NodeKind, token: Token, span: Span, children: Vec<AstNode>) -> Self {
        AstNode { id: 0, kind, token, span, children }
    }

    /// Equality of kind, token and shape, ignoring ids and spans.
    pub fn same_shape(&self, other: &AstNode) -> bool {
        self.kind == other.kind
            && self.token == other.token
            && self.children.len() == other.children.len()
            && self.children.iter().zip(&other.children).all(|(a, b)| a.same_shape(b))
    }

    pub fn same_label(&self, other: &AstNode) -> bool {
        self.kind == other.kind && self.token == other.token
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(AstNode::size).sum::<usize>()
    }

    /// Preorder iterator over this node and all descendants.
    pub fn preorder(&self) -> Preorder<'_> {
        Preorder { stack: vec![self] }
    }

    pub fn find(&self, id: NodeId) -> Option<&AstNode> {
        self.preorder().find(|n| n.id == id)
    }

    pub fn find_mut(&mut self, id: NodeId) -> Option<&mut AstNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(id))
    }

    /// Largest node id in this subtree.
    pub fn last_id(&self) -> NodeId {
        self.children.last().map_or(self.id, AstNode::last_id)
    }

    pub fn name(&self) -> Option<&str> {
        match &self.token {
            Token::Ident(n) | Token::Decl(n, _) => Some(n),
            _ => None,
        }
    }

    /// Branch blocks of an `If`, loop bodies excluded.
    pub fn branches(&self) -> impl Iterator<Item = &AstNode> {
        let skip = if self.kind == NodeKind::If { 1 } else { self.children.len() };
        self.children.iter().skip(skip)
    }

    /// Whether the subtree contains a `Return` or `Throw`.
    pub fn contains_exit(&self) -> bool {
        self.preorder().any(|n| n.kind.is_exit())
    }

    /// Loop bodies and branch blocks directly owned by this statement.
    pub fn nested_blocks(&self) -> impl Iterator<Item = &AstNode> {
        self.children.iter().filter(|c| c.kind == NodeKind::Block)
    }
}

pub struct Preorder<'a> {
    stack: Vec<&'a AstNode>,
}

impl<'a> Iterator for Preorder<'a> {
    type Item = &'a AstNode;

    fn next(&mut self) -> Option<&'a AstNode> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: TypeTag,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: TypeTag,
    pub body: AstNode,
    pub span: Span,
}

impl FunctionDef {
    /// Number of statements in the body, counting each loop as a single
    /// statement and recursing into `if` branches.
    pub fn statement_count(&self) -> usize {
        fn count(block: &AstNode) -> usize {
            block
                .children
                .iter()
                .map(|stmt| {
                    if stmt.kind == NodeKind::If {
                        1 + stmt.branches().map(count).sum::<usize>()
                    } else {
                        1
                    }
                })
                .sum()
        }
        count(&self.body)
    }

    pub fn same_shape(&self, other: &FunctionDef) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.ret == other.ret
            && self.body.same_shape(&other.body)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalDecl {
    pub name: String,
    pub ty: TypeTag,
    pub init: Value,
    pub span: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub globals: Vec<GlobalDecl>,
    pub functions: Vec<FunctionDef>,
    pub entry: Option<String>,
}

impl SourceUnit {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut FunctionDef> {
        self.functions.iter_mut().find(|f| f.name == name)
    }

    /// Structural equality ignoring spans and node ids.
    pub fn same_shape(&self, other: &SourceUnit) -> bool {
        self.entry == other.entry
            && self.globals.len() == other.globals.len()
            && self
                .globals
                .iter()
                .zip(&other.globals)
                .all(|(a, b)| a.name == b.name && a.ty == b.ty && a.init == b.init)
            && self.functions.len() == other.functions.len()
            && self.functions.iter().zip(&other.functions).all(|(a, b)| a.same_shape(b))
    }

    /// Reassigns node ids in preorder, functions in declaration order.
    pub fn renumber(&mut self) {
        fn walk(node: &mut AstNode, next: &mut NodeId) {
            node.id = *next;
            *next += 1;
            for child in &mut node.children {
                walk(child, next);
            }
        }
        let mut next = 0;
        for f in &mut self.functions {
            walk(&mut f.body, &mut next);
        }
    }

    /// Finds the node with `id` and the function that owns it.
    pub fn locate(&self, id: NodeId) -> Option<(&FunctionDef, &AstNode)> {
        self.functions
            .iter()
            .find_map(|f| f.body.find(id).map(|n| (f, n)))
    }
}
