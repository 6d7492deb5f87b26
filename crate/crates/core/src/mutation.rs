//! First-order mutants and the strong-killability filter.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{fault_lines, statement_script};
use crate::inputgen::InputPool;
use crate::minilang::{pretty, validate, AstNode, BinaryOp, NodeId, NodeKind, SourceUnit, Span, Token, TypeInfo, TypeTag, UnaryOp, Value};
use crate::tracer::{execute_unit, ExecConfig, TracerError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    /// arithmetic operator replacement
    #[serde(rename = "AOR")]
    Aor,
    /// relational operator replacement
    #[serde(rename = "ROR")]
    Ror,
    /// logical operator replacement
    #[serde(rename = "LOR")]
    Lor,
    /// constant replacement
    #[serde(rename = "CRP")]
    Crp,
    /// negation of an int expression
    #[serde(rename = "UOI-")]
    NegInt,
    /// negation of a condition
    #[serde(rename = "UOI!")]
    NegBool,
    /// statement deletion
    #[serde(rename = "SDL")]
    Sdl,
}

impl Operator {
    pub fn id(self) -> &'static str {
        match self {
            Operator::Aor => "AOR",
            Operator::Ror => "ROR",
            Operator::Lor => "LOR",
            Operator::Crp => "CRP",
            Operator::NegInt => "UOI-",
            Operator::NegBool => "UOI!",
            Operator::Sdl => "SDL",
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locus {
    /// Node id in the parent unit.
    pub node: NodeId,
    pub span: Span,
    /// Line of the enclosing statement, for coverage checks.
    pub line: u32,
}

#[derive(Clone, Debug)]
pub struct Mutant {
    pub id: usize,
    pub operator: Operator,
    pub locus: Locus,
    pub description: String,
    pub function: String,
    pub mutated_unit: SourceUnit,
    pub parent_unit: Arc<SourceUnit>,
}

/// Manifest line for a written mutant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MutantInfo {
    pub id: usize,
    pub operator_id: Operator,
    pub locus: Locus,
    pub description: String,
    pub function: String,
}

impl Mutant {
    pub fn info(&self) -> MutantInfo {
        MutantInfo {
            id: self.id,
            operator_id: self.operator,
            locus: self.locus,
            description: self.description.clone(),
            function: self.function.clone(),
        }
    }

    /// Lines the mutation touches, as seen from the mutated unit.
    pub fn fault_lines(&self) -> Vec<u32> {
        let m = self.mutated_unit.function(&self.function).expect("mutated function");
        let p = self.parent_unit.function(&self.function).expect("parent function");
        fault_lines(&statement_script(m, p), m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KillabilityResult {
    pub killed: bool,
    pub killing_inputs: Vec<usize>,
    pub executions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{0}` has fewer than two statements")]
    TooFewStatements(String),
    #[error("no pool input covers the mutated lines {0:?}")]
    NoCoveringInput(Vec<u32>),
    #[error(transparent)]
    Tracer(#[from] TracerError),
}

enum Edit {
    Token(Token),
    Wrap(UnaryOp),
    Delete,
}

struct Candidate {
    operator: Operator,
    node: NodeId,
    span: Span,
    line: u32,
    edit: Edit,
    description: String,
}

#[derive(Clone, Copy, Default)]
struct Ctx {
    lvalue: bool,
    under_neg: bool,
    under_not: bool,
}

/// All valid first-order mutants of `fn_name`, in preorder of their loci.
pub fn generate_mutants(unit: &SourceUnit, fn_name: &str) -> Result<Vec<Mutant>, MutationError> {
    let f = unit.function(fn_name).ok_or_else(|| MutationError::UnknownFunction(fn_name.to_string()))?;
    if f.statement_count() < 2 {
        return Err(MutationError::TooFewStatements(fn_name.to_string()));
    }
    let types = validate(unit).expect("parent unit is valid");
    let mut cands = Vec::new();
    visit_block(&f.body, &types, &mut cands);

    let parent = Arc::new(unit.clone());
    let mut out = Vec::new();
    for c in cands {
        let mut m = unit.clone();
        let func = m.function_mut(fn_name).expect("function present");
        apply(&mut func.body, c.node, &c.edit);
        m.renumber();
        if validate(&m).is_err() || m.same_shape(unit) {
            continue;
        }
        out.push(Mutant {
            id: out.len(),
            operator: c.operator,
            locus: Locus { node: c.node, span: c.span, line: c.line },
            description: c.description,
            function: fn_name.to_string(),
            mutated_unit: m,
            parent_unit: Arc::clone(&parent),
        });
    }
    Ok(out)
}

fn visit_block(block: &AstNode, types: &TypeInfo, out: &mut Vec<Candidate>) {
    for stmt in &block.children {
        if !matches!(stmt.kind, NodeKind::Return | NodeKind::VarDecl) {
            out.push(Candidate {
                operator: Operator::Sdl,
                node: stmt.id,
                span: stmt.span,
                line: stmt.span.line,
                edit: Edit::Delete,
                description: format!("delete `{}`", pretty::header(stmt)),
            });
        }
        visit_stmt(stmt, stmt.span.line, types, out);
    }
}

fn visit_stmt(stmt: &AstNode, line: u32, types: &TypeInfo, out: &mut Vec<Candidate>) {
    for (i, c) in stmt.children.iter().enumerate() {
        if c.kind == NodeKind::Block {
            visit_block(c, types, out);
        } else if c.kind.is_statement() {
            // for-loop init and update
            visit_stmt(c, line, types, out);
        } else {
            let lvalue = stmt.kind == NodeKind::Assign && i == 0;
            visit_expr(c, Ctx { lvalue, ..Ctx::default() }, line, types, out);
        }
    }
}

fn visit_expr(e: &AstNode, ctx: Ctx, line: u32, types: &TypeInfo, out: &mut Vec<Candidate>) {
    let text = pretty::expr(e);
    let mut push = |operator, edit, description| out.push(Candidate { operator, node: e.id, span: e.span, line, edit, description });

    match (&e.kind, &e.token) {
        (NodeKind::BinOp, Token::Binary(op)) => {
            let (family, operator): (&[BinaryOp], Operator) = if op.is_arithmetic() {
                (&BinaryOp::ARITHMETIC, Operator::Aor)
            } else if op.is_relational() {
                (&BinaryOp::RELATIONAL, Operator::Ror)
            } else {
                (&BinaryOp::LOGICAL, Operator::Lor)
            };
            for alt in family.iter().filter(|a| *a != op) {
                push(operator, Edit::Token(Token::Binary(*alt)), format!("`{}` -> `{}` in `{text}`", op.symbol(), alt.symbol()));
            }
        }
        (NodeKind::Literal, Token::Lit(Value::Int(c))) => {
            let mut seen = HashSet::from([*c]);
            for alt in [0, 1, c.wrapping_neg(), c.wrapping_add(1)] {
                if seen.insert(alt) {
                    push(Operator::Crp, Edit::Token(Token::Lit(Value::Int(alt))), format!("`{c}` -> `{alt}`"));
                }
            }
        }
        _ => {}
    }

    let ty = types.type_of(e.id);
    let is_lit = e.kind == NodeKind::Literal;
    let is_neg = e.token == Token::Unary(UnaryOp::Neg);
    let is_not = e.token == Token::Unary(UnaryOp::Not);
    if ty == Some(TypeTag::Int) && !is_lit && !ctx.lvalue && !ctx.under_neg && !is_neg {
        push(Operator::NegInt, Edit::Wrap(UnaryOp::Neg), format!("`{text}` -> `-({text})`"));
    }
    if ty == Some(TypeTag::Bool) && !is_lit && !ctx.under_not && !is_not {
        push(Operator::NegBool, Edit::Wrap(UnaryOp::Not), format!("`{text}` -> `!({text})`"));
    }

    for (i, c) in e.children.iter().enumerate() {
        let child = Ctx {
            // base of an indexed assignment target
            lvalue: ctx.lvalue && e.kind == NodeKind::Index && i == 0,
            under_neg: is_neg,
            under_not: is_not,
        };
        visit_expr(c, child, line, types, out);
    }
}

fn apply(body: &mut AstNode, id: NodeId, edit: &Edit) {
    match edit {
        Edit::Token(t) => body.find_mut(id).expect("locus").token = t.clone(),
        Edit::Wrap(op) => {
            let node = body.find_mut(id).expect("locus");
            let inner = std::mem::replace(node, AstNode::new(NodeKind::UnOp, Token::Unary(*op), Span::default(), Vec::new()));
            node.span = inner.span;
            node.children.push(inner);
        }
        Edit::Delete => {
            fn remove(n: &mut AstNode, id: NodeId) -> bool {
                if let Some(k) = n.children.iter().position(|c| c.id == id) {
                    n.children.remove(k);
                    return true;
                }
                n.children.iter_mut().any(|c| remove(c, id))
            }
            remove(body, id);
        }
    }
}

/// Runs mutant and parent on every pool input; killed iff some ext differs.
/// The mutation counts as covered when the mutant reaches one of its fault
/// lines or the parent reaches the mutated statement.
pub fn strong_kill_filter(mutant: &Mutant, pool: &InputPool, config: &ExecConfig) -> Result<KillabilityResult, MutationError> {
    let lines = mutant.fault_lines();
    let mut covered = false;
    let mut killing = Vec::new();
    for entry in &pool.inputs {
        let m = execute_unit(&mutant.mutated_unit, &mutant.function, &entry.input, &[], config)?;
        let p = execute_unit(&mutant.parent_unit, &mutant.function, &entry.input, &[], config)?;
        covered |= lines.iter().any(|l| m.coverage.contains(l)) || p.coverage.contains(&mutant.locus.line);
        if m.ext != p.ext {
            killing.push(entry.id);
        }
    }
    if !covered {
        return Err(MutationError::NoCoveringInput(lines));
    }
    Ok(KillabilityResult { killed: !killing.is_empty(), killing_inputs: killing, executions: pool.inputs.len() })
}

/// Statement-count bins used to pick representative functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LocBin {
    #[serde(rename = "2-25")]
    Tiny,
    #[serde(rename = "26-50")]
    Small,
    #[serde(rename = "51-100")]
    Medium,
    #[serde(rename = "101-200")]
    Large,
    #[serde(rename = ">200")]
    Huge,
}

pub fn loc_bin(statements: usize) -> Option<LocBin> {
    match statements {
        0 | 1 => None,
        2..=25 => Some(LocBin::Tiny),
        26..=50 => Some(LocBin::Small),
        51..=100 => Some(LocBin::Medium),
        101..=200 => Some(LocBin::Large),
        _ => Some(LocBin::Huge),
    }
}

/// One index per (project, bin), drawn uniformly with a seeded stream.
/// `items` are (project, statement count) pairs; the result is sorted.
pub fn stratified_sample(items: &[(String, usize)], seed: u64) -> Vec<usize> {
    let mut strata: BTreeMap<(&str, LocBin), Vec<usize>> = BTreeMap::new();
    for (i, (project, stmts)) in items.iter().enumerate() {
        if let Some(bin) = loc_bin(*stmts) {
            strata.entry((project, bin)).or_default().push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = strata.values().map(|ix| ix[rng.gen_range(0..ix.len())]).collect();
    picked.sort_unstable();
    picked
}
