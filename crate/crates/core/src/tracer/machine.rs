use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::{ErrorKind, ExecutionOutcome, InputVector, StateSnapshot, Status, TracerError};
use crate::instrument::{Anchor, ProgramPoint};
use crate::minilang::{AstNode, BinaryOp, FunctionDef, NodeKind, SourceUnit, Token, UnaryOp, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ExecConfig {
    /// Statements, loop tests and calls allowed per run.
    pub step_budget: u64,
    pub max_depth: usize,
    pub max_array_len: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig { step_budget: 1_000_000, max_depth: 64, max_array_len: 1 << 20 }
    }
}

struct Fault {
    kind: ErrorKind,
    message: String,
}

impl Fault {
    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Fault { kind, message: message.into() }
    }
}

enum Flow {
    Normal,
    Return(Value),
}

type Exec<T> = Result<T, Fault>;

struct Frame {
    scopes: Vec<Vec<(String, Value)>>,
    /// (record slot, snapshots) when this frame is a traced invocation
    trace: Option<(usize, Vec<StateSnapshot>)>,
}

pub(super) struct Machine<'u> {
    funcs: HashMap<&'u str, &'u FunctionDef>,
    globals: BTreeMap<String, Value>,
    cfg: ExecConfig,
    steps: u64,
    depth: usize,
    coverage: BTreeSet<u32>,
    out: Vec<Value>,
    target: Option<&'u str>,
    anchors: HashMap<Anchor, usize>,
    records: Vec<Option<ExecutionOutcome>>,
    result: Option<Exec<Value>>,
}

#[derive(Serialize)]
struct NormalExt<'a> {
    globals: &'a BTreeMap<String, Value>,
    out: &'a [Value],
    #[serde(rename = "return")]
    ret: &'a Value,
}

#[derive(Serialize)]
struct ErrorExt {
    error: ErrorKind,
}

fn ext_of(result: &Exec<Value>, globals: &BTreeMap<String, Value>, out: &[Value]) -> (String, Status) {
    match result {
        Ok(ret) => (serde_json::to_string(&NormalExt { globals, out, ret }).expect("ext serializes"), Status::Normal),
        Err(f) => (
            serde_json::to_string(&ErrorExt { error: f.kind }).expect("ext serializes"),
            Status::Error { kind: f.kind, message: f.message.clone() },
        ),
    }
}

impl<'u> Machine<'u> {
    pub(super) fn new(
        unit: &'u SourceUnit,
        input: &InputVector,
        probe: Option<(&'u str, &[ProgramPoint])>,
        cfg: &ExecConfig,
    ) -> Result<Self, TracerError> {
        let mut globals: BTreeMap<String, Value> = unit.globals.iter().map(|g| (g.name.clone(), g.init.clone())).collect();
        for (name, v) in &input.globals_init {
            let g = unit
                .globals
                .iter()
                .find(|g| &g.name == name)
                .ok_or_else(|| TracerError::BadInput(format!("unknown global `{name}`")))?;
            if g.ty != v.type_tag() {
                return Err(TracerError::BadInput(format!("global `{name}` expects {}, got {v}", g.ty)));
            }
            globals.insert(name.clone(), v.clone());
        }
        let (target, anchors) = match probe {
            Some((name, points)) => {
                if unit.function(name).is_none() {
                    return Err(TracerError::UnknownFunction(name.to_string()));
                }
                (Some(name), points.iter().map(|p| (p.anchor, p.pp_index)).collect())
            }
            None => (None, HashMap::new()),
        };
        Ok(Machine {
            funcs: unit.functions.iter().map(|f| (f.name.as_str(), f)).collect(),
            globals,
            cfg: cfg.clone(),
            steps: 0,
            depth: 0,
            coverage: BTreeSet::new(),
            out: Vec::new(),
            target,
            anchors,
            records: Vec::new(),
            result: None,
        })
    }

    pub(super) fn run(&mut self, name: &str, args: Vec<Value>) {
        let r = self.call(name, args);
        self.result = Some(r);
    }

    /// System outcome and per-invocation outcomes of the target, in call order.
    pub(super) fn finish(self) -> (ExecutionOutcome, Vec<ExecutionOutcome>) {
        let result = self.result.unwrap_or(Ok(Value::Void));
        let (ext, status) = ext_of(&result, &self.globals, &self.out);
        let system = ExecutionOutcome { trace: Vec::new(), ext, out: self.out, coverage: self.coverage, status };
        let invocations = self.records.into_iter().map(|r| r.expect("invocation finished")).collect();
        (system, invocations)
    }

    fn step(&mut self) -> Exec<()> {
        self.steps += 1;
        if self.steps > self.cfg.step_budget {
            return Err(Fault::new(ErrorKind::Budget, format!("step budget of {} exceeded", self.cfg.step_budget)));
        }
        Ok(())
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> Exec<Value> {
        self.step()?;
        let f = *self.funcs.get(name).expect("validated call target");
        if self.depth >= self.cfg.max_depth {
            return Err(Fault::new(ErrorKind::StackOverflow, format!("call depth {} exceeded", self.cfg.max_depth)));
        }
        let params = f.params.iter().map(|p| p.name.clone()).zip(args).collect();
        let mut frame = Frame { scopes: vec![params], trace: None };
        let traced = self.target == Some(name);
        let out_start = self.out.len();
        if traced {
            frame.trace = Some((self.records.len(), Vec::new()));
            self.records.push(None);
            self.probe(&mut frame, Anchor::Entry);
        }

        self.depth += 1;
        let result = self.exec_block(&mut frame, &f.body, None).map(|flow| match flow {
            Flow::Return(v) => v,
            Flow::Normal => Value::Void,
        });
        self.depth -= 1;

        if let Some((slot, trace)) = frame.trace.take() {
            let (ext, status) = ext_of(&result, &self.globals, &self.out[out_start..]);
            self.records[slot] = Some(ExecutionOutcome {
                trace,
                ext,
                out: self.out[out_start..].to_vec(),
                coverage: BTreeSet::new(),
                status,
            });
        }
        result
    }

    fn probe(&self, frame: &mut Frame, anchor: Anchor) {
        let Some((_, trace)) = frame.trace.as_mut() else { return };
        let Some(&pp_index) = self.anchors.get(&anchor) else { return };
        let mut bindings = self.globals.clone();
        for scope in &frame.scopes {
            for (k, v) in scope {
                bindings.insert(k.clone(), v.clone());
            }
        }
        trace.push(StateSnapshot { pp_index, bindings });
    }

    fn exec_block(&mut self, frame: &mut Frame, block: &AstNode, entry: Option<Anchor>) -> Exec<Flow> {
        frame.scopes.push(Vec::new());
        if let Some(anchor) = entry {
            self.probe(frame, anchor);
        }
        let mut flow = Ok(Flow::Normal);
        for stmt in &block.children {
            self.coverage.insert(stmt.span.line);
            match self.exec_stmt(frame, stmt) {
                Ok(Flow::Normal) => self.probe(frame, Anchor::After { node: stmt.id }),
                other => {
                    flow = other;
                    break;
                }
            }
        }
        frame.scopes.pop();
        flow
    }

    fn exec_stmt(&mut self, frame: &mut Frame, stmt: &AstNode) -> Exec<Flow> {
        self.step()?;
        match stmt.kind {
            NodeKind::VarDecl | NodeKind::Assign => self.exec_simple(frame, stmt).map(|_| Flow::Normal),
            NodeKind::If => {
                if self.eval_bool(frame, &stmt.children[0])? {
                    self.exec_block(frame, &stmt.children[1], Some(Anchor::ThenEntry { node: stmt.id }))
                } else if let Some(els) = stmt.children.get(2) {
                    self.exec_block(frame, els, Some(Anchor::ElseEntry { node: stmt.id }))
                } else {
                    Ok(Flow::Normal)
                }
            }
            NodeKind::While => {
                loop {
                    self.step()?;
                    if !self.eval_bool(frame, &stmt.children[0])? {
                        return Ok(Flow::Normal);
                    }
                    if let Flow::Return(v) = self.exec_block(frame, &stmt.children[1], None)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            NodeKind::For => {
                frame.scopes.push(Vec::new());
                let r = self.exec_for(frame, stmt);
                frame.scopes.pop();
                r
            }
            NodeKind::Return => {
                let v = match stmt.children.first() {
                    Some(e) => self.eval(frame, e)?,
                    None => Value::Void,
                };
                Ok(Flow::Return(v))
            }
            NodeKind::Throw => {
                let msg = match &stmt.token {
                    Token::Message(m) => m.clone(),
                    _ => String::new(),
                };
                Err(Fault::new(ErrorKind::Throw, msg))
            }
            NodeKind::ExprStmt => self.eval(frame, &stmt.children[0]).map(|_| Flow::Normal),
            NodeKind::Output => {
                let v = self.eval(frame, &stmt.children[0])?;
                self.out.push(v);
                Ok(Flow::Normal)
            }
            k => unreachable!("{k:?} is not a statement"),
        }
    }

    fn exec_for(&mut self, frame: &mut Frame, stmt: &AstNode) -> Exec<Flow> {
        self.exec_simple(frame, &stmt.children[0])?;
        loop {
            self.step()?;
            if !self.eval_bool(frame, &stmt.children[1])? {
                return Ok(Flow::Normal);
            }
            if let Flow::Return(v) = self.exec_block(frame, &stmt.children[3], None)? {
                return Ok(Flow::Return(v));
            }
            self.exec_simple(frame, &stmt.children[2])?;
        }
    }

    /// Declaration or assignment.
    fn exec_simple(&mut self, frame: &mut Frame, stmt: &AstNode) -> Exec<()> {
        match (&stmt.kind, &stmt.token) {
            (NodeKind::VarDecl, Token::Decl(name, _)) => {
                let v = self.eval(frame, &stmt.children[0])?;
                frame.scopes.last_mut().expect("open scope").push((name.clone(), v));
                Ok(())
            }
            (NodeKind::Assign, _) => {
                let target = &stmt.children[0];
                match target.kind {
                    NodeKind::VarRef => {
                        let v = self.eval(frame, &stmt.children[1])?;
                        *self.slot(frame, target.name().expect("variable")) = v;
                    }
                    NodeKind::Index => {
                        let i = self.eval_int(frame, &target.children[1])?;
                        let v = self.eval_int(frame, &stmt.children[1])?;
                        let name = target.children[0].name().expect("array variable");
                        let Value::Array(items) = self.slot(frame, name) else { unreachable!("validated array") };
                        let len = items.len();
                        let cell = usize::try_from(i).ok().and_then(|i| items.get_mut(i));
                        match cell {
                            Some(c) => *c = v,
                            None => return Err(oob(i, len)),
                        }
                    }
                    _ => unreachable!("validated assignment target"),
                }
                Ok(())
            }
            _ => unreachable!("not a simple statement"),
        }
    }

    fn slot<'f>(&'f mut self, frame: &'f mut Frame, name: &str) -> &'f mut Value {
        for scope in frame.scopes.iter_mut().rev() {
            if let Some((_, v)) = scope.iter_mut().find(|(n, _)| n == name) {
                return v;
            }
        }
        self.globals.get_mut(name).expect("validated variable")
    }

    fn lookup(&self, frame: &Frame, name: &str) -> Value {
        for scope in frame.scopes.iter().rev() {
            if let Some((_, v)) = scope.iter().find(|(n, _)| n == name) {
                return v.clone();
            }
        }
        self.globals.get(name).cloned().expect("validated variable")
    }

    fn eval_int(&mut self, frame: &mut Frame, e: &AstNode) -> Exec<i64> {
        match self.eval(frame, e)? {
            Value::Int(v) => Ok(v),
            v => unreachable!("validated int, got {v}"),
        }
    }

    fn eval_bool(&mut self, frame: &mut Frame, e: &AstNode) -> Exec<bool> {
        match self.eval(frame, e)? {
            Value::Bool(b) => Ok(b),
            v => unreachable!("validated bool, got {v}"),
        }
    }

    fn eval(&mut self, frame: &mut Frame, e: &AstNode) -> Exec<Value> {
        match (&e.kind, &e.token) {
            (NodeKind::Literal, Token::Lit(v)) => Ok(v.clone()),
            (NodeKind::VarRef, Token::Ident(name)) => Ok(self.lookup(frame, name)),
            (NodeKind::UnOp, Token::Unary(UnaryOp::Neg)) => Ok(Value::Int(self.eval_int(frame, &e.children[0])?.wrapping_neg())),
            (NodeKind::UnOp, Token::Unary(UnaryOp::Not)) => Ok(Value::Bool(!self.eval_bool(frame, &e.children[0])?)),
            (NodeKind::BinOp, Token::Binary(op)) => self.binary(frame, *op, &e.children[0], &e.children[1]),
            (NodeKind::Index, _) => {
                let items = match self.eval(frame, &e.children[0])? {
                    Value::Array(items) => items,
                    v => unreachable!("validated array, got {v}"),
                };
                let i = self.eval_int(frame, &e.children[1])?;
                usize::try_from(i)
                    .ok()
                    .and_then(|k| items.get(k))
                    .map(|v| Value::Int(*v))
                    .ok_or_else(|| oob(i, items.len()))
            }
            (NodeKind::Call, Token::Ident(name)) => {
                let mut args = Vec::with_capacity(e.children.len());
                for a in &e.children {
                    args.push(self.eval(frame, a)?);
                }
                match name.as_str() {
                    "len" => match &args[0] {
                        Value::Array(items) => Ok(Value::Int(items.len() as i64)),
                        v => unreachable!("validated array, got {v}"),
                    },
                    "array" => {
                        let Value::Int(n) = args[0] else { unreachable!("validated int") };
                        if n < 0 {
                            Err(Fault::new(ErrorKind::NegativeSize, format!("array size {n}")))
                        } else if n as u64 > self.cfg.max_array_len as u64 {
                            Err(Fault::new(ErrorKind::AllocLimit, format!("array size {n}")))
                        } else {
                            Ok(Value::Array(vec![0; n as usize]))
                        }
                    }
                    _ => self.call(name, args),
                }
            }
            _ => unreachable!("{:?} is not an expression", e.kind),
        }
    }

    fn binary(&mut self, frame: &mut Frame, op: BinaryOp, l: &AstNode, r: &AstNode) -> Exec<Value> {
        match op {
            BinaryOp::And => return Ok(Value::Bool(self.eval_bool(frame, l)? && self.eval_bool(frame, r)?)),
            BinaryOp::Or => return Ok(Value::Bool(self.eval_bool(frame, l)? || self.eval_bool(frame, r)?)),
            BinaryOp::Eq => return Ok(Value::Bool(self.eval(frame, l)? == self.eval(frame, r)?)),
            BinaryOp::Ne => return Ok(Value::Bool(self.eval(frame, l)? != self.eval(frame, r)?)),
            _ => {}
        }
        let a = self.eval_int(frame, l)?;
        let b = self.eval_int(frame, r)?;
        let v = match op {
            BinaryOp::Add => Value::Int(a.wrapping_add(b)),
            BinaryOp::Sub => Value::Int(a.wrapping_sub(b)),
            BinaryOp::Mul => Value::Int(a.wrapping_mul(b)),
            BinaryOp::Div | BinaryOp::Rem if b == 0 => {
                return Err(Fault::new(ErrorKind::DivByZero, format!("{a} {} 0", op.symbol())))
            }
            BinaryOp::Div => Value::Int(a.wrapping_div(b)),
            BinaryOp::Rem => Value::Int(a.wrapping_rem(b)),
            BinaryOp::Lt => Value::Bool(a < b),
            BinaryOp::Le => Value::Bool(a <= b),
            BinaryOp::Gt => Value::Bool(a > b),
            BinaryOp::Ge => Value::Bool(a >= b),
            _ => unreachable!(),
        };
        Ok(v)
    }
}

fn oob(i: i64, len: usize) -> Fault {
    Fault::new(ErrorKind::IndexOutOfBounds, format!("index {i} out of bounds for length {len}"))
}
