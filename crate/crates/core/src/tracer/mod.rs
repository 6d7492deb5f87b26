//! Deterministic tree-walking interpreter with program-point snapshots.

mod machine;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instrument::ProgramPoint;
use crate::minilang::{SourceUnit, TypeTag, Value};

pub use machine::ExecConfig;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InputVector {
    pub args: Vec<Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub globals_init: BTreeMap<String, Value>,
}

impl InputVector {
    pub fn new(args: Vec<Value>) -> Self {
        InputVector { args, globals_init: BTreeMap::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateSnapshot {
    pub pp_index: usize,
    /// Globals, parameters and in-scope locals.
    pub bindings: BTreeMap<String, Value>,
}

impl StateSnapshot {
    pub fn canonical(&self) -> String {
        serde_json::to_string(&self.bindings).expect("bindings serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Throw,
    DivByZero,
    IndexOutOfBounds,
    NegativeSize,
    AllocLimit,
    Budget,
    StackOverflow,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Status {
    Normal,
    Error { kind: ErrorKind, message: String },
}

impl Status {
    pub fn is_error(&self) -> bool {
        matches!(self, Status::Error { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub trace: Vec<StateSnapshot>,
    /// Canonical JSON of what the caller can observe: return value, globals
    /// after the call and outputs written during it, or the error kind.
    pub ext: String,
    pub out: Vec<Value>,
    /// Lines of executed statements. Recorded for whole runs; per-invocation
    /// records of a system run leave it empty.
    pub coverage: BTreeSet<u32>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TracerError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("program has no entry function")]
    NoEntry,
    #[error("bad input: {0}")]
    BadInput(String),
}

/// Canonical serialization of a value: compact JSON, injective on values.
pub fn canonical_serialize(v: &Value) -> String {
    serde_json::to_string(v).expect("values serialize")
}

/// Runs `fn_name` on `input`, snapshotting at `points`.
pub fn execute_unit(
    unit: &SourceUnit,
    fn_name: &str,
    input: &InputVector,
    points: &[ProgramPoint],
    config: &ExecConfig,
) -> Result<ExecutionOutcome, TracerError> {
    check_args(unit, fn_name, input)?;
    let mut m = machine::Machine::new(unit, input, Some((fn_name, points)), config)?;
    m.run(fn_name, input.args.clone());
    let (system, invocations) = m.finish();
    // Recursive calls are recorded too; the unit invocation is the first.
    let mut outcome = invocations.into_iter().next().expect("the target runs at top level");
    outcome.coverage = system.coverage;
    Ok(outcome)
}

/// Runs the entry function and records every invocation of `target_fn`.
pub fn execute_system(
    unit: &SourceUnit,
    input: &InputVector,
    target_fn: &str,
    points: &[ProgramPoint],
    config: &ExecConfig,
) -> Result<(ExecutionOutcome, Vec<ExecutionOutcome>), TracerError> {
    let entry = unit.entry.as_deref().ok_or(TracerError::NoEntry)?;
    if unit.function(target_fn).is_none() {
        return Err(TracerError::UnknownFunction(target_fn.to_string()));
    }
    check_args(unit, entry, input)?;
    let mut m = machine::Machine::new(unit, input, Some((target_fn, points)), config)?;
    m.run(entry, input.args.clone());
    let (system, invocations) = m.finish();
    Ok((system, invocations))
}

fn check_args(unit: &SourceUnit, fn_name: &str, input: &InputVector) -> Result<(), TracerError> {
    let f = unit.function(fn_name).ok_or_else(|| TracerError::UnknownFunction(fn_name.to_string()))?;
    if f.params.len() != input.args.len() {
        return Err(TracerError::BadInput(format!(
            "`{fn_name}` takes {} arguments, got {}",
            f.params.len(),
            input.args.len()
        )));
    }
    for (p, v) in f.params.iter().zip(&input.args) {
        if v.type_tag() != p.ty || p.ty == TypeTag::Void {
            return Err(TracerError::BadInput(format!("argument `{}` expects {}, got {v}", p.name, p.ty)));
        }
    }
    Ok(())
}
