//! Coverage-directed random input generation.
//!
//! Typed random inputs are sampled from a seeded stream and kept when they
//! cover some target line that has not yet reached its goal count.

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{FunctionDef, SourceUnit, TypeTag, Value};
use crate::tracer::{execute_unit, ExecConfig, InputVector, TracerError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValueRanges {
    pub int_min: i64,
    pub int_max: i64,
}

impl Default for ValueRanges {
    fn default() -> Self {
        ValueRanges { int_min: -100, int_max: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GeneratorConfig {
    pub line_list: Vec<u32>,
    /// Derived from `target_executions` when absent.
    pub goals_multiply: Option<usize>,
    pub target_executions: usize,
    pub budget_seconds: f64,
    pub seed: u64,
    pub value_ranges: ValueRanges,
    pub max_array_len: usize,
    /// Hard cap on sampled candidates, so the run length does not depend on
    /// machine speed.
    pub max_attempts: usize,
    /// Stop after this many consecutive rejected candidates.
    pub stall_limit: usize,
    pub exec: ExecConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            line_list: Vec::new(),
            goals_multiply: None,
            target_executions: 1000,
            budget_seconds: 60.0,
            seed: 0,
            value_ranges: ValueRanges::default(),
            max_array_len: 8,
            max_attempts: 200_000,
            stall_limit: 20_000,
            exec: ExecConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub id: usize,
    pub input: InputVector,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorLog {
    pub accepted: usize,
    pub rejected: usize,
    pub attempts: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InputPool {
    pub inputs: Vec<PoolEntry>,
    pub coverage_count: BTreeMap<u32, usize>,
    pub generator_log: GeneratorLog,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("no input covered any target line")]
    EmptyPool,
    #[error("line list is empty")]
    NoLines,
    #[error("lines {0:?} hold no statement of the program")]
    InvalidLines(Vec<u32>),
    #[error(transparent)]
    Tracer(#[from] TracerError),
}

/// `round(target / |lines|)`, at least 1.
pub fn derive_goals_multiply(target_executions: usize, line_count: usize) -> usize {
    assert!(line_count > 0, "line list must be nonempty");
    ((target_executions as f64 / line_count as f64).round() as usize).max(1)
}

/// Samples inputs for `fn_name` and keeps those that raise the coverage of
/// an unfinished target line.
pub fn generate_pool(unit: &SourceUnit, fn_name: &str, config: &GeneratorConfig) -> Result<InputPool, GenError> {
    let f = unit.function(fn_name).ok_or_else(|| TracerError::UnknownFunction(fn_name.to_string()))?;
    if config.line_list.is_empty() {
        return Err(GenError::NoLines);
    }
    let statement_lines: HashSet<u32> = unit
        .functions
        .iter()
        .flat_map(|g| g.body.preorder().filter(|n| n.kind.is_statement()).map(|n| n.span.line))
        .collect();
    let bad: Vec<u32> = config.line_list.iter().copied().filter(|l| !statement_lines.contains(l)).collect();
    if !bad.is_empty() {
        return Err(GenError::InvalidLines(bad));
    }

    let goal = config.goals_multiply.unwrap_or_else(|| derive_goals_multiply(config.target_executions, config.line_list.len()));
    let mut counts: BTreeMap<u32, usize> = config.line_list.iter().map(|l| (*l, 0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut seen: HashSet<InputVector> = HashSet::new();
    let mut inputs = Vec::new();
    let mut log = GeneratorLog::default();
    let started = Instant::now();
    let mut stall = 0;

    while log.attempts < config.max_attempts && stall < config.stall_limit {
        if counts.values().all(|c| *c >= goal) || started.elapsed().as_secs_f64() > config.budget_seconds {
            break;
        }
        log.attempts += 1;
        let input = sample(f, config, &mut rng);
        if !seen.insert(input.clone()) {
            log.rejected += 1;
            stall += 1;
            continue;
        }
        let outcome = execute_unit(unit, fn_name, &input, &[], &config.exec)?;
        let useful = counts.iter().any(|(l, c)| *c < goal && outcome.coverage.contains(l));
        if !useful {
            log.rejected += 1;
            stall += 1;
            continue;
        }
        for (l, c) in counts.iter_mut() {
            if outcome.coverage.contains(l) {
                *c += 1;
            }
        }
        inputs.push(PoolEntry { id: inputs.len(), input });
        log.accepted += 1;
        stall = 0;
    }

    if inputs.is_empty() {
        return Err(GenError::EmptyPool);
    }
    Ok(InputPool { inputs, coverage_count: counts, generator_log: log })
}

fn sample(f: &FunctionDef, config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> InputVector {
    let r = config.value_ranges;
    let int = |rng: &mut ChaCha8Rng| rng.gen_range(r.int_min..=r.int_max);
    let args = f
        .params
        .iter()
        .map(|p| match p.ty {
            TypeTag::Int => Value::Int(int(rng)),
            TypeTag::Bool => Value::Bool(rng.gen()),
            TypeTag::IntArray => {
                let len = rng.gen_range(0..=config.max_array_len);
                Value::Array((0..len).map(|_| int(rng)).collect())
            }
            TypeTag::Void => Value::Void,
        })
        .collect();
    InputVector::new(args)
}
