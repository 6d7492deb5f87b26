//! End-to-end analysis of one buggy/fixed pair, and of the mutants of a
//! function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{classify, ClassifyError, Mode, PairedExecution, VerdictRecord};
use crate::diff::{block_members, fault_lines, statement_script, EditScript};
use crate::inputgen::{generate_pool, GenError, GeneratorConfig, InputPool};
use crate::instrument::{instrument_pair, AlignedInstrumentation, InstrumentError};
use crate::minilang::{FrontendError, SourceUnit};
use crate::mutation::{generate_mutants, strong_kill_filter, Mutant, MutantInfo, MutationError};
use crate::stats::{aggregate, classify_fix_pattern, FaultReport, Grouping, StatsError, Tally};
use crate::tracer::{execute_system, execute_unit, ExecConfig, TracerError};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct AnalysisConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub exec: ExecConfig,
    /// Keep every paired execution in the outcome, for persistence.
    #[serde(skip)]
    pub keep_paired: bool,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Frontend { path: String, source: FrontendError },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error(transparent)]
    Tracer(#[from] TracerError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
}

impl PipelineError {
    /// True when the failure comes from the user's input rather than the tool.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            PipelineError::Frontend { .. }
                | PipelineError::Invalid(_)
                | PipelineError::Gen(GenError::NoLines | GenError::InvalidLines(_))
                | PipelineError::Tracer(TracerError::UnknownFunction(_) | TracerError::NoEntry | TracerError::BadInput(_))
                | PipelineError::Mutation(MutationError::UnknownFunction(_) | MutationError::TooFewStatements(_))
        )
    }
}

/// 64-bit FNV-1a of the run seed and a case id, so every case has its own
/// stream regardless of scheduling.
pub fn case_seed(seed: u64, case_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(case_id.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// A buggy/fixed pair ready for analysis.
#[derive(Clone, Debug)]
pub struct CaseInput {
    pub case_id: String,
    pub project: Option<String>,
    pub buggy: SourceUnit,
    pub fixed: SourceUnit,
    pub target_fn: String,
    pub line_list: Option<Vec<u32>>,
    pub mode: Mode,
}

#[derive(Clone, Debug)]
pub struct CaseOutcome {
    pub report: FaultReport,
    pub script: EditScript,
    pub alignment: AlignedInstrumentation,
    pub lines: Vec<u32>,
    pub pool: Option<InputPool>,
    pub verdicts: Vec<VerdictRecord>,
    /// Filled when `keep_paired` is set.
    pub paired: Vec<PairedExecution>,
}

/// Diff, align, build a pool on the buggy version, run every input on both
/// versions and classify.
pub fn analyze_case(case: &CaseInput, config: &AnalysisConfig) -> Result<CaseOutcome, PipelineError> {
    let missing = |v: &str| PipelineError::Invalid(format!("{v} version has no function `{}`", case.target_fn));
    let bf = case.buggy.function(&case.target_fn).ok_or_else(|| missing("buggy"))?;
    let ff = case.fixed.function(&case.target_fn).ok_or_else(|| missing("fixed"))?;
    if case.mode == Mode::Unit && bf.statement_count() < 2 {
        return Err(PipelineError::Invalid(format!("`{}` has fewer than two statements", case.target_fn)));
    }
    let script = statement_script(bf, ff);
    let alignment = instrument_pair(bf, ff, &script)?;

    let lines = match &case.line_list {
        Some(l) => l.clone(),
        None => {
            let l = fault_lines(&script, bf);
            if l.is_empty() {
                // identical versions: every statement of the function
                let mut all: Vec<u32> = block_members(&bf.body).iter().map(|n| n.span.line).collect();
                all.sort_unstable();
                all.dedup();
                all
            } else {
                l
            }
        }
    };

    let runner = match case.mode {
        Mode::Unit => case.target_fn.clone(),
        Mode::Sys => case.buggy.entry.clone().ok_or(TracerError::NoEntry)?,
    };
    let gen = GeneratorConfig {
        line_list: lines.clone(),
        seed: case_seed(config.seed, &case.case_id),
        exec: config.exec.clone(),
        ..config.generator.clone()
    };
    let pool = match generate_pool(&case.buggy, &runner, &gen) {
        Ok(p) => Some(p),
        Err(GenError::EmptyPool) => None,
        Err(e) => return Err(e.into()),
    };

    let mut tally = Tally { methods: 1, ..Tally::default() };
    let mut verdicts = Vec::new();
    let mut paired = Vec::new();
    if let Some(pool) = &pool {
        let results = run_pairs(case, &alignment, pool, config)?;
        for (pe, v) in results {
            verdicts.push(v);
            if config.keep_paired {
                paired.push(pe);
            }
        }
        if let Some(row) = aggregate(&verdicts, &Grouping::ByFault)?.pop() {
            tally = row.tally;
        }
    }
    let mut report = FaultReport::new(&case.case_id, case.mode, tally)?;
    report.project = case.project.clone();
    report.fix_pattern = Some(classify_fix_pattern(&script));
    if pool.is_none() {
        report.note = Some("no TS".to_string());
    }
    Ok(CaseOutcome { report, script, alignment, lines, pool, verdicts, paired })
}

fn run_pairs(
    case: &CaseInput,
    alignment: &AlignedInstrumentation,
    pool: &InputPool,
    config: &AnalysisConfig,
) -> Result<Vec<(PairedExecution, VerdictRecord)>, PipelineError> {
    pool.inputs
        .par_iter()
        .map(|entry| {
            let f = &case.target_fn;
            let pe = match case.mode {
                Mode::Unit => PairedExecution {
                    fault_id: case.case_id.clone(),
                    input_id: entry.id,
                    mode: Mode::Unit,
                    alignment: alignment.clone(),
                    buggy: execute_unit(&case.buggy, f, &entry.input, &alignment.buggy_points, &config.exec)?,
                    fixed: execute_unit(&case.fixed, f, &entry.input, &alignment.fixed_points, &config.exec)?,
                    buggy_invocations: Vec::new(),
                    fixed_invocations: Vec::new(),
                },
                Mode::Sys => {
                    let (b, bi) = execute_system(&case.buggy, &entry.input, f, &alignment.buggy_points, &config.exec)?;
                    let (x, xi) = execute_system(&case.fixed, &entry.input, f, &alignment.fixed_points, &config.exec)?;
                    PairedExecution {
                        fault_id: case.case_id.clone(),
                        input_id: entry.id,
                        mode: Mode::Sys,
                        alignment: alignment.clone(),
                        buggy: b,
                        fixed: x,
                        buggy_invocations: bi,
                        fixed_invocations: xi,
                    }
                }
            };
            let v = classify(&pe)?;
            let rec = VerdictRecord::new(&pe, &v);
            Ok((pe, rec))
        })
        .collect()
}

/// Why a mutant was left out of the analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DiscardReason {
    NotStronglyKilled,
    NoCoveringInput,
    EmptyPool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiscardedMutant {
    pub fault_id: String,
    pub mutant: MutantInfo,
    pub reason: DiscardReason,
}

#[derive(Clone, Debug, Default)]
pub struct MutantAnalysis {
    pub reports: Vec<FaultReport>,
    pub discarded: Vec<DiscardedMutant>,
    pub verdicts: Vec<VerdictRecord>,
}

pub fn mutant_fault_id(fn_name: &str, m: &Mutant) -> String {
    format!("{fn_name}-m{}-{}", m.id, m.operator)
}

/// Mutates `fn_name` in the (fixed) unit, keeps strongly killed mutants and
/// analyses each as a buggy version against its parent.
pub fn analyze_mutants(
    fixed: &SourceUnit,
    fn_name: &str,
    project: Option<&str>,
    config: &AnalysisConfig,
) -> Result<MutantAnalysis, PipelineError> {
    let mutants = generate_mutants(fixed, fn_name)?;
    let results: Vec<Result<Result<CaseOutcome, DiscardedMutant>, PipelineError>> = mutants
        .par_iter()
        .map(|m| {
            let fault_id = mutant_fault_id(fn_name, m);
            let discard = |reason| Ok(Err(DiscardedMutant { fault_id: fault_id.clone(), mutant: m.info(), reason }));
            let lines = m.fault_lines();
            let gen = GeneratorConfig {
                line_list: lines.clone(),
                seed: case_seed(config.seed, &fault_id),
                exec: config.exec.clone(),
                ..config.generator.clone()
            };
            let pool = match generate_pool(&m.mutated_unit, fn_name, &gen) {
                Ok(p) => p,
                Err(GenError::EmptyPool) => return discard(DiscardReason::EmptyPool),
                Err(e) => return Err(e.into()),
            };
            match strong_kill_filter(m, &pool, &config.exec) {
                Ok(k) if k.killed => {}
                Ok(_) => return discard(DiscardReason::NotStronglyKilled),
                Err(MutationError::NoCoveringInput(_)) => return discard(DiscardReason::NoCoveringInput),
                Err(e) => return Err(e.into()),
            }
            let case = CaseInput {
                case_id: fault_id.clone(),
                project: project.map(str::to_string),
                buggy: m.mutated_unit.clone(),
                fixed: (*m.parent_unit).clone(),
                target_fn: fn_name.to_string(),
                line_list: Some(lines),
                mode: Mode::Unit,
            };
            let bf = case.buggy.function(fn_name).expect("mutant function");
            let ff = case.fixed.function(fn_name).expect("parent function");
            let script = statement_script(bf, ff);
            let alignment = instrument_pair(bf, ff, &script)?;
            let pairs = run_pairs(&case, &alignment, &pool, config)?;
            let verdicts: Vec<VerdictRecord> = pairs.into_iter().map(|(_, v)| v).collect();
            let mut report = aggregate(&verdicts, &Grouping::ByFault)?.pop().expect("pool is nonempty");
            report.project = case.project.clone();
            Ok(Ok(CaseOutcome { report, script, alignment, lines: case.line_list.unwrap_or_default(), pool: Some(pool), verdicts, paired: Vec::new() }))
        })
        .collect();

    let mut out = MutantAnalysis::default();
    for r in results {
        match r? {
            Ok(c) => {
                out.reports.push(c.report);
                out.verdicts.extend(c.verdicts);
            }
            Err(d) => out.discarded.push(d),
        }
    }
    Ok(out)
}
