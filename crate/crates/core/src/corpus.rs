//! Corpus manifests, whole-corpus runs and JSON-lines persistence.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classify::{Mode, VerdictRecord};
use crate::inputgen::{GeneratorConfig, InputPool};
use crate::minilang::{parse, SourceUnit};
use crate::pipeline::{analyze_case, analyze_mutants, AnalysisConfig, CaseInput, DiscardedMutant, PipelineError};
use crate::stats::{FaultReport, FixPattern, Report, Tally};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FaultCase {
    pub case_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<String>,
    /// Relative to the manifest's directory.
    pub buggy_path: PathBuf,
    pub fixed_path: PathBuf,
    pub target_fn: String,
    /// Derived from the edit script when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_list: Option<Vec<u32>>,
    #[serde(default = "unit_mode")]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    /// Hand label for the fix-pattern detector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_fix_pattern: Option<FixPattern>,
}

fn unit_mode() -> Mode {
    Mode::Unit
}

/// A function whose mutants stand in for artificial faults.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MutantSubject {
    pub subject_id: String,
    pub path: PathBuf,
    pub target_fn: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusManifest {
    pub cases: Vec<FaultCase>,
    #[serde(default)]
    pub mutant_subjects: Vec<MutantSubject>,
    #[serde(default)]
    pub defaults: GeneratorConfig,
    /// Pool target for each mutant; the case target when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutant_target_executions: Option<usize>,
}

/// A manifest with every program parsed.
#[derive(Clone, Debug)]
pub struct LoadedCorpus {
    pub manifest: CorpusManifest,
    pub cases: Vec<CaseInput>,
    pub subjects: Vec<(MutantSubject, SourceUnit)>,
}

pub fn load_program(path: &Path) -> Result<SourceUnit, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.display().to_string(), source })?;
    parse(&text).map_err(|source| PipelineError::Frontend { path: path.display().to_string(), source })
}

/// Reads the manifest and checks every case: unique ids, parseable files,
/// target present in both versions, more than one statement in unit mode.
pub fn load_corpus(manifest_path: &Path) -> Result<LoadedCorpus, PipelineError> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|source| PipelineError::Io { path: manifest_path.display().to_string(), source })?;
    let manifest: CorpusManifest =
        serde_json::from_str(&text).map_err(|e| PipelineError::Invalid(format!("{}: {e}", manifest_path.display())))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut ids = HashSet::new();
    let mut cases = Vec::new();
    for c in &manifest.cases {
        if !ids.insert(c.case_id.as_str()) {
            return Err(PipelineError::Invalid(format!("duplicate case id `{}`", c.case_id)));
        }
        let buggy = load_program(&base.join(&c.buggy_path))?;
        let fixed = load_program(&base.join(&c.fixed_path))?;
        for (v, u) in [("buggy", &buggy), ("fixed", &fixed)] {
            let f = u
                .function(&c.target_fn)
                .ok_or_else(|| PipelineError::Invalid(format!("{}: {v} version has no `{}`", c.case_id, c.target_fn)))?;
            if c.mode == Mode::Unit && f.statement_count() < 2 {
                return Err(PipelineError::Invalid(format!("{}: `{}` has fewer than two statements", c.case_id, c.target_fn)));
            }
            if c.mode == Mode::Sys && u.entry.is_none() {
                return Err(PipelineError::Invalid(format!("{}: {v} version has no entry", c.case_id)));
            }
        }
        cases.push(CaseInput {
            case_id: c.case_id.clone(),
            project: c.project.clone(),
            buggy,
            fixed,
            target_fn: c.target_fn.clone(),
            line_list: c.line_list.clone(),
            mode: c.mode,
        });
    }
    let mut subjects = Vec::new();
    for s in &manifest.mutant_subjects {
        if !ids.insert(s.subject_id.as_str()) {
            return Err(PipelineError::Invalid(format!("duplicate id `{}`", s.subject_id)));
        }
        let unit = load_program(&base.join(&s.path))?;
        if unit.function(&s.target_fn).is_none() {
            return Err(PipelineError::Invalid(format!("{}: no function `{}`", s.subject_id, s.target_fn)));
        }
        subjects.push((s.clone(), unit));
    }
    Ok(LoadedCorpus { manifest, cases, subjects })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PatternCheck {
    pub case_id: String,
    pub expected: FixPattern,
    pub detected: FixPattern,
}

/// Everything a corpus run reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusReport {
    /// One row per unit-mode case.
    pub unit: Report,
    /// Unit-mode cases merged by project.
    pub unit_projects: Report,
    pub sys: Report,
    /// One row per kept mutant.
    pub mutants: Report,
    /// Kept mutants merged by subject.
    pub mutant_subjects: Report,
    pub discarded_mutants: Vec<DiscardedMutant>,
    pub fix_patterns: Vec<PatternCheck>,
}

impl CorpusReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Pool persisted per case.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PoolRecord {
    pub case_id: String,
    pub lines: Vec<u32>,
    pub pool: Option<InputPool>,
}

#[derive(Clone, Debug)]
pub struct CorpusRun {
    pub report: CorpusReport,
    pub verdicts: Vec<VerdictRecord>,
    pub pools: Vec<PoolRecord>,
}

/// Runs every case and every mutant subject. Cases run one after another;
/// each case parallelises over its inputs.
pub fn run_corpus(corpus: &LoadedCorpus, config: &AnalysisConfig) -> Result<CorpusRun, PipelineError> {
    let mut config = config.clone();
    config.generator = GeneratorConfig { seed: config.seed, ..corpus.manifest.defaults.clone() };
    config.exec = corpus.manifest.defaults.exec.clone();

    let mut unit_rows = Vec::new();
    let mut sys_rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut pools = Vec::new();
    let mut fix_patterns = Vec::new();
    let expected: HashMap<&str, FixPattern> = corpus
        .manifest
        .cases
        .iter()
        .filter_map(|c| c.expected_fix_pattern.map(|p| (c.case_id.as_str(), p)))
        .collect();

    for case in &corpus.cases {
        let out = analyze_case(case, &config)?;
        if let (Some(&e), Some(d)) = (expected.get(case.case_id.as_str()), out.report.fix_pattern) {
            fix_patterns.push(PatternCheck { case_id: case.case_id.clone(), expected: e, detected: d });
        }
        pools.push(PoolRecord { case_id: case.case_id.clone(), lines: out.lines, pool: out.pool });
        verdicts.extend(out.verdicts);
        match case.mode {
            Mode::Unit => unit_rows.push(out.report),
            Mode::Sys => sys_rows.push(out.report),
        }
    }

    if let Some(t) = corpus.manifest.mutant_target_executions {
        config.generator.target_executions = t;
    }
    let mut mutant_rows = Vec::new();
    let mut discarded = Vec::new();
    for (s, unit) in &corpus.subjects {
        let out = analyze_mutants(unit, &s.target_fn, Some(&s.subject_id), &config)?;
        mutant_rows.extend(out.reports);
        discarded.extend(out.discarded);
        verdicts.extend(out.verdicts);
    }

    let seed = config.seed;
    let report = CorpusReport {
        unit_projects: Report::new(Mode::Unit, seed, by_project(&unit_rows)?)?,
        unit: Report::new(Mode::Unit, seed, unit_rows)?,
        sys: Report::new(Mode::Sys, seed, sys_rows)?,
        mutant_subjects: Report::new(Mode::Unit, seed, by_project(&mutant_rows)?)?,
        mutants: Report::new(Mode::Unit, seed, mutant_rows)?,
        discarded_mutants: discarded,
        fix_patterns,
    };
    Ok(CorpusRun { report, verdicts, pools })
}

/// Merges rows sharing a project, in order of first appearance. Rows
/// without a project keep their own id.
pub fn by_project(rows: &[FaultReport]) -> Result<Vec<FaultReport>, PipelineError> {
    let mut order: Vec<String> = Vec::new();
    let mut sums: HashMap<String, (Mode, Tally)> = HashMap::new();
    for r in rows {
        let key = r.project.clone().unwrap_or_else(|| r.fault_id.clone());
        let e = sums.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (r.mode, Tally::default())
        });
        e.1 = e.1.merge(&r.tally);
    }
    order
        .into_iter()
        .map(|k| {
            let (mode, t) = sums[&k];
            let mut row = FaultReport::new(k.clone(), mode, t)?;
            row.project = Some(k);
            Ok(row)
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io { path: path.display().to_string(), source };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    for it in items {
        serde_json::to_writer(&mut w, it).expect("record serializes");
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let io = |source| PipelineError::Io { path: path.display().to_string(), source };
    let r = BufReader::new(fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| PipelineError::Invalid(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}
