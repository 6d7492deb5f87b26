//! FEP verdicts for paired buggy/fixed executions.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instrument::AlignedInstrumentation;
use crate::tracer::{ExecutionOutcome, StateSnapshot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Unit,
    Sys,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Unit => "unit",
            Mode::Sys => "sys",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "unit" => Ok(Mode::Unit),
            "sys" => Ok(Mode::Sys),
            _ => Err(format!("unknown mode `{s}` (expected unit or sys)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flag {
    IntFep,
    ExtFep,
    SysFep,
}

impl Flag {
    pub fn name(self) -> &'static str {
        match self {
            Flag::IntFep => "intFEP",
            Flag::ExtFep => "extFEP",
            Flag::SysFep => "sysFEP",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VerdictSet {
    pub int_fep: bool,
    pub ext_fep: bool,
    pub sys_fep: bool,
    /// ext (unit) or out (sys) differed.
    pub detectable: bool,
    /// Some compared artifact differed.
    pub infected: bool,
}

impl VerdictSet {
    pub fn no_fep(detectable: bool, infected: bool) -> Self {
        VerdictSet { detectable, infected, ..Default::default() }
    }

    pub fn is_no_fep(&self) -> bool {
        !(self.int_fep || self.ext_fep || self.sys_fep)
    }

    pub fn has(&self, flag: Flag) -> bool {
        match flag {
            Flag::IntFep => self.int_fep,
            Flag::ExtFep => self.ext_fep,
            Flag::SysFep => self.sys_fep,
        }
    }

    /// Verdict names; `["noFEP"]` when no flag is set.
    pub fn names(&self) -> Vec<&'static str> {
        let flags: Vec<&str> =
            [Flag::IntFep, Flag::ExtFep, Flag::SysFep].into_iter().filter(|f| self.has(*f)).map(Flag::name).collect();
        if flags.is_empty() {
            vec!["noFEP"]
        } else {
            flags
        }
    }

    /// intFEP implies extFEP, and in sys mode extFEP implies sysFEP; a
    /// detectable run carries no flag.
    pub fn is_closed(&self, mode: Mode) -> bool {
        let implications = (!self.int_fep || self.ext_fep) && (mode == Mode::Unit || !self.ext_fep || self.sys_fep);
        let unit_ok = mode == Mode::Sys || !self.sys_fep;
        implications && unit_ok && !(self.detectable && !self.is_no_fep())
    }
}

/// Smallest closed verdict containing `flag`.
pub fn close(flag: Flag, mode: Mode) -> VerdictSet {
    assert!(!(mode == Mode::Unit && flag == Flag::SysFep), "sysFEP has no meaning in unit mode");
    let int_fep = flag == Flag::IntFep;
    let ext_fep = int_fep || flag == Flag::ExtFep;
    let sys_fep = mode == Mode::Sys;
    VerdictSet { int_fep, ext_fep, sys_fep, detectable: false, infected: true }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairedExecution {
    pub fault_id: String,
    pub input_id: usize,
    pub mode: Mode,
    pub alignment: AlignedInstrumentation,
    /// Unit mode: the unit invocation. Sys mode: the whole-system outcome.
    pub buggy: ExecutionOutcome,
    pub fixed: ExecutionOutcome,
    /// Sys mode: per-invocation outcomes of the target function.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub buggy_invocations: Vec<ExecutionOutcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_invocations: Vec<ExecutionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("trace point {pp} is not among the {version} points")]
    AlignmentMismatch { version: &'static str, pp: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerdictRecord {
    pub fault_id: String,
    pub input_id: usize,
    pub mode: Mode,
    pub verdicts: Vec<String>,
    pub detectable: bool,
    pub infected: bool,
}

impl VerdictRecord {
    pub fn new(pe: &PairedExecution, v: &VerdictSet) -> Self {
        VerdictRecord {
            fault_id: pe.fault_id.clone(),
            input_id: pe.input_id,
            mode: pe.mode,
            verdicts: v.names().into_iter().map(String::from).collect(),
            detectable: v.detectable,
            infected: v.infected,
        }
    }

    pub fn has(&self, flag: Flag) -> bool {
        self.verdicts.iter().any(|v| v == flag.name())
    }
}

pub fn classify(pe: &PairedExecution) -> Result<VerdictSet, ClassifyError> {
    let al = &pe.alignment;
    let outcomes: Vec<(&ExecutionOutcome, &ExecutionOutcome)> = match pe.mode {
        Mode::Unit => vec![(&pe.buggy, &pe.fixed)],
        Mode::Sys => pe.buggy_invocations.iter().zip(&pe.fixed_invocations).collect(),
    };
    let bset: HashSet<usize> = al.buggy_points.iter().map(|p| p.pp_index).collect();
    let fset: HashSet<usize> = al.fixed_points.iter().map(|p| p.pp_index).collect();
    let all_b = pe.buggy_invocations.iter().chain(std::iter::once(&pe.buggy));
    let all_f = pe.fixed_invocations.iter().chain(std::iter::once(&pe.fixed));
    for (version, set, mut it) in [("buggy", &bset, Box::new(all_b) as Box<dyn Iterator<Item = _>>), ("fixed", &fset, Box::new(all_f))] {
        if let Some(s) = it.find_map(|o| o.trace.iter().find(|s| !set.contains(&s.pp_index))) {
            return Err(ClassifyError::AlignmentMismatch { version, pp: s.pp_index });
        }
    }

    match pe.mode {
        Mode::Unit => {
            if pe.buggy.ext != pe.fixed.ext {
                return Ok(VerdictSet::no_fep(true, true));
            }
            Ok(match compare_states(&pe.buggy, &pe.fixed, al) {
                Some(flag) => close(flag, Mode::Unit),
                None => VerdictSet::no_fep(false, false),
            })
        }
        Mode::Sys => {
            if pe.buggy.out != pe.fixed.out || pe.buggy.status.is_error() != pe.fixed.status.is_error() {
                return Ok(VerdictSet::no_fep(true, true));
            }
            let counts_differ = pe.buggy_invocations.len() != pe.fixed_invocations.len();
            if counts_differ || outcomes.iter().any(|(b, f)| b.ext != f.ext) {
                return Ok(close(Flag::SysFep, Mode::Sys));
            }
            // Strongest state-level flag over all invocations.
            let mut worst = None;
            for (b, f) in outcomes {
                match compare_states(b, f, al) {
                    Some(Flag::IntFep) => {
                        worst = Some(Flag::IntFep);
                        break;
                    }
                    Some(flag) => worst = worst.or(Some(flag)),
                    None => {}
                }
            }
            Ok(match worst {
                Some(flag) => close(flag, Mode::Sys),
                None => VerdictSet::no_fep(false, false),
            })
        }
    }
}

/// Return-point, path and interior checks, in that order.
///
/// Only points both runs reach are compared. The return-point check needs
/// both runs to end at corresponding points; a run that leaves early (an
/// exit the other version lacks) has an aligned path that is a prefix of
/// the other's, and only that prefix is compared.
fn compare_states(b: &ExecutionOutcome, f: &ExecutionOutcome, al: &AlignedInstrumentation) -> Option<Flag> {
    if let (Some(sb), Some(sf)) = (b.trace.last(), f.trace.last()) {
        if al.fixed_for(sb.pp_index) == Some(sf.pp_index) && sb.canonical() != sf.canonical() {
            return Some(Flag::ExtFep);
        }
    }
    let aligned_b: Vec<(usize, &StateSnapshot)> =
        b.trace.iter().filter_map(|s| al.fixed_for(s.pp_index).map(|pf| (pf, s))).collect();
    let aligned_f: Vec<(usize, &StateSnapshot)> =
        f.trace.iter().filter(|s| al.buggy_for(s.pp_index).is_some()).map(|s| (s.pp_index, s)).collect();
    if aligned_b.iter().zip(&aligned_f).any(|(x, y)| x.0 != y.0) {
        return Some(Flag::IntFep);
    }
    let interior = aligned_b.iter().zip(&aligned_f).filter(|(x, _)| x.0 != 0);
    for ((_, sb), (_, sf)) in interior {
        if sb.canonical() != sf.canonical() {
            return Some(Flag::IntFep);
        }
    }
    None
}
