use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{clopper_pearson, ConfidenceInterval, FixPattern, StatsError};
use crate::classify::{Flag, Mode, VerdictRecord};

pub const CI_LEVEL: f64 = 0.95;

/// Counts over a set of executions. Merging is associative and commutative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tally {
    pub methods: u64,
    pub methods_with_ts: u64,
    pub executions: u64,
    pub externally_detectable: u64,
    pub infected: u64,
    #[serde(rename = "intFEP")]
    pub int_fep: u64,
    #[serde(rename = "extFEP")]
    pub ext_fep: u64,
    #[serde(rename = "sysFEP")]
    pub sys_fep: u64,
}

impl Tally {
    pub fn add(&mut self, r: &VerdictRecord) {
        self.executions += 1;
        self.externally_detectable += r.detectable as u64;
        self.infected += r.infected as u64;
        self.int_fep += r.has(Flag::IntFep) as u64;
        self.ext_fep += r.has(Flag::ExtFep) as u64;
        self.sys_fep += r.has(Flag::SysFep) as u64;
    }

    pub fn merge(&self, o: &Tally) -> Tally {
        Tally {
            methods: self.methods + o.methods,
            methods_with_ts: self.methods_with_ts + o.methods_with_ts,
            executions: self.executions + o.executions,
            externally_detectable: self.externally_detectable + o.externally_detectable,
            infected: self.infected + o.infected,
            int_fep: self.int_fep + o.int_fep,
            ext_fep: self.ext_fep + o.ext_fep,
            sys_fep: self.sys_fep + o.sys_fep,
        }
    }

    pub fn count(&self, flag: Flag) -> u64 {
        match flag {
            Flag::IntFep => self.int_fep,
            Flag::ExtFep => self.ext_fep,
            Flag::SysFep => self.sys_fep,
        }
    }
}

fn flags(mode: Mode) -> &'static [Flag] {
    match mode {
        Mode::Unit => &[Flag::IntFep, Flag::ExtFep],
        Mode::Sys => &[Flag::SysFep, Flag::IntFep, Flag::ExtFep],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FaultReport {
    pub fault_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<String>,
    pub mode: Mode,
    #[serde(flatten)]
    pub tally: Tally,
    /// Per-flag proportion of executions; empty when there were none.
    #[serde(rename = "pFEP")]
    pub p_fep: BTreeMap<String, f64>,
    pub ci: BTreeMap<String, ConfidenceInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix_pattern: Option<FixPattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl FaultReport {
    pub fn new(fault_id: impl Into<String>, mode: Mode, tally: Tally) -> Result<Self, StatsError> {
        let mut p_fep = BTreeMap::new();
        let mut ci = BTreeMap::new();
        if tally.executions > 0 {
            for &f in flags(mode) {
                let x = tally.count(f);
                p_fep.insert(f.name().to_string(), x as f64 / tally.executions as f64);
                ci.insert(f.name().to_string(), clopper_pearson(x, tally.executions, CI_LEVEL)?);
            }
        }
        Ok(FaultReport {
            fault_id: fault_id.into(),
            project: None,
            mode,
            tally,
            p_fep,
            ci,
            fix_pattern: None,
            note: None,
        })
    }

    pub fn p(&self, flag: Flag) -> Option<f64> {
        self.p_fep.get(flag.name()).copied()
    }
}

/// How verdict records are grouped into report rows.
#[derive(Clone, Debug, Default)]
pub enum Grouping {
    #[default]
    ByFault,
    /// fault id -> project name; faults without an entry form their own row.
    ByProject(HashMap<String, String>),
}

impl Grouping {
    fn key<'a>(&'a self, fault_id: &'a str) -> &'a str {
        match self {
            Grouping::ByFault => fault_id,
            Grouping::ByProject(m) => m.get(fault_id).map_or(fault_id, String::as_str),
        }
    }
}

/// Groups records into rows, in order of first appearance.
pub fn aggregate(records: &[VerdictRecord], grouping: &Grouping) -> Result<Vec<FaultReport>, StatsError> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, (Mode, Tally, BTreeSet<&str>)> = HashMap::new();
    for r in records {
        let key = grouping.key(&r.fault_id);
        let entry = groups.entry(key).or_insert_with(|| {
            order.push(key);
            (r.mode, Tally::default(), BTreeSet::new())
        });
        if entry.0 != r.mode {
            return Err(StatsError::MixedMode(key.to_string()));
        }
        entry.1.add(r);
        entry.2.insert(&r.fault_id);
    }
    order
        .into_iter()
        .map(|key| {
            let (mode, mut tally, faults) = groups.remove(key).expect("grouped");
            tally.methods = faults.len() as u64;
            tally.methods_with_ts = faults.len() as u64;
            let mut row = FaultReport::new(key, mode, tally)?;
            if matches!(grouping, Grouping::ByProject(_)) {
                row.project = Some(key.to_string());
            }
            Ok(row)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportMeta {
    pub mode: Mode,
    pub seed: u64,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub faults: Vec<FaultReport>,
    pub totals: Option<FaultReport>,
}

impl Report {
    pub fn new(mode: Mode, seed: u64, faults: Vec<FaultReport>) -> Result<Self, StatsError> {
        if let Some(f) = faults.iter().find(|f| f.mode != mode) {
            return Err(StatsError::MixedMode(f.fault_id.clone()));
        }
        let totals = if faults.is_empty() {
            None
        } else {
            let sum = faults.iter().fold(Tally::default(), |acc, f| acc.merge(&f.tally));
            Some(FaultReport::new("Total", mode, sum)?)
        };
        Ok(Report {
            meta: ReportMeta { mode, seed, tool_version: env!("CARGO_PKG_VERSION").to_string() },
            faults,
            totals,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Table-shaped CSV: one row per fault plus a total row.
    pub fn to_csv(&self) -> String {
        let mode = self.meta.mode;
        let mut out = String::new();
        let head: &[&str] = match mode {
            Mode::Unit => &[
                "name",
                "changed_methods",
                "methods_with_ts",
                "executions",
                "externally_detectable",
                "int_fep",
                "ext_fep",
                "p_int_fep",
                "p_ext_fep",
            ],
            Mode::Sys => &[
                "bug_id",
                "executions",
                "externally_detectable",
                "sys_fep",
                "int_fep",
                "ext_fep",
                "p_sys_fep",
                "p_int_fep",
                "p_ext_fep",
            ],
        };
        out.push_str(&head.join(","));
        out.push('\n');
        for row in self.faults.iter().chain(self.totals.iter()) {
            let t = &row.tally;
            let mut cells = vec![csv_field(&row.fault_id)];
            if mode == Mode::Unit {
                cells.push(t.methods.to_string());
                cells.push(t.methods_with_ts.to_string());
            }
            cells.push(t.executions.to_string());
            cells.push(t.externally_detectable.to_string());
            for &f in flags(mode) {
                cells.push(t.count(f).to_string());
            }
            for &f in flags(mode) {
                cells.push(row.p(f).map(|p| format!("{p:.4}")).unwrap_or_default());
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
