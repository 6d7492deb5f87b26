//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p fep-core --test acceptance`.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use fep_core::classify::{classify, Mode, PairedExecution, VerdictSet};
use fep_core::corpus::{load_corpus, run_corpus, CorpusRun};
use fep_core::diff::{statement_script, EditScript};
use fep_core::instrument::instrument_pair;
use fep_core::minilang::{parse, SourceUnit, Value};
use fep_core::mutation::generate_mutants;
use fep_core::pipeline::AnalysisConfig;
use fep_core::stats::{clopper_pearson, FixPattern};
use fep_core::tracer::{execute_system, execute_unit, ExecConfig, InputVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

// other version, script, correspondence, fixed point count
type Fig3Case<'a> = (&'a str, &'a [&'a str], &'a [(usize, usize)], usize);

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load(rel: &str) -> SourceUnit {
    let path = corpus_dir().join(rel);
    parse(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn unit_pair(buggy: &SourceUnit, fixed: &SourceUnit, f: &str, input: &InputVector, exec: &ExecConfig) -> PairedExecution {
    let (bf, ff) = (buggy.function(f).unwrap(), fixed.function(f).unwrap());
    let al = instrument_pair(bf, ff, &statement_script(bf, ff)).unwrap();
    PairedExecution {
        fault_id: f.into(),
        input_id: 0,
        mode: Mode::Unit,
        buggy: execute_unit(buggy, f, input, &al.buggy_points, exec).unwrap(),
        fixed: execute_unit(fixed, f, input, &al.fixed_points, exec).unwrap(),
        alignment: al,
        buggy_invocations: vec![],
        fixed_invocations: vec![],
    }
}

fn sys_pair(buggy: &SourceUnit, fixed: &SourceUnit, f: &str, input: &InputVector, exec: &ExecConfig) -> PairedExecution {
    let (bf, ff) = (buggy.function(f).unwrap(), fixed.function(f).unwrap());
    let al = instrument_pair(bf, ff, &statement_script(bf, ff)).unwrap();
    let (b, bi) = execute_system(buggy, input, f, &al.buggy_points, exec).unwrap();
    let (x, xi) = execute_system(fixed, input, f, &al.fixed_points, exec).unwrap();
    PairedExecution {
        fault_id: f.into(),
        input_id: 0,
        mode: Mode::Sys,
        alignment: al,
        buggy: b,
        fixed: x,
        buggy_invocations: bi,
        fixed_invocations: xi,
    }
}

fn verdict_of(pe: &PairedExecution) -> VerdictSet {
    classify(pe).unwrap()
}

fn fig1() -> Check {
    let (b, f, bb) = (load("fig1/buggy.mlang"), load("fig1/fixed.mlang"), load("fig1_bool/buggy.mlang"));
    let fb = load("fig1_bool/fixed.mlang");
    let exec = ExecConfig::default();
    let at = |bu: &SourceUnit, fu: &SourceUnit, x: i64| verdict_of(&unit_pair(bu, fu, "f", &InputVector::new(vec![Value::Int(x)]), &exec));
    let v5 = at(&b, &f, 5);
    ensure(v5.names() == ["intFEP", "extFEP"], || format!("x=5 gave {:?}", v5.names()))?;
    let v4 = at(&b, &f, 4);
    ensure(v4.names() == ["noFEP"] && v4.detectable, || format!("x=4 gave {:?} detectable={}", v4.names(), v4.detectable))?;
    let vb = at(&bb, &fb, 4);
    ensure(vb.names() == ["extFEP"], || format!("bool x=4 gave {:?}", vb.names()))?;
    Ok("x=5 {intFEP,extFEP}; x=4 noFEP detectable; bool x=4 {extFEP}".into())
}

fn script_lines(s: &EditScript) -> Vec<String> {
    s.ops
        .iter()
        .map(|op| {
            let kind = serde_json::to_value(op.op).unwrap().as_str().unwrap().to_string();
            match (&op.source, &op.target) {
                (Some(a), Some(b)) if a.text != b.text => format!("{kind} {} -> {}", a.text, b.text),
                (Some(n), _) | (None, Some(n)) => format!("{kind} {}", n.text),
                (None, None) => kind,
            }
        })
        .collect()
}

fn fig3() -> Check {
    let a = load("fig3/a.mlang");
    let fa = a.function("test").unwrap();
    let expect: [Fig3Case; 3] = [
        ("b", &["KEEP int y = x + 1;", "CHANGE y = y % 2; -> y = y % 3;", "KEEP return y;"], &[(0, 0), (1, 1), (2, 2)], 3),
        ("c", &["KEEP int y = x + 1;", "INSERT y = y * 3;", "KEEP y = y % 2;", "KEEP return y;"], &[(0, 0), (1, 1), (2, 2)], 3),
        ("d", &["KEEP int y = x + 1;", "DELETE y = y % 2;", "KEEP return y;"], &[(0, 0), (2, 1)], 2),
    ];
    for (name, script, corr, fixed_points) in expect {
        let other = load(&format!("fig3/{name}.mlang"));
        let fo = other.function("test").unwrap();
        let s = statement_script(fa, fo);
        let got = script_lines(&s);
        ensure(got == script, || format!("({name}) script {got:?}"))?;
        let al = instrument_pair(fa, fo, &s).unwrap();
        ensure(al.correspondence == corr && al.fixed_points.len() == fixed_points && al.buggy_points.len() == 3, || {
            format!("({name}) correspondence {:?}", al.correspondence)
        })?;
    }
    let d = load("fig3/d.mlang");
    let al = instrument_pair(fa, d.function("test").unwrap(), &statement_script(fa, d.function("test").unwrap())).unwrap();
    ensure(al.fixed_for(1).is_none(), || "buggy pp1 matched against (d)".into())?;
    Ok("three scripts and correspondences exact; pp1 unmatched in (d)".into())
}

fn cp() -> Check {
    let near = |got: f64, want: f64, tol: f64| (got - want).abs() <= tol;
    let a = clopper_pearson(0, 258_372, 0.95).map_err(|e| e.to_string())?;
    ensure(a.low == 0.0 && near(a.high, 1.43e-5, 0.01e-5), || format!("(0, 258372) -> {a:?}"))?;
    let b = clopper_pearson(60, 528, 0.95).map_err(|e| e.to_string())?;
    ensure(near(b.low, 0.0878, 5e-4) && near(b.high, 0.1438, 5e-4), || format!("(60, 528) -> {b:?}"))?;
    let c = clopper_pearson(14_376, 889_375, 0.95).map_err(|e| e.to_string())?;
    ensure(near(c.low, 0.0159, 2e-4) && near(c.high, 0.0164, 2e-4), || format!("(14376, 889375) -> {c:?}"))?;
    Ok(format!(
        "upper {:.3e}; [{:.4}, {:.4}]; [{:.4}, {:.4}]",
        a.high, b.low, b.high, c.low, c.high
    ))
}

fn closed(v: &VerdictSet, mode: Mode) -> bool {
    let flags = v.int_fep || v.ext_fep || v.sys_fep;
    (!v.int_fep || v.ext_fep)
        && (mode == Mode::Unit || !flags || v.sys_fep)
        && (mode == Mode::Sys || !v.sys_fep)
        && (v.is_no_fep() == !flags)
        && ((v.names() == ["noFEP"]) == !flags)
}

fn subsumption(run: &CorpusRun) -> Check {
    let mut violations = 0;
    for r in &run.verdicts {
        let has = |n: &str| r.verdicts.iter().any(|v| v == n);
        let flags = has("intFEP") || has("extFEP") || has("sysFEP");
        let ok = (!has("intFEP") || has("extFEP"))
            && (r.mode == Mode::Unit || !flags || has("sysFEP"))
            && (has("noFEP") == !flags)
            && (!has("noFEP") || r.verdicts.len() == 1);
        violations += !ok as usize;
    }

    let exec = ExecConfig { step_budget: 20_000, ..ExecConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut fuzzed = 0;
    let mut flagged = 0;
    while fuzzed < 10_000 {
        let sys = rng.gen_bool(0.5);
        let fixed = parse(&ProgramGen::new(&mut rng).unit(sys)).unwrap();
        let mutants = generate_mutants(&fixed, "f").unwrap();
        if mutants.is_empty() {
            continue;
        }
        let m = &mutants[rng.gen_range(0..mutants.len())];
        for _ in 0..20 {
            let input = InputVector::new(random_args(&mut rng));
            let (pe, mode) = if sys {
                (sys_pair(&m.mutated_unit, &fixed, "f", &input, &exec), Mode::Sys)
            } else {
                (unit_pair(&m.mutated_unit, &fixed, "f", &input, &exec), Mode::Unit)
            };
            let v = verdict_of(&pe);
            flagged += !v.is_no_fep() as usize;
            violations += !closed(&v, mode) as usize;
            fuzzed += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("{} corpus verdicts + {fuzzed} fuzzed ({flagged} flagged), 0 violations", run.verdicts.len()))
}

fn ted_exhaustive() -> Check {
    // each tree up to 6 nodes, pairs up to 8 nodes in total
    let by_size: Vec<Vec<Tree>> = (0..=6).map(|n| if n == 0 { vec![] } else { all_trees(n, 3) }).collect();
    let mut pairs = 0u64;
    let mut mismatches = 0u64;
    for n in 1..=6 {
        for m in 1..=(8 - n).min(6) {
            for a in &by_size[n] {
                for b in &by_size[m] {
                    let z = ted(a, b);
                    if z.cost != brute_force_ted(a, b) || !valid_mapping(a, b, &z.pairs) {
                        mismatches += 1;
                    }
                    pairs += 1;
                }
            }
        }
    }
    // the full 6x6 space is too large to enumerate; sample it instead
    let big: Vec<&Tree> = by_size[4..].iter().flatten().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sampled = 100_000;
    for _ in 0..sampled {
        let (a, b) = (big[rng.gen_range(0..big.len())], big[rng.gen_range(0..big.len())]);
        let z = ted(a, b);
        if z.cost != brute_force_ted(a, b) || !valid_mapping(a, b, &z.pairs) {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} mismatches"))?;
    Ok(format!("{pairs} pairs (each <=6, total <=8 nodes) + {sampled} sampled 4..6-node pairs, 0 mismatches"))
}

fn mutants_vs_real_fixes(run: &CorpusRun) -> Check {
    let totals = run.report.mutants.totals.as_ref().ok_or("no mutants analysed")?;
    let (mi, me) = (totals.tally.int_fep, totals.tally.ext_fep);
    ensure(mi > 0 && me > 0, || format!("mutants intFEP={mi} extFEP={me}"))?;
    let mut checked = Vec::new();
    for row in &run.report.unit.faults {
        let pattern_fix = matches!(row.fix_pattern, Some(FixPattern::ChangeReturn | FixPattern::AddIfReturn));
        if row.project.as_deref() == Some("realstyle") && pattern_fix {
            ensure(row.tally.int_fep == 0 && row.tally.ext_fep == 0 && row.tally.executions > 0, || {
                format!("{}: {} execs, intFEP={} extFEP={}", row.fault_id, row.tally.executions, row.tally.int_fep, row.tally.ext_fep)
            })?;
            checked.push(row.fault_id.clone());
        }
    }
    ensure(!checked.is_empty(), || "no real-style pattern fixes".into())?;
    Ok(format!("mutants intFEP={mi} extFEP={me}; real-style {} all zero", checked.join(",")))
}

fn sysfep(run: &CorpusRun) -> Check {
    let row = run.report.sys.faults.iter().find(|r| r.fault_id == "dead-stat").ok_or("dead-stat missing")?;
    let t = &row.tally;
    ensure(t.sys_fep > 0 && t.externally_detectable == 0, || format!("dead-stat {t:?}"))?;
    for r in run.verdicts.iter().filter(|r| r.mode == Mode::Sys) {
        let flagged = r.verdicts.iter().any(|v| v != "noFEP");
        ensure(!flagged || r.verdicts.iter().any(|v| v == "sysFEP"), || format!("{} input {}: {:?}", r.fault_id, r.input_id, r.verdicts))?;
    }
    Ok(format!("dead-stat sysFEP {}/{} (p={:.3})", t.sys_fep, t.executions, row.p_fep.get("sysFEP").copied().unwrap_or(0.0)))
}

fn determinism(first: &str, second: &str) -> Check {
    ensure(first == second, || "reports differ".into())?;
    Ok(format!("{} bytes identical", first.len()))
}

fn fix_patterns(run: &CorpusRun) -> Check {
    let checks = &run.report.fix_patterns;
    let bad: Vec<_> = checks.iter().filter(|c| c.expected != c.detected).map(|c| c.case_id.as_str()).collect();
    ensure(!checks.is_empty() && bad.is_empty(), || format!("mismatched: {bad:?}"))?;
    Ok(format!("{}/{} match", checks.len(), checks.len()))
}

fn report(name: &str, limit: Option<Duration>, started: Instant, result: Check, failures: &mut usize) {
    let took = started.elapsed();
    let late = limit.is_some_and(|l| took > l);
    let (status, detail) = match result {
        Ok(d) if !late => ("PASS", d),
        Ok(d) => ("FAIL", format!("{d}; took longer than {:?}", limit.unwrap())),
        Err(e) => ("FAIL", e),
    };
    if status == "FAIL" {
        *failures += 1;
    }
    println!("{status} {name} [{:.2}s] {detail}", took.as_secs_f64());
}

fn main() {
    let mut failures = 0;
    let sec = Duration::from_secs;

    let t = Instant::now();
    report("fig1-semantics", Some(sec(1)), t, fig1(), &mut failures);
    let t = Instant::now();
    report("fig3-scripts", Some(sec(1)), t, fig3(), &mut failures);
    let t = Instant::now();
    report("clopper-pearson", Some(sec(1)), t, cp(), &mut failures);

    let t = Instant::now();
    let corpus = load_corpus(&corpus_dir().join("manifest.json")).expect("corpus loads");
    let config = AnalysisConfig { seed: 42, ..AnalysisConfig::default() };
    let first = run_corpus(&corpus, &config);
    let corpus_time = t.elapsed();
    let first = match first {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL corpus-run {e}");
            std::process::exit(1);
        }
    };

    let t = Instant::now();
    report("subsumption", None, t, subsumption(&first), &mut failures);
    let t = Instant::now();
    report("ted-oracle", Some(sec(60)), t, ted_exhaustive(), &mut failures);
    let t = Instant::now() - corpus_time;
    report("mutants-vs-real-fixes", Some(sec(300)), t, mutants_vs_real_fixes(&first), &mut failures);
    let t = Instant::now();
    report("sysfep", None, t, sysfep(&first), &mut failures);

    let t = Instant::now();
    let second = run_corpus(&corpus, &config).map(|r| r.report.to_json());
    let result = second.map_err(|e| e.to_string()).and_then(|s| determinism(&first.report.to_json(), &s));
    report("determinism", None, t, result, &mut failures);
    let t = Instant::now();
    report("fix-patterns", None, t, fix_patterns(&first), &mut failures);

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
