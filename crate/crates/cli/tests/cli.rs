use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
}

fn fep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fep")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = fep(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn parse_prints_canonical_source() {
    let a = corpus("fig3/a.mlang");
    let out = ok(&["parse", p(&a)]);
    assert_eq!(out, fs::read_to_string(&a).unwrap());
}

#[test]
fn invalid_program_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mlang");
    fs::write(&bad, "fn f(x:int)->int {\n    return y;\n}\n").unwrap();
    assert_eq!(fep(&["parse", p(&bad)]).status.code(), Some(2));
    assert_eq!(fep(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn diff_scripts_for_method_fixes() {
    let a = corpus("fig3/a.mlang");
    let run = |other: &str| ok(&["diff", "--buggy", p(&a), "--fixed", p(&corpus(other))]);
    assert_eq!(run("fig3/b.mlang"), "KEEP int y = x + 1;\nCHANGE y = y % 2; -> y = y % 3;\nKEEP return y;\ncost 1\n");
    assert!(run("fig3/c.mlang").contains("INSERT y = y * 3;"));
    assert!(run("fig3/d.mlang").contains("DELETE y = y % 2;"));
}

#[test]
fn align_json_for_deletion() {
    let out = ok(&["align", "--buggy", p(&corpus("fig3/a.mlang")), "--fixed", p(&corpus("fig3/d.mlang")), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["correspondence"], serde_json::json!([[0, 0], [2, 1]]));
}

#[test]
fn run_with_points_gives_trace() {
    let dir = tempfile::tempdir().unwrap();
    let al = dir.path().join("al.json");
    ok(&["align", "--buggy", p(&corpus("fig1/buggy.mlang")), "--fixed", p(&corpus("fig1/fixed.mlang")), "--json", p(&al)]);
    let out = ok(&["run", "--program", p(&corpus("fig1/buggy.mlang")), "--fn", "f", "--input", r#"{"args":[5]}"#, "--points", p(&al)]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let pps: Vec<u64> = v["trace"].as_array().unwrap().iter().map(|s| s["ppIndex"].as_u64().unwrap()).collect();
    assert_eq!(pps, vec![0, 1, 2, 3, 6]);
    assert_eq!(v["ext"], r#"{"globals":{},"out":[],"return":3}"#);
}

#[test]
fn gen_inputs_writes_pool() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool.json");
    let prog = corpus("fig1/buggy.mlang");
    ok(&["gen-inputs", "--program", p(&prog), "--fn", "f", "--lines", "4,6", "--target", "40", "--seed", "42", "--out", p(&pool)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&pool).unwrap()).unwrap();
    assert_eq!(v["coverageCount"]["4"], 20);
    assert_eq!(v["coverageCount"]["6"], 20);
    let again = dir.path().join("again.json");
    ok(&["gen-inputs", "--program", p(&prog), "--fn", "f", "--lines", "4,6", "--target", "40", "--seed", "42", "--out", p(&again)]);
    assert_eq!(fs::read(&pool).unwrap(), fs::read(&again).unwrap());
    assert_eq!(fep(&["gen-inputs", "--program", p(&prog), "--fn", "f", "--lines", "99"]).status.code(), Some(2));
}

#[test]
fn mutate_writes_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    ok(&["mutate", "--program", p(&corpus("fig3/a.mlang")), "--fn", "test", "--out", p(&out)]);
    let manifest: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.len(), 21);
    for m in &manifest {
        let file = out.join(m["file"].as_str().unwrap());
        ok(&["parse", p(&file)]);
        assert!(m["operatorId"].is_string() && m["locus"]["line"].is_number());
    }
    let one = corpus("fig3/d.mlang");
    let dir2 = dir.path().join("none");
    // a single statement plus return still has two statements; a bare return does not
    let tiny = dir.path().join("tiny.mlang");
    fs::write(&tiny, "fn t(x:int)->int {\n    return x;\n}\n").unwrap();
    assert_eq!(fep(&["mutate", "--program", p(&tiny), "--fn", "t", "--out", p(&dir2)]).status.code(), Some(2));
    ok(&["mutate", "--program", p(&one), "--fn", "test", "--out", p(&dir2)]);
}

#[test]
fn analyze_classify_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (pe, v, csv) = (dir.path().join("pe.jsonl"), dir.path().join("v.jsonl"), dir.path().join("a.csv"));
    ok(&[
        "analyze",
        "--buggy",
        p(&corpus("fig1/buggy.mlang")),
        "--fixed",
        p(&corpus("fig1/fixed.mlang")),
        "--target",
        "60",
        "--paired-out",
        p(&pe),
        "--verdicts-out",
        p(&v),
        "--csv",
        p(&csv),
    ]);
    let reclassified = ok(&["classify", "--paired", p(&pe)]);
    assert_eq!(reclassified, fs::read_to_string(&v).unwrap());

    let (csv2, json2) = (dir.path().join("r.csv"), dir.path().join("r.json"));
    ok(&["report", "--verdicts", p(&v), "--mode", "unit", "--csv", p(&csv2), "--json", p(&json2)]);
    assert_eq!(fs::read_to_string(&csv).unwrap(), fs::read_to_string(&csv2).unwrap());
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json2).unwrap()).unwrap();
    assert!(r["faults"][0]["intFEP"].as_u64().unwrap() > 0);
}

#[test]
fn sys_mode_analysis() {
    let out = ok(&[
        "analyze",
        "--mode",
        "sys",
        "--buggy",
        p(&corpus("sys/deadstat_buggy.mlang")),
        "--fixed",
        p(&corpus("sys/deadstat_fixed.mlang")),
        "--fn",
        "scale",
        "--target",
        "30",
        "--json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["faults"][0]["sysFEP"].as_u64().unwrap() > 0);
    assert_eq!(v["faults"][0]["externallyDetectable"], 0);
}

#[test]
fn small_corpus_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus("");
    let manifest = serde_json::json!({
        "cases": [
            {"caseId": "fig1", "buggyPath": root.join("fig1/buggy.mlang"), "fixedPath": root.join("fig1/fixed.mlang"), "targetFn": "f"},
            {"caseId": "dead", "mode": "sys", "buggyPath": root.join("sys/deadstat_buggy.mlang"), "fixedPath": root.join("sys/deadstat_fixed.mlang"), "targetFn": "scale"}
        ],
        "mutantSubjects": [{"subjectId": "m", "path": root.join("fig3/a.mlang"), "targetFn": "test"}],
        "defaults": {"targetExecutions": 30}
    });
    let mpath = dir.path().join("manifest.json");
    fs::write(&mpath, manifest.to_string()).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["corpus", "run", "--manifest", p(&mpath), "--out", p(&a), "--seed", "7"]);
    ok(&["corpus", "run", "--manifest", p(&mpath), "--out", p(&b), "--seed", "7"]);
    for f in ["report.json", "verdicts.jsonl", "pools.jsonl", "unit.csv", "sys.csv", "mutants.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
