//! Program-point placement and buggy/fixed point correspondence.
//!
//! Points sit at function entry, at the start of each `if` branch and after
//! statements that complete normally. Loop bodies get no points. For a pair
//! of versions, every matched (KEEP or CHANGE) statement that is not a
//! return/throw gets a point after it, moved past any directly following run
//! of unmatched statements; the two points created by the same matched pair
//! correspond. The buggy side also keeps the points it would have on its
//! own, which then have no partner (buggy pp1 in the delete example).

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{block_members, EditScript, OpKind};
use crate::minilang::{AstNode, FunctionDef, NodeId, NodeKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Version {
    Buggy,
    Fixed,
}

/// Where a point sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "camelCase")]
pub enum Anchor {
    Entry,
    /// After the statement `node` completes normally.
    After { node: NodeId },
    /// First thing inside the then-branch of `if` statement `node`.
    ThenEntry { node: NodeId },
    ElseEntry { node: NodeId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProgramPoint {
    pub pp_index: usize,
    pub anchor: Anchor,
    /// Source line the point follows (entry: the function header).
    pub line: u32,
    pub version: Version,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlignedInstrumentation {
    pub buggy_points: Vec<ProgramPoint>,
    pub fixed_points: Vec<ProgramPoint>,
    /// `(buggy ppIndex, fixed ppIndex)`, increasing in both components.
    pub correspondence: Vec<(usize, usize)>,
}

impl AlignedInstrumentation {
    pub fn fixed_for(&self, buggy: usize) -> Option<usize> {
        self.correspondence.iter().find(|c| c.0 == buggy).map(|c| c.1)
    }

    pub fn buggy_for(&self, fixed: usize) -> Option<usize> {
        self.correspondence.iter().find(|c| c.1 == fixed).map(|c| c.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstrumentError {
    #[error("edit script does not match the functions: {0}")]
    MisalignedScript(String),
}

/// Identity of the matched pair (or branch of it) that created a point.
/// Keyed by buggy node ids on both sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Creator {
    Entry,
    After(NodeId),
    Then(NodeId),
    Else(NodeId),
}

#[derive(Clone, Copy, Debug)]
struct Placed {
    anchor: Anchor,
    line: u32,
    creator: Option<Creator>,
}

type SortKey = (u32, u8, Reverse<NodeId>);

/// Points of a single function on its own (every statement treated as kept).
pub fn instrument_single(f: &FunctionDef, version: Version) -> Vec<ProgramPoint> {
    let mut placed = BTreeMap::new();
    standalone(f, &mut placed);
    number(placed, version)
}

pub fn instrument_pair(
    buggy: &FunctionDef,
    fixed: &FunctionDef,
    script: &EditScript,
) -> Result<AlignedInstrumentation, InstrumentError> {
    let status = Status::from_script(buggy, fixed, script)?;

    let mut bp = BTreeMap::new();
    standalone(buggy, &mut bp);
    let mut fp = BTreeMap::new();
    entry(fixed, &mut fp);
    for (key, p) in paired(&buggy.body, Version::Buggy, &status) {
        bp.insert(key, p);
    }
    for (key, p) in paired(&fixed.body, Version::Fixed, &status) {
        fp.insert(key, p);
    }

    let creators = |placed: &BTreeMap<SortKey, Placed>| -> Vec<Option<Creator>> {
        placed.values().map(|p| p.creator).collect()
    };
    let (bc, fc) = (creators(&bp), creators(&fp));
    let fixed_index: HashMap<Creator, usize> =
        fc.iter().enumerate().filter_map(|(i, c)| c.map(|c| (c, i))).collect();
    let mut correspondence: Vec<(usize, usize)> = Vec::new();
    for (i, c) in bc.iter().enumerate() {
        let Some(j) = c.and_then(|c| fixed_index.get(&c)) else { continue };
        // Keep the correspondence monotone; a crossing pair is dropped.
        if correspondence.last().is_none_or(|&(_, pj)| *j > pj) {
            correspondence.push((i, *j));
        }
    }

    Ok(AlignedInstrumentation {
        buggy_points: number(bp, Version::Buggy),
        fixed_points: number(fp, Version::Fixed),
        correspondence,
    })
}

fn number(placed: BTreeMap<SortKey, Placed>, version: Version) -> Vec<ProgramPoint> {
    placed
        .into_values()
        .enumerate()
        .map(|(i, p)| ProgramPoint { pp_index: i, anchor: p.anchor, line: p.line, version })
        .collect()
}

// Source-order key. A branch entry sorts by its block id, a point after a
// statement by the last node id of that statement; among statements ending
// at the same node the innermost one comes first.
fn key_after(stmt: &AstNode) -> SortKey {
    (stmt.last_id(), 1, Reverse(stmt.id))
}

fn key_branch(block: &AstNode) -> SortKey {
    (block.id, 0, Reverse(block.id))
}

fn entry(f: &FunctionDef, out: &mut BTreeMap<SortKey, Placed>) {
    // Entry precedes the body block, whose id is the smallest in the function.
    let key = (f.body.id, 0, Reverse(NodeId::MAX));
    out.insert(key, Placed { anchor: Anchor::Entry, line: f.span.line, creator: Some(Creator::Entry) });
}

fn standalone(f: &FunctionDef, out: &mut BTreeMap<SortKey, Placed>) {
    entry(f, out);
    fn walk(block: &AstNode, out: &mut BTreeMap<SortKey, Placed>) {
        for stmt in &block.children {
            if stmt.kind == NodeKind::If {
                for (k, b) in stmt.branches().enumerate() {
                    let anchor = branch_anchor(stmt.id, k);
                    out.insert(key_branch(b), Placed { anchor, line: stmt.span.line, creator: None });
                    walk(b, out);
                }
            }
            if !stmt.kind.is_exit() {
                out.insert(key_after(stmt), Placed { anchor: Anchor::After { node: stmt.id }, line: stmt.span.line, creator: None });
            }
        }
    }
    walk(&f.body, out);
}

fn branch_anchor(node: NodeId, k: usize) -> Anchor {
    if k == 0 {
        Anchor::ThenEntry { node }
    } else {
        Anchor::ElseEntry { node }
    }
}

/// Match status of every block-member statement, per side.
struct Status {
    /// buggy id -> fixed id
    forward: HashMap<NodeId, NodeId>,
    /// fixed id -> buggy id
    backward: HashMap<NodeId, NodeId>,
    /// matched pairs whose post-change kind is return/throw, by buggy id
    exits: HashSet<NodeId>,
}

impl Status {
    fn from_script(buggy: &FunctionDef, fixed: &FunctionDef, script: &EditScript) -> Result<Self, InstrumentError> {
        let a: HashMap<NodeId, &AstNode> = block_members(&buggy.body).into_iter().map(|n| (n.id, n)).collect();
        let b: HashMap<NodeId, &AstNode> = block_members(&fixed.body).into_iter().map(|n| (n.id, n)).collect();
        let mut st = Status { forward: HashMap::new(), backward: HashMap::new(), exits: HashSet::new() };
        let (mut seen_a, mut seen_b) = (HashSet::new(), HashSet::new());
        for op in &script.ops {
            if let Some(s) = &op.source {
                if !a.contains_key(&s.node) {
                    return Err(InstrumentError::MisalignedScript(format!("buggy node {} is not a statement", s.node)));
                }
                seen_a.insert(s.node);
            }
            if let Some(t) = &op.target {
                if !b.contains_key(&t.node) {
                    return Err(InstrumentError::MisalignedScript(format!("fixed node {} is not a statement", t.node)));
                }
                seen_b.insert(t.node);
            }
            if let (OpKind::Keep | OpKind::Change, Some(s), Some(t)) = (op.op, &op.source, &op.target) {
                st.forward.insert(s.node, t.node);
                st.backward.insert(t.node, s.node);
                if b[&t.node].kind.is_exit() {
                    st.exits.insert(s.node);
                }
            }
        }
        if seen_a.len() != a.len() || seen_b.len() != b.len() {
            return Err(InstrumentError::MisalignedScript("script does not cover every statement".into()));
        }
        Ok(st)
    }

    /// Buggy id of the pair a statement on `version`'s side belongs to.
    fn pair_of(&self, version: Version, id: NodeId) -> Option<NodeId> {
        match version {
            Version::Buggy => self.forward.contains_key(&id).then_some(id),
            Version::Fixed => self.backward.get(&id).copied(),
        }
    }
}

/// Points produced by walking one side along the script.
fn paired(body: &AstNode, version: Version, status: &Status) -> Vec<(SortKey, Placed)> {
    let mut out = Vec::new();
    let mut stack = vec![body];
    while let Some(block) = stack.pop() {
        let stmts = &block.children;
        for (k, stmt) in stmts.iter().enumerate() {
            let pair = status.pair_of(version, stmt.id);
            if stmt.kind == NodeKind::If {
                for (bi, b) in stmt.branches().enumerate() {
                    if let Some(node) = pair {
                        let creator = if bi == 0 { Creator::Then(node) } else { Creator::Else(node) };
                        let placed = Placed { anchor: branch_anchor(stmt.id, bi), line: stmt.span.line, creator: Some(creator) };
                        out.push((key_branch(b), placed));
                    }
                    stack.push(b);
                }
            }
            let Some(node) = pair else { continue };
            if status.exits.contains(&node) {
                continue;
            }
            // Skip the run of unmatched statements that follows, stopping
            // short of any return/throw in it.
            let mut end = k;
            while end + 1 < stmts.len()
                && status.pair_of(version, stmts[end + 1].id).is_none()
                && !stmts[end + 1].kind.is_exit()
            {
                end += 1;
            }
            let last = &stmts[end];
            let placed = Placed { anchor: Anchor::After { node: last.id }, line: last.span.line, creator: Some(Creator::After(node)) };
            out.push((key_after(last), placed));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::statement_script;
    use crate::minilang::parse;

    fn func(src: &str) -> FunctionDef {
        parse(src).unwrap().functions.remove(0)
    }

    const A: &str = "fn test(x:int)->int {\n    int y = x + 1;\n    y = y % 2;\n    return y;\n}\n";
    const B: &str = "fn test(x:int)->int {\n    int y = x + 1;\n    y = y % 3;\n    return y;\n}\n";
    const C: &str = "fn test(x:int)->int {\n    int y = x + 1;\n    y = y * 3;\n    y = y % 2;\n    return y;\n}\n";
    const D: &str = "fn test(x:int)->int {\n    int y = x + 1;\n    return y;\n}\n";

    fn align(a: &str, b: &str) -> AlignedInstrumentation {
        let (fa, fb) = (func(a), func(b));
        instrument_pair(&fa, &fb, &statement_script(&fa, &fb)).unwrap()
    }

    fn lines(points: &[ProgramPoint]) -> Vec<u32> {
        points.iter().map(|p| p.line).collect()
    }

    #[test]
    fn changed_statement_total_correspondence() {
        let al = align(A, B);
        assert_eq!(al.buggy_points.len(), 3);
        assert_eq!(al.fixed_points.len(), 3);
        assert_eq!(al.correspondence, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn inserted_statement_moves_fixed_pp1() {
        let al = align(A, C);
        assert_eq!(lines(&al.fixed_points), vec![1, 3, 4]);
        assert_eq!(al.fixed_points[1].anchor, Anchor::After { node: func(C).body.children[1].id });
        assert_eq!(al.correspondence, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn deleted_statement_leaves_buggy_pp1_unmatched() {
        let al = align(A, D);
        assert_eq!(al.buggy_points.len(), 3);
        assert_eq!(al.fixed_points.len(), 2);
        assert_eq!(al.correspondence, vec![(0, 0), (2, 1)]);
        assert_eq!(al.fixed_for(1), None);
    }

    #[test]
    fn identical_functions_match_standalone_points() {
        let src = "fn f(x:int)->int {\n    x = 3 * x;\n    if (x > 0) {\n        x = x % 4;\n    } else {\n        x = x + 1;\n    }\n    return x;\n}\n";
        let al = align(src, src);
        assert_eq!(al.buggy_points, al.fixed_points.iter().map(|p| ProgramPoint { version: Version::Buggy, ..p.clone() }).collect::<Vec<_>>());
        assert_eq!(al.buggy_points, instrument_single(&func(src), Version::Buggy));
        // pp0 .. pp6 as in the classic example
        assert_eq!(al.buggy_points.len(), 7);
        assert_eq!(lines(&al.buggy_points), vec![1, 2, 3, 4, 3, 6, 3]);
        assert_eq!(al.correspondence, (0..7).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn no_points_in_loops_or_on_exits() {
        let f = func("fn g(n:int)->int {\n    int s = 0;\n    while (s < n) {\n        s = s + 1;\n    }\n    if (s > 3) {\n        return s;\n    }\n    return 0;\n}\n");
        let pts = instrument_single(&f, Version::Buggy);
        for p in &pts {
            if let Anchor::After { node } = p.anchor {
                let n = f.body.find(node).unwrap();
                assert!(!n.kind.is_exit());
                assert_ne!(n.span.line, 4);
            }
        }
        // entry, after decl, after while, then-entry of the if, after the if
        assert_eq!(pts.len(), 5);
    }

    #[test]
    fn return_only_body_has_just_entry() {
        let a = "fn f(x:int)->int {\n    x = x + 1;\n    return x;\n}\n";
        let b = "fn f(x:int)->int {\n    return x + 1;\n}\n";
        let al = align(a, b);
        for p in &al.fixed_points {
            assert!(!matches!(p.anchor, Anchor::After { .. }), "{p:?}");
        }
        assert_eq!(al.correspondence[0], (0, 0));
    }

    #[test]
    fn misaligned_script_is_rejected() {
        let (fa, fb) = (func(A), func(B));
        let script = statement_script(&fa, &fb);
        let other = func(C);
        assert!(matches!(instrument_pair(&fa, &other, &script), Err(InstrumentError::MisalignedScript(_))));
    }
}
