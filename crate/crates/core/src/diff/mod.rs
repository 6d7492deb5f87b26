//! Edit scripts between two versions of a function.
//!
//! The node-level script comes straight from the tree edit distance. The
//! statement-level script lifts it onto block members: a statement whose
//! own header (everything except nested blocks) is matched node-for-node is
//! KEEP, a matched statement with any difference in its header is CHANGE,
//! and unmatched statements are DELETE or INSERT.

pub mod zs;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::minilang::{pretty, AstNode, FunctionDef, NodeId, NodeKind};
pub use zs::{zhang_shasha, Postorder, TreeMapping};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OpKind {
    Keep,
    Change,
    Insert,
    Delete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Node,
    Statement,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub node: NodeId,
    pub kind: NodeKind,
    pub line: u32,
    pub text: String,
    /// Whether the subtree contains a `return` or `throw`.
    pub exits: bool,
}

impl NodeInfo {
    fn of(node: &AstNode) -> Self {
        NodeInfo {
            node: node.id,
            kind: node.kind,
            line: node.span.line,
            text: pretty::header(node),
            exits: node.contains_exit(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOp {
    pub op: OpKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<NodeInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<NodeInfo>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    pub granularity: Granularity,
    pub ops: Vec<EditOp>,
    /// Number of non-KEEP operations.
    pub cost: usize,
}

impl EditScript {
    pub fn is_identity(&self) -> bool {
        self.cost == 0
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.ops.iter().filter(|o| o.op == kind).count()
    }
}

/// Node mapping between two ASTs keyed by node id.
#[derive(Clone, Debug, Default)]
pub struct NodeMapping {
    pub forward: HashMap<NodeId, NodeId>,
    pub backward: HashMap<NodeId, NodeId>,
    pub cost: usize,
}

pub fn node_mapping(buggy: &AstNode, fixed: &AstNode) -> NodeMapping {
    let (pa, ida) = flatten(buggy);
    let (pb, idb) = flatten(fixed);
    let m = zhang_shasha(&pa, &pb);
    let mut out = NodeMapping { cost: m.cost, ..Default::default() };
    for (i, j) in m.pairs {
        out.forward.insert(ida[i], idb[j]);
        out.backward.insert(idb[j], ida[i]);
    }
    out
}

type Label<'a> = (NodeKind, &'a crate::minilang::Token);

fn flatten(root: &AstNode) -> (Postorder<Label<'_>>, Vec<NodeId>) {
    let p = Postorder::build(root, |n| (n.kind, &n.token), |n| &n.children);
    let mut ids = Vec::with_capacity(p.len());
    fn post(n: &AstNode, ids: &mut Vec<NodeId>) {
        for c in &n.children {
            post(c, ids);
        }
        ids.push(n.id);
    }
    post(root, &mut ids);
    (p, ids)
}

/// Node-granularity script between two subtrees.
pub fn tree_edit_distance(buggy: &AstNode, fixed: &AstNode) -> EditScript {
    let mapping = node_mapping(buggy, fixed);
    let a: Vec<&AstNode> = buggy.preorder().collect();
    let b: Vec<&AstNode> = fixed.preorder().collect();
    let ops = merge(&a, &b, &mapping, |x, y| {
        if x.same_label(y) {
            OpKind::Keep
        } else {
            OpKind::Change
        }
    });
    EditScript { granularity: Granularity::Node, cost: mapping.cost, ops }
}

/// Statement-granularity script between two function versions.
pub fn statement_script(buggy: &FunctionDef, fixed: &FunctionDef) -> EditScript {
    let mapping = node_mapping(&buggy.body, &fixed.body);
    lift(&buggy.body, &fixed.body, &mapping)
}

/// Lifts a node mapping onto block-member statements.
pub fn lift(buggy: &AstNode, fixed: &AstNode, mapping: &NodeMapping) -> EditScript {
    let a = block_members(buggy);
    let b = block_members(fixed);
    let b_ids: HashMap<NodeId, &AstNode> = b.iter().map(|n| (n.id, *n)).collect();
    let a_ids: HashMap<NodeId, &AstNode> = a.iter().map(|n| (n.id, *n)).collect();

    // Keep only statement-to-statement pairs.
    let mut stmt_map = NodeMapping::default();
    for s in &a {
        if let Some(t) = mapping.forward.get(&s.id) {
            if b_ids.contains_key(t) {
                stmt_map.forward.insert(s.id, *t);
                stmt_map.backward.insert(*t, s.id);
            }
        }
    }
    debug_assert!(stmt_map.backward.values().all(|s| a_ids.contains_key(s)));

    let ops = merge(&a, &b, &stmt_map, |s, t| {
        if header_kept(s, t, mapping) {
            OpKind::Keep
        } else {
            OpKind::Change
        }
    });
    let cost = ops.iter().filter(|o| o.op != OpKind::Keep).count();
    EditScript { granularity: Granularity::Statement, ops, cost }
}

/// Statements that are direct children of some block, in preorder.
pub fn block_members(root: &AstNode) -> Vec<&AstNode> {
    let mut out = Vec::new();
    fn walk<'a>(n: &'a AstNode, out: &mut Vec<&'a AstNode>) {
        for c in &n.children {
            if n.kind == NodeKind::Block {
                out.push(c);
            }
            walk(c, out);
        }
    }
    walk(root, &mut out);
    out
}

/// Nodes of a statement's own header: descendants reachable without
/// entering a nested block.
pub fn header_nodes(stmt: &AstNode) -> Vec<&AstNode> {
    let mut out = Vec::new();
    fn walk<'a>(n: &'a AstNode, out: &mut Vec<&'a AstNode>) {
        for c in &n.children {
            if c.kind != NodeKind::Block {
                out.push(c);
                walk(c, out);
            }
        }
    }
    walk(stmt, &mut out);
    out
}

fn header_kept(s: &AstNode, t: &AstNode, mapping: &NodeMapping) -> bool {
    if !s.same_label(t) {
        return false;
    }
    let hs = header_nodes(s);
    let ht = header_nodes(t);
    if hs.len() != ht.len() {
        return false;
    }
    let ht_ids: HashMap<NodeId, &AstNode> = ht.iter().map(|n| (n.id, *n)).collect();
    hs.iter().all(|n| {
        mapping
            .forward
            .get(&n.id)
            .and_then(|m| ht_ids.get(m))
            .is_some_and(|m| n.same_label(m))
    })
}

/// Merges two preorder sequences along a mapping that preserves preorder.
fn merge(
    a: &[&AstNode],
    b: &[&AstNode],
    mapping: &NodeMapping,
    pair_kind: impl Fn(&AstNode, &AstNode) -> OpKind,
) -> Vec<EditOp> {
    let mut ops = Vec::with_capacity(a.len().max(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if i < a.len() && !mapping.forward.contains_key(&a[i].id) {
            ops.push(EditOp { op: OpKind::Delete, source: Some(NodeInfo::of(a[i])), target: None });
            i += 1;
        } else if j < b.len() && !mapping.backward.contains_key(&b[j].id) {
            ops.push(EditOp { op: OpKind::Insert, source: None, target: Some(NodeInfo::of(b[j])) });
            j += 1;
        } else {
            let (s, t) = (a[i], b[j]);
            debug_assert_eq!(mapping.forward.get(&s.id), Some(&t.id), "mapping does not preserve preorder");
            ops.push(EditOp {
                op: pair_kind(s, t),
                source: Some(NodeInfo::of(s)),
                target: Some(NodeInfo::of(t)),
            });
            i += 1;
            j += 1;
        }
    }
    ops
}

/// Source lines of the faulty statements named by a statement-level script.
///
/// DELETE and CHANGE use the buggy statement's line. An INSERT has no buggy
/// line, so it borrows the line of the next buggy statement in the script,
/// else the previous one, else the function header.
pub fn fault_lines(script: &EditScript, buggy: &FunctionDef) -> Vec<u32> {
    let mut lines = Vec::new();
    for (k, op) in script.ops.iter().enumerate() {
        match op.op {
            OpKind::Keep => {}
            OpKind::Delete | OpKind::Change => lines.extend(op.source.as_ref().map(|s| s.line)),
            OpKind::Insert => {
                let next = script.ops[k + 1..].iter().find_map(|o| o.source.as_ref());
                let prev = script.ops[..k].iter().rev().find_map(|o| o.source.as_ref());
                lines.push(next.or(prev).map_or(buggy.span.line, |s| s.line));
            }
        }
    }
    lines.sort_unstable();
    lines.dedup();
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;

    fn func(src: &str) -> FunctionDef {
        parse(src).unwrap().functions.remove(0)
    }

    const FIG3A: &str = "fn test(x:int)->int {\n    int y = x + 1;\n    y = y % 2;\n    return y;\n}\n";
    const FIG3B: &str = "fn test(x:int)->int {\n    int y = x + 1;\n    y = y % 3;\n    return y;\n}\n";
    const FIG3C: &str = "fn test(x:int)->int {\n    int y = x + 1;\n    y = y * 3;\n    y = y % 2;\n    return y;\n}\n";
    const FIG3D: &str = "fn test(x:int)->int {\n    int y = x + 1;\n    return y;\n}\n";

    fn ops(s: &EditScript) -> Vec<OpKind> {
        s.ops.iter().map(|o| o.op).collect()
    }

    #[test]
    fn identical_functions_give_all_keep() {
        let a = func(FIG3A);
        let s = statement_script(&a, &a);
        assert_eq!(ops(&s), vec![OpKind::Keep; 3]);
        assert!(s.is_identity());
    }

    #[test]
    fn changed_constant_is_one_change() {
        let s = statement_script(&func(FIG3A), &func(FIG3B));
        assert_eq!(ops(&s), vec![OpKind::Keep, OpKind::Change, OpKind::Keep]);
        let n = tree_edit_distance(&func(FIG3A).body, &func(FIG3B).body);
        assert_eq!(n.cost, 1);
    }

    #[test]
    fn deleted_statement() {
        let s = statement_script(&func(FIG3A), &func(FIG3D));
        assert_eq!(ops(&s), vec![OpKind::Keep, OpKind::Delete, OpKind::Keep]);
        assert_eq!(s.ops[1].source.as_ref().unwrap().text, "y = y % 2;");
    }

    #[test]
    fn inserted_statement() {
        let s = statement_script(&func(FIG3A), &func(FIG3C));
        assert_eq!(ops(&s), vec![OpKind::Keep, OpKind::Insert, OpKind::Keep, OpKind::Keep]);
        assert_eq!(s.ops[1].target.as_ref().unwrap().text, "y = y * 3;");
    }

    #[test]
    fn fault_lines_follow_the_script() {
        let a = func(FIG3A);
        assert_eq!(fault_lines(&statement_script(&a, &func(FIG3B)), &a), vec![3]);
        assert_eq!(fault_lines(&statement_script(&a, &func(FIG3D)), &a), vec![3]);
        // inserted before `y = y % 2;` on line 3
        assert_eq!(fault_lines(&statement_script(&a, &func(FIG3C)), &a), vec![3]);
    }

    #[test]
    fn added_guard_is_an_insert_with_exit() {
        let a = func("fn f(x:int)->int {\n    int y = 10 / x;\n    return y;\n}\n");
        let b = func("fn f(x:int)->int {\n    if (x == 0) {\n        return 0;\n    }\n    int y = 10 / x;\n    return y;\n}\n");
        let s = statement_script(&a, &b);
        assert_eq!(ops(&s), vec![OpKind::Insert, OpKind::Insert, OpKind::Keep, OpKind::Keep]);
        let t = s.ops[0].target.as_ref().unwrap();
        assert_eq!(t.kind, NodeKind::If);
        assert!(t.exits);
    }

    #[test]
    fn node_level_ops_cover_both_trees() {
        let a = func(FIG3A);
        let d = func(FIG3C);
        let s = tree_edit_distance(&a.body, &d.body);
        let src = s.ops.iter().filter(|o| o.source.is_some()).count();
        let dst = s.ops.iter().filter(|o| o.target.is_some()).count();
        assert_eq!(src, a.body.size());
        assert_eq!(dst, d.body.size());
        assert_eq!(s.cost, d.body.size() - a.body.size());
    }

    #[test]
    fn script_json_round_trips() {
        let s = statement_script(&func(FIG3A), &func(FIG3C));
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"INSERT\""));
        let back: EditScript = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
