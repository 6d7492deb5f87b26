//! Helpers shared by the property suite and the acceptance runner.
#![allow(dead_code)]

use fep_core::diff::{zhang_shasha, Postorder, TreeMapping};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    pub label: u8,
    pub children: Vec<Tree>,
}

impl Tree {
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }
}

pub fn postorder(t: &Tree) -> Postorder<u8> {
    Postorder::build(t, |n| n.label, |n| &n.children)
}

pub fn ted(a: &Tree, b: &Tree) -> TreeMapping {
    zhang_shasha(&postorder(a), &postorder(b))
}

/// Every unlabeled ordered tree shape with `n` nodes.
pub fn shapes(n: usize) -> Vec<Tree> {
    forests(n - 1).into_iter().map(|children| Tree { label: 0, children }).collect()
}

fn forests(n: usize) -> Vec<Vec<Tree>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=n {
        for head in shapes(first) {
            for rest in forests(n - first) {
                let mut f = vec![head.clone()];
                f.extend(rest);
                out.push(f);
            }
        }
    }
    out
}

/// Every labeling of `shape` over `alphabet` symbols.
pub fn labelings(shape: &Tree, alphabet: u8) -> Vec<Tree> {
    let n = shape.size();
    let mut out = Vec::new();
    let total = (alphabet as usize).pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut t = shape.clone();
        relabel(&mut t, &mut || {
            let l = (c % alphabet as usize) as u8;
            c /= alphabet as usize;
            l
        });
        out.push(t);
    }
    out
}

fn relabel(t: &mut Tree, next: &mut impl FnMut() -> u8) {
    t.label = next();
    for c in &mut t.children {
        relabel(c, next);
    }
}

pub fn all_trees(n: usize, alphabet: u8) -> Vec<Tree> {
    shapes(n).iter().flat_map(|s| labelings(s, alphabet)).collect()
}

/// Postorder labels plus the proper-ancestor relation.
struct Flat {
    labels: Vec<u8>,
    anc: Vec<Vec<bool>>,
}

fn flat(t: &Tree) -> Flat {
    fn go(t: &Tree, labels: &mut Vec<u8>, desc: &mut Vec<Vec<usize>>) -> Vec<usize> {
        let mut below = Vec::new();
        for c in &t.children {
            below.extend(go(c, labels, desc));
        }
        let me = labels.len();
        labels.push(t.label);
        desc.push(below.clone());
        below.push(me);
        below
    }
    let mut labels = Vec::new();
    let mut desc = Vec::new();
    go(t, &mut labels, &mut desc);
    let n = labels.len();
    let mut anc = vec![vec![false; n]; n];
    for (i, d) in desc.iter().enumerate() {
        for &j in d {
            anc[i][j] = true;
        }
    }
    Flat { labels, anc }
}

/// True when `pairs` (postorder indices) is a valid edit mapping: one-to-one,
/// preserving ancestry and left-to-right order.
pub fn valid_mapping(a: &Tree, b: &Tree, pairs: &[(usize, usize)]) -> bool {
    let (fa, fb) = (flat(a), flat(b));
    for (k, &(i1, j1)) in pairs.iter().enumerate() {
        for &(i2, j2) in &pairs[k + 1..] {
            if (i1 == i2) != (j1 == j2) {
                return false;
            }
            if fa.anc[i1][i2] != fb.anc[j1][j2] || fa.anc[i2][i1] != fb.anc[j2][j1] {
                return false;
            }
            if (i1 < i2) != (j1 < j2) {
                return false;
            }
        }
    }
    true
}

/// Minimal unit-cost edit distance by enumerating every valid mapping.
pub fn brute_force_ted(a: &Tree, b: &Tree) -> usize {
    let (fa, fb) = (flat(a), flat(b));
    let (n, m) = (fa.labels.len(), fb.labels.len());
    let mut best = n + m;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    fn go(i: usize, fa: &Flat, fb: &Flat, pairs: &mut Vec<(usize, usize)>, best: &mut usize) {
        let (n, m) = (fa.labels.len(), fb.labels.len());
        if i == n {
            let relabels = pairs.iter().filter(|&&(x, y)| fa.labels[x] != fb.labels[y]).count();
            *best = (*best).min(relabels + n + m - 2 * pairs.len());
            return;
        }
        go(i + 1, fa, fb, pairs, best);
        let start = pairs.last().map_or(0, |p| p.1 + 1);
        for j in start..m {
            if pairs.iter().all(|&(x, y)| fa.anc[i][x] == fb.anc[j][y]) {
                pairs.push((i, j));
                go(i + 1, fa, fb, pairs, best);
                pairs.pop();
            }
        }
    }
    go(0, &fa, &fb, &mut pairs, &mut best);
    best
}

pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, alphabet: u8) -> Tree {
    // grow by attaching each new node under a random existing node
    let mut parent = vec![usize::MAX];
    for k in 1..n {
        parent.push(rng.gen_range(0..k));
    }
    fn build(i: usize, parent: &[usize], labels: &[u8]) -> Tree {
        let children = (0..parent.len()).filter(|&c| parent[c] == i && c != i).map(|c| build(c, parent, labels)).collect();
        Tree { label: labels[i], children }
    }
    let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..alphabet)).collect();
    build(0, &parent, &labels)
}

/// Random well-typed MiniLang programs over `f(a:int, b:int, c:bool, xs:int[])`.
pub struct ProgramGen<'r> {
    rng: &'r mut ChaCha8Rng,
    scopes: Vec<Vec<String>>,
    fresh: usize,
    out: String,
}

pub const PARAMS: &str = "a:int, b:int, c:bool, xs:int[]";

impl<'r> ProgramGen<'r> {
    pub fn new(rng: &'r mut ChaCha8Rng) -> Self {
        ProgramGen { rng, scopes: vec![vec!["a".into(), "b".into()]], fresh: 0, out: String::new() }
    }

    /// A unit with the target `f` and, when `with_entry`, an entry `main`
    /// that calls it twice and prints a lossy view of the results.
    pub fn unit(mut self, with_entry: bool) -> String {
        self.out.push_str(&format!("fn f({PARAMS})->int {{\n"));
        let n = self.rng.gen_range(2..6);
        for _ in 0..n {
            self.stmt(1, 2);
        }
        let e = self.int_expr(2);
        self.line(1, &format!("return {e};"));
        self.out.push_str("}\n");
        if with_entry {
            self.out.insert_str(0, "entry main;\n\n");
            self.out.push_str(
                "\nfn main(a:int, b:int, c:bool, xs:int[])->void {\n    int r = f(a, b, c, xs);\n    output(r % 3);\n    output(f(b, a, !c, xs) / 16);\n}\n",
            );
        }
        self.out
    }

    fn line(&mut self, depth: usize, s: &str) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn vars(&self) -> Vec<String> {
        self.scopes.iter().flatten().cloned().collect()
    }

    fn stmt(&mut self, depth: usize, nest: usize) {
        let pick = self.rng.gen_range(0..if nest > 0 { 7 } else { 4 });
        match pick {
            0 | 1 => {
                let e = self.int_expr(2);
                let v = format!("v{}", self.fresh);
                self.fresh += 1;
                self.line(depth, &format!("int {v} = {e};"));
                self.scopes.last_mut().unwrap().push(v);
            }
            2 => {
                // loop counters stay read-only so loops terminate
                let vars: Vec<String> = self.vars().into_iter().filter(|v| !v.starts_with('w')).collect();
                let v = vars.choose(self.rng).unwrap().clone();
                let e = self.int_expr(2);
                self.line(depth, &format!("{v} = {e};"));
            }
            3 => {
                let e = self.int_expr(1);
                self.line(depth, &format!("output({e});"));
            }
            4 | 5 => {
                let cond = self.bool_expr(2);
                self.line(depth, &format!("if ({cond}) {{"));
                self.block(depth + 1, nest - 1);
                if self.rng.gen_bool(0.5) {
                    self.line(depth, "} else {");
                    self.block(depth + 1, nest - 1);
                }
                self.line(depth, "}");
            }
            _ => {
                let w = format!("w{}", self.fresh);
                self.fresh += 1;
                let bound = self.rng.gen_range(1..4);
                self.line(depth, &format!("for (int {w} = 0; {w} < {bound}; {w} = {w} + 1) {{"));
                self.scopes.push(vec![w]);
                self.block(depth + 1, nest - 1);
                self.scopes.pop();
                self.line(depth, "}");
            }
        }
    }

    fn block(&mut self, depth: usize, nest: usize) {
        self.scopes.push(Vec::new());
        let n = self.rng.gen_range(1..3);
        for _ in 0..n {
            self.stmt(depth, nest);
        }
        if self.rng.gen_bool(0.15) {
            let e = self.int_expr(1);
            self.line(depth, &format!("return {e};"));
        }
        self.scopes.pop();
    }

    fn int_expr(&mut self, depth: usize) -> String {
        let leaf = depth == 0 || self.rng.gen_bool(0.35);
        if leaf {
            return match self.rng.gen_range(0..5) {
                0 | 1 => self.rng.gen_range(-5..=5).to_string(),
                2 => "len(xs)".to_string(),
                _ => self.vars().choose(self.rng).unwrap().clone(),
            };
        }
        match self.rng.gen_range(0..6) {
            0 => format!("-{}", self.atom(depth - 1)),
            1 => format!("xs[{} % 4]", self.atom(depth - 1)),
            _ => {
                let op = ["+", "-", "*", "/", "%"].choose(self.rng).unwrap();
                let (l, r) = (self.atom(depth - 1), self.atom(depth - 1));
                format!("{l} {op} {r}")
            }
        }
    }

    fn atom(&mut self, depth: usize) -> String {
        let e = self.int_expr(depth);
        if e.contains(' ') || e.starts_with('-') {
            format!("({e})")
        } else {
            e
        }
    }

    fn bool_expr(&mut self, depth: usize) -> String {
        if depth == 0 || self.rng.gen_bool(0.5) {
            let op = ["<", "<=", ">", ">=", "==", "!="].choose(self.rng).unwrap();
            let (l, r) = (self.atom(1), self.atom(1));
            return format!("{l} {op} {r}");
        }
        match self.rng.gen_range(0..4) {
            0 => "c".to_string(),
            1 => format!("!({})", self.bool_expr(depth - 1)),
            _ => {
                let op = ["&&", "||"].choose(self.rng).unwrap();
                format!("({}) {op} ({})", self.bool_expr(depth - 1), self.bool_expr(depth - 1))
            }
        }
    }
}

pub fn random_args(rng: &mut ChaCha8Rng) -> Vec<fep_core::minilang::Value> {
    use fep_core::minilang::Value;
    let len = rng.gen_range(0..5);
    vec![
        Value::Int(rng.gen_range(-20..=20)),
        Value::Int(rng.gen_range(-20..=20)),
        Value::Bool(rng.gen()),
        Value::Array((0..len).map(|_| rng.gen_range(-9..=9)).collect()),
    ]
}
