//! Zhang–Shasha ordered tree edit distance with mapping recovery.
//!
//! Unit costs for insert, delete and relabel. Among minimal scripts the one
//! with the fewest relabels is chosen (so identical nodes are kept rather
//! than changed), and backtracking prefers delete, then insert, then match,
//! which leaves matches on earlier postorder nodes.

/// A tree flattened in postorder (1-based internally).
#[derive(Clone, Debug)]
pub struct Postorder<L> {
    labels: Vec<L>,
    lld: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<L> Postorder<L> {
    pub fn build<'t, T>(root: &'t T, label: impl Fn(&'t T) -> L, children: impl Fn(&'t T) -> &'t [T]) -> Self {
        fn walk<'t, T, L>(
            node: &'t T,
            label: &impl Fn(&'t T) -> L,
            children: &impl Fn(&'t T) -> &'t [T],
            labels: &mut Vec<L>,
            lld: &mut Vec<usize>,
        ) -> usize {
            let mut leftmost = None;
            for child in children(node) {
                let child_lld = walk(child, label, children, labels, lld);
                leftmost.get_or_insert(child_lld);
            }
            labels.push(label(node));
            let me = labels.len() - 1;
            let l = leftmost.unwrap_or(me);
            lld.push(l);
            l
        }

        let mut labels = Vec::new();
        let mut lld = Vec::new();
        walk(root, &label, &children, &mut labels, &mut lld);

        // keyroots: the highest node for every distinct leftmost leaf
        let n = labels.len();
        let mut seen = vec![false; n];
        let mut keyroots = Vec::new();
        for i in (0..n).rev() {
            if !seen[lld[i]] {
                seen[lld[i]] = true;
                keyroots.push(i + 1);
            }
        }
        keyroots.sort_unstable();
        Postorder { labels, lld: lld.into_iter().map(|l| l + 1).collect(), keyroots }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &L {
        &self.labels[i]
    }

    fn lld1(&self, i: usize) -> usize {
        self.lld[i - 1]
    }
}

/// Node mapping between two trees, as 0-based postorder index pairs sorted
/// by source index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeMapping {
    pub pairs: Vec<(usize, usize)>,
    /// Unit edit cost: relabels + deletions + insertions.
    pub cost: usize,
    pub relabels: usize,
}

pub fn zhang_shasha<L: PartialEq>(a: &Postorder<L>, b: &Postorder<L>) -> TreeMapping {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return TreeMapping { pairs: Vec::new(), cost: n + m, relabels: 0 };
    }
    let mut zs = Matcher::new(a, b);
    for &i in &a.keyroots {
        for &j in &b.keyroots {
            zs.forest(i, j);
        }
    }
    let mut pairs = zs.backtrack();
    pairs.sort_unstable();
    let relabels = pairs.iter().filter(|&&(i, j)| a.label(i) != b.label(j)).count();
    let cost = relabels + (n - pairs.len()) + (m - pairs.len());
    TreeMapping { pairs, cost, relabels }
}

struct Matcher<'t, L> {
    a: &'t Postorder<L>,
    b: &'t Postorder<L>,
    // Composite weight: every edit costs `unit`, a relabel one extra, so
    // minimal composite cost is minimal unit cost with fewest relabels.
    unit: u64,
    tree: Vec<Vec<u64>>,
    fd: Vec<Vec<u64>>,
}

impl<'t, L: PartialEq> Matcher<'t, L> {
    fn new(a: &'t Postorder<L>, b: &'t Postorder<L>) -> Self {
        let (n, m) = (a.len(), b.len());
        Matcher {
            a,
            b,
            unit: (n + m + 1) as u64,
            tree: vec![vec![0; m + 1]; n + 1],
            fd: vec![vec![0; m + 1]; n + 1],
        }
    }

    fn relabel(&self, i: usize, j: usize) -> u64 {
        if self.a.label(i - 1) == self.b.label(j - 1) {
            0
        } else {
            self.unit + 1
        }
    }

    fn forest(&mut self, i: usize, j: usize) {
        let (li, lj) = (self.a.lld1(i), self.b.lld1(j));
        let w = self.unit;
        self.fd[li - 1][lj - 1] = 0;
        for di in li..=i {
            self.fd[di][lj - 1] = self.fd[di - 1][lj - 1] + w;
        }
        for dj in lj..=j {
            self.fd[li - 1][dj] = self.fd[li - 1][dj - 1] + w;
        }
        for di in li..=i {
            for dj in lj..=j {
                let del = self.fd[di - 1][dj] + w;
                let ins = self.fd[di][dj - 1] + w;
                if self.a.lld1(di) == li && self.b.lld1(dj) == lj {
                    let rel = self.fd[di - 1][dj - 1] + self.relabel(di, dj);
                    let best = del.min(ins).min(rel);
                    self.fd[di][dj] = best;
                    self.tree[di][dj] = best;
                } else {
                    let sub = self.fd[self.a.lld1(di) - 1][self.b.lld1(dj) - 1] + self.tree[di][dj];
                    self.fd[di][dj] = del.min(ins).min(sub);
                }
            }
        }
    }

    fn backtrack(&mut self) -> Vec<(usize, usize)> {
        let w = self.unit;
        let mut pairs = Vec::new();
        let mut pending = vec![(self.a.len(), self.b.len())];
        let mut first = true;
        while let Some((last_row, last_col)) = pending.pop() {
            // The root pair's table is still in place from the last keyroot pass.
            if !first {
                self.forest(last_row, last_col);
            }
            first = false;
            let first_row = self.a.lld1(last_row) - 1;
            let first_col = self.b.lld1(last_col) - 1;
            let (mut row, mut col) = (last_row, last_col);
            while row > first_row || col > first_col {
                let here = self.fd[row][col];
                if row > first_row && self.fd[row - 1][col] + w == here {
                    row -= 1;
                } else if col > first_col && self.fd[row][col - 1] + w == here {
                    col -= 1;
                } else if self.a.lld1(row) == self.a.lld1(last_row) && self.b.lld1(col) == self.b.lld1(last_col) {
                    debug_assert_eq!(self.fd[row - 1][col - 1] + self.relabel(row, col), here);
                    pairs.push((row - 1, col - 1));
                    row -= 1;
                    col -= 1;
                } else {
                    pending.push((row, col));
                    row = self.a.lld1(row) - 1;
                    col = self.b.lld1(col) - 1;
                }
            }
        }
        pairs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct T(char, Vec<T>);

    fn post(t: &T) -> Postorder<char> {
        Postorder::build(t, |n| n.0, |n| &n.1)
    }

    #[test]
    fn keyroots_and_leftmost_leaves() {
        // f(d(a, c(b)), e)  postorder: a b c d e f
        let t = T('f', vec![T('d', vec![T('a', vec![]), T('c', vec![T('b', vec![])])]), T('e', vec![])]);
        let p = post(&t);
        assert_eq!(p.labels, vec!['a', 'b', 'c', 'd', 'e', 'f']);
        assert_eq!(p.lld, vec![1, 2, 2, 1, 5, 1]);
        assert_eq!(p.keyroots, vec![3, 5, 6]);
    }

    #[test]
    fn classic_example_distance_two() {
        // Zhang & Shasha's running example: f(d(a,c(b)),e) vs f(c(d(a,b)),e)
        let t1 = T('f', vec![T('d', vec![T('a', vec![]), T('c', vec![T('b', vec![])])]), T('e', vec![])]);
        let t2 = T('f', vec![T('c', vec![T('d', vec![T('a', vec![]), T('b', vec![])])]), T('e', vec![])]);
        assert_eq!(zhang_shasha(&post(&t1), &post(&t2)).cost, 2);
    }

    #[test]
    fn identical_trees_map_everything() {
        let t = T('a', vec![T('b', vec![]), T('c', vec![T('a', vec![])])]);
        let m = zhang_shasha(&post(&t), &post(&t));
        assert_eq!(m.cost, 0);
        assert_eq!(m.pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn prefers_keep_over_change_on_ties() {
        // a(b, c) vs a(c, b): delete+insert keeps two nodes, two relabels keep one.
        let t1 = T('a', vec![T('b', vec![]), T('c', vec![])]);
        let t2 = T('a', vec![T('c', vec![]), T('b', vec![])]);
        let m = zhang_shasha(&post(&t1), &post(&t2));
        assert_eq!(m.cost, 2);
        assert_eq!(m.relabels, 0);
    }
}
