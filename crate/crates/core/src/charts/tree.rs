use std::fmt;

use crate::labels::ArcLabel;
use crate::num::Scalar;

use super::{ChartError, ScoreSet};

/// Dependency tree over tokens `1..=n` rooted at the artificial position 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DepTree {
    heads: Vec<usize>,
    labels: Vec<ArcLabel>,
}

impl DepTree {
    /// Builds an unlabeled tree from `heads[m - 1] = head of m` and checks
    /// that it is a rooted, acyclic, projective tree.
    pub fn new(heads: Vec<usize>) -> Result<Self, ChartError> {
        let labels = vec![ArcLabel::Null; heads.len()];
        Self::with_labels(heads, labels)
    }

    pub fn with_labels(heads: Vec<usize>, labels: Vec<ArcLabel>) -> Result<Self, ChartError> {
        if labels.len() != heads.len() {
            return Err(ChartError::DimensionMismatch {
                expected: heads.len(),
                found: labels.len(),
            });
        }
        let tree = DepTree { heads, labels };
        tree.validate()?;
        Ok(tree)
    }

    /// Skips validation; callers guarantee well-formedness.
    pub(crate) fn from_parts_unchecked(heads: Vec<usize>, labels: Vec<ArcLabel>) -> Self {
        debug_assert_eq!(heads.len(), labels.len());
        DepTree { heads, labels }
    }

    pub fn n(&self) -> usize {
        self.heads.len()
    }

    /// Heads of modifiers `1..=n`, in order.
    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn labels(&self) -> &[ArcLabel] {
        &self.labels
    }

    #[inline]
    pub fn head(&self, m: usize) -> usize {
        self.heads[m - 1]
    }

    #[inline]
    pub fn label(&self, m: usize) -> ArcLabel {
        self.labels[m - 1]
    }

    pub fn set_label(&mut self, m: usize, label: ArcLabel) {
        self.labels[m - 1] = label;
    }

    /// Same skeleton with every label reset to `Null`.
    pub fn unlabeled(&self) -> DepTree {
        DepTree {
            heads: self.heads.clone(),
            labels: vec![ArcLabel::Null; self.heads.len()],
        }
    }

    /// Children of `h` in increasing position order.
    pub fn children(&self, h: usize) -> Vec<usize> {
        (1..=self.n()).filter(|&m| self.head(m) == h).collect()
    }

    /// Arcs `(head, modifier)` for modifiers `1..=n`.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.heads.iter().enumerate().map(|(i, &h)| (h, i + 1))
    }

    pub fn is_ancestor(&self, anc: usize, mut node: usize) -> bool {
        let mut steps = 0;
        while node != 0 {
            if node == anc {
                return true;
            }
            node = self.head(node);
            steps += 1;
            if steps > self.n() {
                return false;
            }
        }
        anc == 0
    }

    fn validate(&self) -> Result<(), ChartError> {
        let n = self.n();
        for (i, &h) in self.heads.iter().enumerate() {
            let m = i + 1;
            if h > n {
                return Err(ChartError::InvalidTree(format!("head {} of {} out of range", h, m)));
            }
            if h == m {
                return Err(ChartError::InvalidTree(format!("self-loop at {}", m)));
            }
        }
        for m in 1..=n {
            let mut node = m;
            let mut steps = 0;
            while node != 0 {
                node = self.head(node);
                steps += 1;
                if steps > n {
                    return Err(ChartError::InvalidTree(format!("cycle through {}", m)));
                }
            }
        }
        for m in 1..=n {
            let h = self.head(m);
            let (lo, hi) = if h < m { (h, m) } else { (m, h) };
            for k in lo + 1..hi {
                if !self.is_ancestor(h, k) {
                    return Err(ChartError::InvalidTree(format!(
                        "arc {}->{} is not projective (covers {})",
                        h, m, k
                    )));
                }
            }
        }
        Ok(())
    }

    /// Inclusive yield `(left, right)` of every position `0..=n`.
    pub fn yields(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut spans: Vec<(usize, usize)> = (0..=n).map(|k| (k, k)).collect();
        for m in 1..=n {
            let mut node = m;
            while node != 0 {
                let h = self.head(node);
                let (l, r) = spans[h];
                spans[h] = (l.min(m), r.max(m));
                node = h;
            }
        }
        spans
    }

    /// Descendants of `node` (including itself), in position order.
    pub fn descendants(&self, node: usize) -> Vec<usize> {
        (1..=self.n()).filter(|&k| self.is_ancestor(node, k)).collect()
    }
}

impl fmt::Display for DepTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .arcs()
            .map(|(h, m)| {
                let l = self.label(m);
                if l.is_null() {
                    format!("{}->{}", h, m)
                } else {
                    format!("{}-{}->{}", h, l, m)
                }
            })
            .collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// Score of an unlabeled tree: arcs, adjacent siblings ordered outward from
/// the head on each side, and the left/right boundary scores of every
/// non-root yield.
pub fn tree_score<T: Scalar>(scores: &ScoreSet<T>, tree: &DepTree) -> Result<T, ChartError> {
    if scores.n() != tree.n() {
        return Err(ChartError::DimensionMismatch {
            expected: scores.n(),
            found: tree.n(),
        });
    }
    tree.validate()?;
    Ok(tree_score_unchecked(scores, tree))
}

pub(crate) fn tree_score_unchecked<T: Scalar>(scores: &ScoreSet<T>, tree: &DepTree) -> T {
    let n = tree.n();
    let mut total = T::zero();
    for (h, m) in tree.arcs() {
        total += scores.arc(h, m);
    }
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for (h, m) in tree.arcs() {
        kids[h].push(m);
    }
    for (h, ch) in kids.iter().enumerate() {
        let right: Vec<usize> = ch.iter().copied().filter(|&m| m > h).collect();
        for w in right.windows(2) {
            total += scores.sib(h, w[0], w[1]);
        }
        let left: Vec<usize> = ch.iter().rev().copied().filter(|&m| m < h).collect();
        for w in left.windows(2) {
            total += scores.sib(h, w[0], w[1]);
        }
    }
    let yields = tree.yields();
    for (k, &(l, r)) in yields.iter().enumerate().skip(1) {
        total += scores.span_left(k, l) + scores.span_right(k, r);
    }
    total
}

/// Every projective tree over `n` tokens rooted at 0 (the root may take
/// several children), as head vectors.
///
/// Built by recursive span splitting: the root's children partition
/// `1..=n` into consecutive yields, and each headed yield splits into
/// consecutive child yields on either side of its head.
pub fn enumerate_projective_trees(n: usize) -> Vec<Vec<usize>> {
    let mut memo: Vec<Vec<Option<Vec<Vec<(usize, usize)>>>>> = vec![vec![None; n + 2]; n + 2];
    let mut out = Vec::new();
    for arcs in sequences(1, n, 0, &mut memo) {
        let mut heads = vec![0usize; n];
        for (h, m) in arcs {
            heads[m - 1] = h;
        }
        out.push(heads);
    }
    out
}

// Arc sets for partitions of [lo, hi] into consecutive headed yields, every
// yield head attached to `parent`.
fn sequences(
    lo: usize,
    hi: usize,
    parent: usize,
    memo: &mut Vec<Vec<Option<Vec<Vec<(usize, usize)>>>>>,
) -> Vec<Vec<(usize, usize)>> {
    if lo > hi {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for end in lo..=hi {
        let firsts = headed(lo, end, memo);
        let rests = sequences(end + 1, hi, parent, memo);
        for (head, arcs) in &firsts {
            for rest in &rests {
                let mut all = arcs.clone();
                all.push((parent, *head));
                all.extend_from_slice(rest);
                out.push(all);
            }
        }
    }
    out
}

// (head, internal arcs) for every subtree whose yield is exactly [lo, hi].
fn headed(
    lo: usize,
    hi: usize,
    memo: &mut Vec<Vec<Option<Vec<Vec<(usize, usize)>>>>>,
) -> Vec<(usize, Vec<(usize, usize)>)> {
    let mut out = Vec::new();
    for h in lo..=hi {
        let left = sequences_cached(lo, h.wrapping_sub(1), h, memo);
        let right = sequences_cached(h + 1, hi, h, memo);
        for l in &left {
            for r in &right {
                let mut arcs = l.clone();
                arcs.extend_from_slice(r);
                out.push((h, arcs));
            }
        }
    }
    out
}

fn sequences_cached(
    lo: usize,
    hi: usize,
    parent: usize,
    memo: &mut Vec<Vec<Option<Vec<Vec<(usize, usize)>>>>>,
) -> Vec<Vec<(usize, usize)>> {
    if hi == usize::MAX || lo > hi {
        return vec![Vec::new()];
    }
    // memoized with a placeholder parent 0, then relabelled
    if memo[lo][hi].is_none() {
        let v = sequences(lo, hi, usize::MAX, memo);
        memo[lo][hi] = Some(v);
    }
    memo[lo][hi]
        .as_ref()
        .unwrap()
        .iter()
        .map(|arcs| {
            arcs.iter()
                .map(|&(h, m)| if h == usize::MAX { (parent, m) } else { (h, m) })
                .collect()
        })
        .collect()
}
