//! Conversion between sentiment tuples and constrained latent trees.
//!
//! Stage 1 observes expression spans as root-attached, single-rooted
//! subtrees. Stage 2 observes, for one expression, its holder and target
//! spans as single-rooted subtrees hanging off expression words. Internal
//! structure of every span stays latent.
//!
//! Token indices in [`Span`] are 0-based over the sentence; tree positions
//! are shifted by one because position 0 is the artificial root.

mod mask;

use std::collections::BTreeSet;
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charts::DepTree;
use crate::labels::{ArcLabel, Polarity};

pub use mask::ConstraintMask;

/// Inclusive token interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn single(t: usize) -> Self {
        Span { start: t, end: t }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn tokens(&self) -> impl Iterator<Item = usize> {
        self.start..=self.end
    }

    /// Tree positions covered by this span.
    fn positions(&self) -> std::ops::RangeInclusive<usize> {
        self.start + 1..=self.end + 1
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Sorts, then merges overlapping or adjacent segments.
pub fn normalize_spans(spans: &[Span]) -> Vec<Span> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    let mut out: Vec<Span> = Vec::with_capacity(sorted.len());
    for s in sorted {
        match out.last_mut() {
            Some(last) if s.start <= last.end + 1 => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

/// Maximal contiguous runs of a token set.
pub fn spans_from_tokens(tokens: &BTreeSet<usize>) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::new();
    for &t in tokens {
        match out.last_mut() {
            Some(last) if last.end + 1 == t => last.end = t,
            _ => out.push(Span::single(t)),
        }
    }
    out
}

pub fn token_set(spans: &[Span]) -> BTreeSet<usize> {
    spans.iter().flat_map(|s| s.tokens()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentTuple {
    pub holder: Vec<Span>,
    pub target: Vec<Span>,
    pub expression: Vec<Span>,
    pub polarity: Polarity,
}

impl SentimentTuple {
    pub fn new(holder: Vec<Span>, target: Vec<Span>, expression: Vec<Span>, polarity: Polarity) -> Self {
        SentimentTuple {
            holder,
            target,
            expression,
            polarity,
        }
    }

    /// Total token count over all roles.
    pub fn length(&self) -> usize {
        token_set(&self.holder).len() + token_set(&self.target).len() + token_set(&self.expression).len()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("tuple {tuple}: span {span} out of bounds for {n} tokens")]
    OutOfBounds { tuple: usize, span: Span, n: usize },
    #[error("tuple {tuple}: expression has no segments")]
    EmptyExpression { tuple: usize },
    #[error("tuple {tuple}: span {span} overlaps another observed span")]
    Overlap { tuple: usize, span: Span },
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Gold labels of the annotation-bearing arcs of one stage.
///
/// Stage 1 labels every root arc; stage 2 labels every arc leaving the
/// expression. Whichever of these arcs a latent tree uses, its label is
/// fixed by where the modifier lies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledTargets {
    n: usize,
    arcs: Vec<(usize, usize, ArcLabel)>,
    lookup: Vec<Option<ArcLabel>>,
}

impl LabeledTargets {
    fn new(n: usize) -> Self {
        LabeledTargets {
            n,
            arcs: Vec::new(),
            lookup: vec![None; (n + 1) * (n + 1)],
        }
    }

    fn push(&mut self, h: usize, m: usize, label: ArcLabel) {
        self.arcs.push((h, m, label));
        self.lookup[h * (self.n + 1) + m] = Some(label);
    }

    /// Targets from explicit `(head, modifier, label)` triples.
    pub fn from_arcs(n: usize, arcs: &[(usize, usize, ArcLabel)]) -> Self {
        let mut t = Self::new(n);
        for &(h, m, l) in arcs {
            assert!(h <= n && (1..=n).contains(&m) && h != m, "arc ({h}, {m}) invalid for n = {n}");
            t.push(h, m, l);
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(head, modifier, gold label)` triples.
    pub fn arcs(&self) -> &[(usize, usize, ArcLabel)] {
        &self.arcs
    }

    pub fn get(&self, h: usize, m: usize) -> Option<ArcLabel> {
        self.lookup[h * (self.n + 1) + m]
    }

    /// Copy of `tree` with gold labels on annotation-bearing arcs and
    /// `Null` elsewhere.
    pub fn label_tree(&self, tree: &DepTree) -> DepTree {
        let labels = tree
            .arcs()
            .map(|(h, m)| self.get(h, m).unwrap_or(ArcLabel::Null))
            .collect();
        DepTree::from_parts_unchecked(tree.heads().to_vec(), labels)
    }
}

/// An expression with all the roles annotated for it, possibly merged from
/// several tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpressionInstance {
    pub expression: Vec<Span>,
    pub polarity: Polarity,
    pub holders: Vec<Span>,
    pub targets: Vec<Span>,
    /// Index of the first tuple contributing to this instance.
    pub tuple: usize,
}

fn check_bounds(n: usize, tuple: usize, spans: &[Span]) -> Result<(), ConstraintError> {
    for &span in spans {
        if span.start > span.end || span.end >= n {
            return Err(ConstraintError::OutOfBounds { tuple, span, n });
        }
    }
    Ok(())
}

/// Groups tuples by expression (identical normalized segment lists).
pub fn group_by_expression(n: usize, tuples: &[SentimentTuple]) -> Result<Vec<ExpressionInstance>, ConstraintError> {
    let mut out: Vec<ExpressionInstance> = Vec::new();
    for (i, t) in tuples.iter().enumerate() {
        if t.expression.is_empty() {
            return Err(ConstraintError::EmptyExpression { tuple: i });
        }
        check_bounds(n, i, &t.expression)?;
        check_bounds(n, i, &t.holder)?;
        check_bounds(n, i, &t.target)?;
        let expression = normalize_spans(&t.expression);
        match out.iter_mut().find(|e| e.expression == expression) {
            Some(inst) => {
                if inst.polarity != t.polarity {
                    warn!(
                        "tuple {}: polarity {} conflicts with {} on the same expression; keeping the first",
                        i, t.polarity, inst.polarity
                    );
                }
                inst.holders.extend_from_slice(&t.holder);
                inst.targets.extend_from_slice(&t.target);
            }
            None => out.push(ExpressionInstance {
                expression,
                polarity: t.polarity,
                holders: t.holder.clone(),
                targets: t.target.clone(),
                tuple: i,
            }),
        }
    }
    for inst in &mut out {
        inst.holders = normalize_spans(&inst.holders);
        inst.targets = normalize_spans(&inst.targets);
    }
    Ok(out)
}

/// Forces `span` to be a single-rooted subtree whose head attaches to one
/// of `heads_outside` through a gated arc.
fn observe_span(mask: &mut ConstraintMask, span: Span, outside_heads: impl Fn(usize) -> bool) {
    let n = mask.n();
    let (l, r) = (span.start + 1, span.end + 1);
    for m in l..=r {
        for h in 0..=n {
            if h == m || (l..=r).contains(&h) {
                continue;
            }
            if outside_heads(h) {
                mask.gate_arc(h, m);
            } else {
                mask.forbid_arc(h, m);
            }
        }
        mask.require_yield(m, l, r);
    }
}

/// Stage-1 constraints: each expression segment is a single-rooted
/// subtree attached to the root; other words attach freely outside the
/// segments. Complete segments carry the polarity label on their root
/// arcs, earlier segments of a discontinuous expression carry
/// `Incomplete`, everything else `Null`.
pub fn build_stage1_mask(
    n: usize,
    tuples: &[SentimentTuple],
) -> Result<(ConstraintMask, LabeledTargets), ConstraintError> {
    let instances = group_by_expression(n, tuples)?;
    // (segment, label, tuple index), deduplicated
    let mut segments: Vec<(Span, ArcLabel, usize)> = Vec::new();
    for inst in &instances {
        let last = inst.expression.len() - 1;
        for (k, &seg) in inst.expression.iter().enumerate() {
            let label = if k == last {
                ArcLabel::Expression(inst.polarity)
            } else {
                ArcLabel::Incomplete
            };
            if let Some(existing) = segments.iter_mut().find(|(s, _, _)| *s == seg) {
                if existing.1 == ArcLabel::Incomplete {
                    existing.1 = label;
                }
                continue;
            }
            if segments.iter().any(|(s, _, _)| s.overlaps(&seg)) {
                return Err(ConstraintError::Overlap { tuple: inst.tuple, span: seg });
            }
            segments.push((seg, label, inst.tuple));
        }
    }
    segments.sort_by_key(|s| s.0);

    let mut region = vec![None; n + 1];
    for (idx, (seg, _, _)) in segments.iter().enumerate() {
        for p in seg.positions() {
            region[p] = Some(idx);
        }
    }
    let mut mask = ConstraintMask::all_permissive(n);
    for (seg, _, _) in &segments {
        observe_span(&mut mask, *seg, |h| h == 0);
    }
    // free words may not hang below expression words
    for m in 1..=n {
        if region[m].is_none() {
            for h in 1..=n {
                if region[h].is_some() {
                    mask.forbid_arc(h, m);
                }
            }
        }
    }
    let mut targets = LabeledTargets::new(n);
    for m in 1..=n {
        let label = region[m].map_or(ArcLabel::Null, |idx| segments[idx].1);
        targets.push(0, m, label);
    }
    Ok((mask, targets))
}

/// Stage-2 constraints for one expression: the tree hangs from a single
/// expression word below the root, each holder/target span is a
/// single-rooted subtree attached to an expression word, and the remaining
/// words attach to expression words or to each other.
pub fn build_stage2_mask(
    n: usize,
    expression: &[Span],
    holders: &[Span],
    targets: &[Span],
) -> Result<(ConstraintMask, LabeledTargets), ConstraintError> {
    if expression.is_empty() {
        return Err(ConstraintError::EmptyExpression { tuple: 0 });
    }
    check_bounds(n, 0, expression)?;
    check_bounds(n, 0, holders)?;
    check_bounds(n, 0, targets)?;
    let expression = normalize_spans(expression);
    let holders = normalize_spans(holders);
    let targets = normalize_spans(targets);

    #[derive(Clone, Copy, PartialEq)]
    enum Region {
        Free,
        Expr,
        Role(ArcLabel),
    }
    let mut region = vec![Region::Free; n + 1];
    for s in &expression {
        for p in s.positions() {
            region[p] = Region::Expr;
        }
    }
    for (spans, label) in [(&holders, ArcLabel::Holder), (&targets, ArcLabel::Target)] {
        for s in spans.iter() {
            for p in s.positions() {
                if region[p] != Region::Free {
                    return Err(ConstraintError::Overlap { tuple: 0, span: *s });
                }
                region[p] = Region::Role(label);
            }
        }
    }
    let is_expr = |p: usize| p >= 1 && region[p] == Region::Expr;

    let mut mask = ConstraintMask::all_permissive(n);
    for m in 1..=n {
        match region[m] {
            Region::Expr => {
                for h in 1..=n {
                    if !is_expr(h) {
                        mask.forbid_arc(h, m);
                    }
                }
                mask.gate_arc(0, m);
                mask.require_yield(m, 1, n);
            }
            Region::Free => {
                mask.forbid_arc(0, m);
                for h in 1..=n {
                    if matches!(region[h], Region::Role(_)) {
                        mask.forbid_arc(h, m);
                    }
                }
            }
            Region::Role(_) => {}
        }
    }
    for s in holders.iter().chain(targets.iter()) {
        observe_span(&mut mask, *s, is_expr);
    }

    let mut labeled = LabeledTargets::new(n);
    for h in 1..=n {
        if !is_expr(h) {
            continue;
        }
        for m in 1..=n {
            let label = match region[m] {
                Region::Expr => continue,
                Region::Free => ArcLabel::Null,
                Region::Role(l) => l,
            };
            labeled.push(h, m, label);
        }
    }
    Ok((mask, labeled))
}

/// Structural stage-2 mask for decoding: rooted in `expression`, with no
/// observed roles.
pub fn stage2_decode_mask(n: usize, expression: &[Span]) -> Result<ConstraintMask, ConstraintError> {
    build_stage2_mask(n, expression, &[], &[]).map(|(m, _)| m)
}

fn yield_span(yields: &[(usize, usize)], node: usize) -> Span {
    let (l, r) = yields[node];
    Span::new(l - 1, r - 1)
}

/// Expressions read off the root's labeled children.
///
/// Each `Incomplete` segment joins the nearest complete expression to its
/// right, or failing that to its left; with no complete expression at all
/// it is dropped. Output is sorted by first segment.
pub fn recover_stage1(tree: &DepTree) -> Vec<(Vec<Span>, Polarity)> {
    let yields = tree.yields();
    let mut complete: Vec<(Vec<Span>, Polarity)> = Vec::new();
    let mut incomplete: Vec<Span> = Vec::new();
    for r in tree.children(0) {
        match tree.label(r) {
            ArcLabel::Expression(p) => complete.push((vec![yield_span(&yields, r)], p)),
            ArcLabel::Incomplete => incomplete.push(yield_span(&yields, r)),
            _ => {}
        }
    }
    complete.sort_by_key(|c| c.0[0]);
    if !complete.is_empty() {
        for seg in incomplete {
            let idx = complete
                .iter()
                .position(|c| c.0[0].start > seg.end)
                .unwrap_or(complete.len() - 1);
            complete[idx].0.push(seg);
        }
    }
    for c in &mut complete {
        c.0.sort();
    }
    complete.sort_by_key(|c| c.0[0]);
    complete
}

/// Holder and target spans hanging off `expression` in a labeled
/// stage-2 tree.
///
/// Each labeled arc contributes its own yield; adjacent yields of two arcs
/// stay separate segments. A yield excludes any descendant subtree that is
/// itself reached by a non-null arc, so tokens are never claimed twice.
/// The tree must hang from a single expression word and keep expression
/// words below expression words.
pub fn recover_stage2(tree: &DepTree, expression: &[Span]) -> Result<(Vec<Span>, Vec<Span>), ConstraintError> {
    let n = tree.n();
    check_bounds(n, 0, expression).map_err(|e| ConstraintError::Contract(e.to_string()))?;
    let mut in_expr = vec![false; n + 1];
    for s in expression {
        for p in s.positions() {
            in_expr[p] = true;
        }
    }
    let roots = tree.children(0);
    if roots.len() != 1 || !in_expr[roots[0]] {
        return Err(ConstraintError::Contract(format!(
            "stage-2 tree must have exactly one root child inside the expression, found {:?}",
            roots
        )));
    }
    if let Some(e) = (1..=n).find(|&p| in_expr[p] && tree.head(p) != 0 && !in_expr[tree.head(p)]) {
        return Err(ConstraintError::Contract(format!(
            "expression word {} hangs below non-expression word {}",
            e,
            tree.head(e)
        )));
    }
    let mut holders = Vec::new();
    let mut targets = Vec::new();
    for (h, m) in tree.arcs() {
        if h == 0 || !in_expr[h] || in_expr[m] {
            continue;
        }
        let bucket = match tree.label(m) {
            ArcLabel::Holder => &mut holders,
            ArcLabel::Target => &mut targets,
            _ => continue,
        };
        let mut claimed = BTreeSet::new();
        for d in tree.descendants(m) {
            if d != m && !tree.label(d).is_null() {
                claimed.extend(tree.descendants(d));
            }
        }
        let own: BTreeSet<usize> = tree
            .descendants(m)
            .into_iter()
            .filter(|d| !claimed.contains(d))
            .map(|d| d - 1)
            .collect();
        bucket.extend(spans_from_tokens(&own));
    }
    holders.sort();
    targets.sort();
    Ok((holders, targets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{brute_force, enumerate_projective_trees, BruteMode, ScoreSet};

    fn legal_trees(mask: &ConstraintMask) -> Vec<DepTree> {
        enumerate_projective_trees(mask.n())
            .into_iter()
            .map(|h| DepTree::new(h).unwrap())
            .filter(|t| mask.permits(t))
            .collect()
    }

    fn tuple(h: &[Span], t: &[Span], e: &[Span], p: Polarity) -> SentimentTuple {
        SentimentTuple::new(h.to_vec(), t.to_vec(), e.to_vec(), p)
    }

    #[test]
    fn normalize_merges_adjacent() {
        let s = normalize_spans(&[Span::new(4, 5), Span::new(0, 1), Span::new(2, 2)]);
        assert_eq!(s, vec![Span::new(0, 2), Span::new(4, 5)]);
    }

    #[test]
    fn no_tuples_gives_permissive_mask() {
        let (mask, targets) = build_stage1_mask(4, &[]).unwrap();
        assert_eq!(mask, ConstraintMask::all_permissive(4));
        assert!(targets.arcs().iter().all(|a| a.2 == ArcLabel::Null));
    }

    #[test]
    fn stage1_count_matches_hand_enumeration() {
        // tokens 1..2 of 4: head choice (2) x one latent subtree each,
        // then tokens 0 and 3 attach outside the span
        let t = tuple(&[], &[], &[Span::new(1, 2)], Polarity::Positive);
        let (mask, _) = build_stage1_mask(4, &[t]).unwrap();
        let trees = legal_trees(&mask);
        let s = ScoreSet::<f64>::zeros(4);
        let b = brute_force(&s, Some(&mask), BruteMode::Sum).unwrap();
        assert_eq!(b.count, trees.len());
        // the free words cannot reach each other across a root-attached
        // span, so both hang from the root
        assert_eq!(trees.len(), 2);
    }

    #[test]
    fn stage2_count_matches_hand_enumeration() {
        // n=5, expression {2}, holder {0..1}: expression word 3 is the only
        // root child; holder head in {1,2} with the other below it; tokens
        // 3 and 4 attach to 3 or to each other without crossing
        let (mask, _) = build_stage2_mask(5, &[Span::single(2)], &[Span::new(0, 1)], &[]).unwrap();
        let trees = legal_trees(&mask);
        assert_eq!(trees.len(), 2 * 3);
    }

    #[test]
    fn stage1_figure_sentence_forbids_crossing_arcs() {
        let t = tuple(&[], &[], &[Span::new(2, 4)], Polarity::Neutral);
        let (mask, targets) = build_stage1_mask(10, &[t]).unwrap();
        assert!(!mask.allows_arc(1, 3));
        assert!(!mask.allows_arc(5, 6));
        assert!(!mask.allows_arc(4, 2));
        assert!(mask.allows_arc(0, 4));
        assert_eq!(targets.get(0, 4), Some(ArcLabel::Expression(Polarity::Neutral)));
        assert_eq!(targets.get(0, 1), Some(ArcLabel::Null));
    }

    #[test]
    fn overlapping_expressions_are_rejected() {
        let a = tuple(&[], &[], &[Span::new(1, 2)], Polarity::Positive);
        let b = tuple(&[], &[], &[Span::new(2, 3)], Polarity::Negative);
        assert_eq!(
            build_stage1_mask(5, &[a, b]).unwrap_err(),
            ConstraintError::Overlap { tuple: 1, span: Span::new(2, 3) }
        );
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let a = tuple(&[], &[], &[Span::new(1, 5)], Polarity::Positive);
        assert!(matches!(
            build_stage1_mask(5, &[a]),
            Err(ConstraintError::OutOfBounds { tuple: 0, .. })
        ));
    }

    #[test]
    fn stage1_round_trip_exhaustive_small() {
        let t = tuple(&[], &[], &[Span::new(0, 0), Span::new(2, 3)], Polarity::Negative);
        let (mask, targets) = build_stage1_mask(5, std::slice::from_ref(&t)).unwrap();
        let trees = legal_trees(&mask);
        assert!(!trees.is_empty());
        for tree in trees {
            let rec = recover_stage1(&targets.label_tree(&tree));
            assert_eq!(rec, vec![(t.expression.clone(), Polarity::Negative)]);
        }
    }

    #[test]
    fn stage2_round_trip_exhaustive_small() {
        let e = [Span::new(2, 2)];
        let h = [Span::new(0, 1)];
        let tg = [Span::new(4, 5)];
        let (mask, targets) = build_stage2_mask(6, &e, &h, &tg).unwrap();
        let trees = legal_trees(&mask);
        assert!(!trees.is_empty());
        for tree in trees {
            let (rh, rt) = recover_stage2(&targets.label_tree(&tree), &e).unwrap();
            assert_eq!(rh, h.to_vec());
            assert_eq!(rt, tg.to_vec());
        }
    }

    #[test]
    fn recover_stage2_rejects_root_outside_expression() {
        let tree = DepTree::new(vec![0, 1, 1]).unwrap();
        assert!(matches!(
            recover_stage2(&tree, &[Span::single(2)]),
            Err(ConstraintError::Contract(_))
        ));
    }

    #[test]
    fn incomplete_without_complete_is_dropped() {
        let tree = DepTree::with_labels(vec![0, 0], vec![ArcLabel::Incomplete, ArcLabel::Null]).unwrap();
        assert!(recover_stage1(&tree).is_empty());
    }

    #[test]
    fn nested_role_arcs_do_not_double_claim() {
        // expression word 1; 2 is a holder head and 3 below it is labeled
        let tree = DepTree::with_labels(
            vec![0, 1, 2],
            vec![ArcLabel::Null, ArcLabel::Holder, ArcLabel::Target],
        )
        .unwrap();
        let (h, t) = recover_stage2(&tree, &[Span::single(0)]).unwrap();
        assert_eq!(h, vec![Span::single(1)]);
        assert!(t.is_empty());
    }

    #[test]
    fn shared_expressions_merge() {
        let e = [Span::new(2, 3)];
        let a = tuple(&[Span::single(0)], &[], &e, Polarity::Positive);
        let b = tuple(&[], &[Span::single(5)], &e, Polarity::Positive);
        let groups = group_by_expression(6, &[a, b]).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].holders, vec![Span::single(0)]);
        assert_eq!(groups[0].targets, vec![Span::single(5)]);
    }
}
