use std::fmt::Write as _;
use std::ops::RangeInclusive;

use crate::constraints::ConstraintMask;
use crate::labels::ArcLabel;
use crate::num::{LogSumExp, Scalar};

use super::deduction::{Deduction, Kind};
use super::{ChartError, DepTree, Part, ScoreSet};

/// Reusable chart memory for one worker.
///
/// Each call to [`ChartArena::inside`], [`ChartArena::viterbi`] or
/// [`ChartArena::marginals`] reinitializes the tables it needs; buffers are
/// only reallocated when a longer sentence arrives.
#[derive(Debug)]
pub struct ChartArena<T> {
    n: usize,
    values: Vec<T>,
    adjoints: Vec<T>,
    backptr: Vec<u32>,
    order: Vec<usize>,
    order_n: Option<usize>,
}

impl<T: Scalar> Default for ChartArena<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// The I, S, C and F tables left behind by the last pass over an arena.
pub struct ChartSet<'a, T> {
    n: usize,
    values: &'a [T],
    order: &'a [usize],
}

impl<T: Scalar> ChartArena<T> {
    pub fn new() -> Self {
        ChartArena {
            n: 0,
            values: Vec::new(),
            adjoints: Vec::new(),
            backptr: Vec::new(),
            order: Vec::new(),
            order_n: None,
        }
    }

    fn prepare(&mut self, scores: &ScoreSet<T>, mask: Option<&ConstraintMask>) -> Result<(), ChartError> {
        let n = scores.n();
        if n == 0 {
            return Err(ChartError::EmptySentence);
        }
        if let Some(mk) = mask {
            if mk.n() != n {
                return Err(ChartError::DimensionMismatch {
                    expected: n,
                    found: mk.n(),
                });
            }
        }
        scores.check_finite_or_neg_inf()?;
        self.n = n;
        let d = Deduction::new(n, None);
        if self.order_n != Some(n) {
            self.order = d.order();
            self.order_n = Some(n);
        }
        self.values.clear();
        self.values.resize(d.item_count(), T::neg_infinity());
        Ok(())
    }

    /// Log-partition function over the trees admitted by `mask`
    /// (all projective trees when `mask` is `None`); `-inf` when no tree is
    /// admitted.
    pub fn inside(&mut self, scores: &ScoreSet<T>, mask: Option<&ConstraintMask>) -> Result<T, ChartError> {
        self.prepare(scores, mask)?;
        let d = Deduction::new(self.n, mask);
        let values = &mut self.values;
        for &item in &self.order {
            let mut acc = LogSumExp::new();
            d.for_each(item, &mut |ants, parts| {
                let mut t = T::zero();
                for &a in ants {
                    t += values[a];
                }
                for &p in parts {
                    t += scores.part(p);
                }
                acc.push(t);
            });
            values[item] = acc.value();
        }
        Ok(values[d.goal()])
    }

    /// Highest-scoring admitted tree and its score.
    ///
    /// `root_window`, when given, restricts the root's children to that
    /// position range by masking root arcs.
    ///
    /// Ties are broken towards the derivation enumerated first, i.e. the
    /// smallest split point at every item; the result is deterministic.
    pub fn viterbi(
        &mut self,
        scores: &ScoreSet<T>,
        mask: Option<&ConstraintMask>,
        root_window: Option<RangeInclusive<usize>>,
    ) -> Result<(DepTree, T), ChartError> {
        let windowed;
        let mask = match root_window {
            Some(window) => {
                let mut m = mask
                    .cloned()
                    .unwrap_or_else(|| ConstraintMask::all_permissive(scores.n()));
                if m.n() != scores.n() {
                    return Err(ChartError::DimensionMismatch {
                        expected: scores.n(),
                        found: m.n(),
                    });
                }
                m.restrict_root(window);
                windowed = m;
                Some(&windowed)
            }
            None => mask,
        };
        self.prepare(scores, mask)?;
        let d = Deduction::new(self.n, mask);
        self.backptr.clear();
        self.backptr.resize(d.item_count(), u32::MAX);
        let values = &mut self.values;
        let backptr = &mut self.backptr;
        for &item in &self.order {
            let mut best = T::neg_infinity();
            let mut arg = u32::MAX;
            let mut ordinal = 0u32;
            d.for_each(item, &mut |ants, parts| {
                let mut t = T::zero();
                for &a in ants {
                    t += values[a];
                }
                for &p in parts {
                    t += scores.part(p);
                }
                if t > best {
                    best = t;
                    arg = ordinal;
                }
                ordinal += 1;
            });
            values[item] = best;
            backptr[item] = arg;
        }
        let goal = d.goal();
        let score = values[goal];
        if score == T::neg_infinity() {
            return Err(ChartError::NoLegalTree);
        }
        let mut heads = vec![usize::MAX; self.n];
        let mut stack = vec![goal];
        while let Some(item) = stack.pop() {
            let want = backptr[item];
            debug_assert!(want != u32::MAX);
            let mut ordinal = 0u32;
            d.for_each(item, &mut |ants, parts| {
                if ordinal == want {
                    stack.extend_from_slice(ants);
                    for p in parts {
                        if let Part::Arc(h, m) = *p {
                            heads[m - 1] = h;
                        }
                    }
                }
                ordinal += 1;
            });
        }
        debug_assert!(heads.iter().all(|&h| h != usize::MAX));
        let labels = vec![ArcLabel::Null; self.n];
        let tree = DepTree::from_parts_unchecked(heads, labels);
        debug_assert!(DepTree::new(tree.heads().to_vec()).is_ok());
        Ok((tree, score))
    }

    /// Log-partition value and part marginals, obtained by running the
    /// inside recursion backwards and propagating adjoints through every
    /// recorded derivation.
    pub fn marginals(
        &mut self,
        scores: &ScoreSet<T>,
        mask: Option<&ConstraintMask>,
    ) -> Result<(T, ScoreSet<T>), ChartError> {
        let log_z = self.inside(scores, mask)?;
        if log_z == T::neg_infinity() {
            return Err(ChartError::EmptySupport);
        }
        let d = Deduction::new(self.n, mask);
        self.adjoints.clear();
        self.adjoints.resize(d.item_count(), T::zero());
        self.adjoints[d.goal()] = T::one();
        let mut out = ScoreSet::zeros(self.n);
        let values = &self.values;
        let adjoints = &mut self.adjoints;
        for &item in self.order.iter().rev() {
            let g = adjoints[item];
            let v = values[item];
            if g == T::zero() || v == T::neg_infinity() {
                continue;
            }
            d.for_each(item, &mut |ants, parts| {
                let mut t = T::zero();
                for &a in ants {
                    t += values[a];
                }
                for &p in parts {
                    t += scores.part(p);
                }
                if t == T::neg_infinity() {
                    return;
                }
                let w = g * (t - v).exp();
                for &a in ants {
                    adjoints[a] += w;
                }
                for &p in parts {
                    *out.part_mut(p) += w;
                }
            });
        }
        Ok((log_z, out))
    }

    /// View of the tables computed by the most recent pass.
    pub fn chart(&self) -> ChartSet<'_, T> {
        ChartSet {
            n: self.n,
            values: &self.values,
            order: &self.order,
        }
    }
}

impl<'a, T: Scalar> ChartSet<'a, T> {
    pub fn get(&self, kind: Kind, a: usize, b: usize) -> T {
        let d = Deduction::new(self.n, None);
        self.values[d.id(kind, a, b)]
    }

    /// Line-oriented dump: `<cell> <a> <b> <value>` with nine decimals,
    /// one line per item in evaluation order.
    pub fn dump(&self) -> String {
        let d = Deduction::new(self.n, None);
        let mut out = String::new();
        for &item in self.order {
            let (kind, a, b) = d.decode(item);
            let v = self.values[item];
            if v == T::neg_infinity() {
                let _ = writeln!(out, "{} {} {} -inf", kind.name(), a, b);
            } else {
                let _ = writeln!(out, "{} {} {} {:.9}", kind.name(), a, b, v.as_f64());
            }
        }
        out
    }
}

/// Log-partition function; see [`ChartArena::inside`].
pub fn inside<T: Scalar>(scores: &ScoreSet<T>, mask: Option<&ConstraintMask>) -> Result<T, ChartError> {
    ChartArena::new().inside(scores, mask)
}

/// Best tree and score; see [`ChartArena::viterbi`].
pub fn viterbi<T: Scalar>(
    scores: &ScoreSet<T>,
    mask: Option<&ConstraintMask>,
    root_window: Option<RangeInclusive<usize>>,
) -> Result<(DepTree, T), ChartError> {
    ChartArena::new().viterbi(scores, mask, root_window)
}

/// Part marginals; see [`ChartArena::marginals`].
pub fn marginals<T: Scalar>(scores: &ScoreSet<T>, mask: Option<&ConstraintMask>) -> Result<ScoreSet<T>, ChartError> {
    ChartArena::new().marginals(scores, mask).map(|(_, m)| m)
}
