use crate::num::Scalar;

use super::ChartError;

/// A single scored factor of a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    /// Arc `head -> modifier`.
    Arc(usize, usize),
    /// Adjacent siblings `(head, inner, outer)`: `inner` lies strictly between
    /// `head` and `outer`, both on the same side of `head`.
    Sib(usize, usize, usize),
    /// Yield of `head` starts at position `left`.
    Left(usize, usize),
    /// Yield of `head` ends at position `right`.
    Right(usize, usize),
}

/// Dense log-score tables over the positions `0..=n` (0 is the root).
///
/// The same layout doubles as a table of part marginals or of part
/// gradient weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSet<T> {
    n: usize,
    arc: Vec<T>,
    sib: Vec<T>,
    span_left: Vec<T>,
    span_right: Vec<T>,
}

impl<T: Scalar> ScoreSet<T> {
    /// All-zero tables for `n` tokens.
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, T::zero())
    }

    pub fn filled(n: usize, value: T) -> Self {
        let w = n + 1;
        ScoreSet {
            n,
            arc: vec![value; w * w],
            sib: vec![value; w * w * w],
            span_left: vec![value; w * w],
            span_right: vec![value; w * w],
        }
    }

    /// Number of tokens, excluding the root.
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn width(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn arc(&self, head: usize, modifier: usize) -> T {
        self.arc[head * self.width() + modifier]
    }

    #[inline]
    pub fn arc_mut(&mut self, head: usize, modifier: usize) -> &mut T {
        let w = self.width();
        &mut self.arc[head * w + modifier]
    }

    #[inline]
    pub fn sib(&self, head: usize, inner: usize, outer: usize) -> T {
        let w = self.width();
        self.sib[(head * w + inner) * w + outer]
    }

    #[inline]
    pub fn sib_mut(&mut self, head: usize, inner: usize, outer: usize) -> &mut T {
        let w = self.width();
        &mut self.sib[(head * w + inner) * w + outer]
    }

    #[inline]
    pub fn span_left(&self, head: usize, left: usize) -> T {
        self.span_left[head * self.width() + left]
    }

    #[inline]
    pub fn span_left_mut(&mut self, head: usize, left: usize) -> &mut T {
        let w = self.width();
        &mut self.span_left[head * w + left]
    }

    #[inline]
    pub fn span_right(&self, head: usize, right: usize) -> T {
        self.span_right[head * self.width() + right]
    }

    #[inline]
    pub fn span_right_mut(&mut self, head: usize, right: usize) -> &mut T {
        let w = self.width();
        &mut self.span_right[head * w + right]
    }

    #[inline]
    pub fn part(&self, part: Part) -> T {
        match part {
            Part::Arc(h, m) => self.arc(h, m),
            Part::Sib(h, s, m) => self.sib(h, s, m),
            Part::Left(k, i) => self.span_left(k, i),
            Part::Right(k, j) => self.span_right(k, j),
        }
    }

    #[inline]
    pub fn part_mut(&mut self, part: Part) -> &mut T {
        match part {
            Part::Arc(h, m) => self.arc_mut(h, m),
            Part::Sib(h, s, m) => self.sib_mut(h, s, m),
            Part::Left(k, i) => self.span_left_mut(k, i),
            Part::Right(k, j) => self.span_right_mut(k, j),
        }
    }

    /// Raw row-major arc table, `arc[h * (n + 1) + m]`.
    pub fn arc_table(&self) -> &[T] {
        &self.arc
    }

    pub fn sib_table(&self) -> &[T] {
        &self.sib
    }

    pub fn span_left_table(&self) -> &[T] {
        &self.span_left
    }

    pub fn span_right_table(&self) -> &[T] {
        &self.span_right
    }

    pub fn arc_table_mut(&mut self) -> &mut [T] {
        &mut self.arc
    }

    pub fn sib_table_mut(&mut self) -> &mut [T] {
        &mut self.sib
    }

    pub fn span_left_table_mut(&mut self) -> &mut [T] {
        &mut self.span_left
    }

    pub fn span_right_table_mut(&mut self) -> &mut [T] {
        &mut self.span_right
    }

    /// Every part that can occur in some tree over `n` tokens.
    pub fn valid_parts(n: usize) -> Vec<Part> {
        let mut parts = Vec::new();
        for h in 0..=n {
            for m in 1..=n {
                if h != m {
                    parts.push(Part::Arc(h, m));
                }
            }
        }
        for h in 0..=n {
            for s in 1..=n {
                for m in 1..=n {
                    let between = (h < s && s < m) || (m < s && s < h);
                    if between {
                        parts.push(Part::Sib(h, s, m));
                    }
                }
            }
        }
        for k in 1..=n {
            for i in 1..=k {
                parts.push(Part::Left(k, i));
            }
            for j in k..=n {
                parts.push(Part::Right(k, j));
            }
        }
        parts
    }

    /// Elementwise `self - other`.
    pub fn difference(&self, other: &ScoreSet<T>) -> Result<ScoreSet<T>, ChartError> {
        if self.n != other.n {
            return Err(ChartError::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let sub = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x - y).collect::<Vec<_>>();
        Ok(ScoreSet {
            n: self.n,
            arc: sub(&self.arc, &other.arc),
            sib: sub(&self.sib, &other.sib),
            span_left: sub(&self.span_left, &other.span_left),
            span_right: sub(&self.span_right, &other.span_right),
        })
    }

    /// Converts every entry to another scalar type.
    pub fn cast<U: Scalar>(&self) -> ScoreSet<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        ScoreSet {
            n: self.n,
            arc: conv(&self.arc),
            sib: conv(&self.sib),
            span_left: conv(&self.span_left),
            span_right: conv(&self.span_right),
        }
    }

    /// Fails on NaN or `+inf` anywhere in the tables.
    pub fn check_finite_or_neg_inf(&self) -> Result<(), ChartError> {
        let ok = |v: &[T]| v.iter().all(|x| !x.is_nan() && *x != T::infinity());
        if ok(&self.arc) && ok(&self.sib) && ok(&self.span_left) && ok(&self.span_right) {
            Ok(())
        } else {
            Err(ChartError::InvalidScores)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn part_accessors_agree() {
        let mut s = ScoreSet::<f64>::zeros(3);
        *s.part_mut(Part::Arc(0, 2)) = 1.5;
        *s.part_mut(Part::Sib(1, 2, 3)) = -2.0;
        *s.part_mut(Part::Left(3, 1)) = 0.25;
        *s.part_mut(Part::Right(1, 3)) = 4.0;
        assert_eq!(s.arc(0, 2), 1.5);
        assert_eq!(s.sib(1, 2, 3), -2.0);
        assert_eq!(s.span_left(3, 1), 0.25);
        assert_eq!(s.span_right(1, 3), 4.0);
    }

    #[test]
    fn valid_part_counts() {
        // n = 2: arcs 0->1, 0->2, 1->2, 2->1; siblings (0,1,2); spans 1:[1],[1,2] 2:[1,2],[2].
        let parts = ScoreSet::<f64>::valid_parts(2);
        let arcs = parts.iter().filter(|p| matches!(p, Part::Arc(..))).count();
        let sibs = parts.iter().filter(|p| matches!(p, Part::Sib(..))).count();
        let spans = parts.len() - arcs - sibs;
        assert_eq!((arcs, sibs, spans), (4, 1, 6));
    }
}
