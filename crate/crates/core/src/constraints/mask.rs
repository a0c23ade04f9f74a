use std::ops::RangeInclusive;

use crate::charts::DepTree;

/// Legality tables over positions `0..=n` driving the constrained charts.
///
/// * `arc_allowed[h][m]`: whether `h -> m` may appear at all.
/// * `gated[h][m]`: `h -> m` crosses into an observed span; the finished
///   yield of `m` is then restricted by the finish tables.
/// * `finish_left[m][i]` / `finish_right[m][j]`: boundaries at which the yield
///   of `m` may be considered finished when `m` is attached by a gated arc.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintMask {
    n: usize,
    arc_allowed: Vec<bool>,
    gated: Vec<bool>,
    finish_left: Vec<bool>,
    finish_right: Vec<bool>,
}

impl ConstraintMask {
    /// Mask that admits every projective tree.
    pub fn all_permissive(n: usize) -> Self {
        let w = n + 1;
        let mut arc_allowed = vec![true; w * w];
        for h in 0..w {
            arc_allowed[h * w + h] = false;
            arc_allowed[h * w] = false;
        }
        ConstraintMask {
            n,
            arc_allowed,
            gated: vec![false; w * w],
            finish_left: vec![true; w * w],
            finish_right: vec![true; w * w],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, a: usize, b: usize) -> usize {
        a * (self.n + 1) + b
    }

    #[inline]
    pub fn allows_arc(&self, h: usize, m: usize) -> bool {
        self.arc_allowed[self.idx(h, m)]
    }

    #[inline]
    pub fn is_gated(&self, h: usize, m: usize) -> bool {
        self.gated[self.idx(h, m)]
    }

    #[inline]
    pub fn finish_left_allowed(&self, m: usize, i: usize) -> bool {
        self.finish_left[self.idx(m, i)]
    }

    #[inline]
    pub fn finish_right_allowed(&self, m: usize, j: usize) -> bool {
        self.finish_right[self.idx(m, j)]
    }

    pub fn forbid_arc(&mut self, h: usize, m: usize) {
        let i = self.idx(h, m);
        self.arc_allowed[i] = false;
    }

    pub fn gate_arc(&mut self, h: usize, m: usize) {
        let i = self.idx(h, m);
        self.gated[i] = true;
    }

    /// Under gated arcs, `m` may only be finished with yield exactly
    /// `[left, right]`.
    pub fn require_yield(&mut self, m: usize, left: usize, right: usize) {
        for b in 0..=self.n {
            let i = self.idx(m, b);
            self.finish_left[i] = b == left;
            self.finish_right[i] = b == right;
        }
    }

    /// Forbids root arcs to positions outside `window`.
    pub fn restrict_root(&mut self, window: RangeInclusive<usize>) {
        for m in 1..=self.n {
            if !window.contains(&m) {
                self.forbid_arc(0, m);
            }
        }
    }

    /// Whether `tree` is among the trees this mask admits.
    pub fn permits(&self, tree: &DepTree) -> bool {
        if tree.n() != self.n {
            return false;
        }
        let yields = tree.yields();
        tree.arcs().all(|(h, m)| {
            if !self.allows_arc(h, m) {
                return false;
            }
            if self.is_gated(h, m) {
                let (l, r) = yields[m];
                return self.finish_left_allowed(m, l) && self.finish_right_allowed(m, r);
            }
            true
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permissive_mask_admits_everything() {
        let mask = ConstraintMask::all_permissive(4);
        for heads in crate::charts::enumerate_projective_trees(4) {
            assert!(mask.permits(&DepTree::new(heads).unwrap()));
        }
    }

    #[test]
    fn gated_arc_requires_exact_yield() {
        let mut mask = ConstraintMask::all_permissive(3);
        mask.gate_arc(0, 2);
        mask.require_yield(2, 2, 3);
        assert!(mask.permits(&DepTree::new(vec![0, 0, 2]).unwrap()));
        assert!(!mask.permits(&DepTree::new(vec![0, 0, 0]).unwrap()));
        assert!(!mask.permits(&DepTree::new(vec![2, 0, 2]).unwrap()));
    }

    #[test]
    fn root_window_forbids_outside_root_arcs() {
        let mut mask = ConstraintMask::all_permissive(3);
        mask.restrict_root(2..=3);
        assert!(!mask.allows_arc(0, 1));
        assert!(mask.allows_arc(0, 2));
        assert!(mask.allows_arc(1, 2));
    }
}
