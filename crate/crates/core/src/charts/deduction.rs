//! Item layout and derivation enumeration of the second-order headed-span
//! Eisner system.
//!
//! Items over positions `0..=n` (0 is the root):
//!
//! * `I(h, m)` incomplete: arc `h -> m` with the children of `h` between them.
//! * `S(a, b)` sibling: finished right part of `a` next to the finished left
//!   part of `b`.
//! * `Cr(h, j)` / `Cl(h, i)` complete: all children of `h` on one side
//!   attached, yield reaching `j` / `i`.
//! * `Fr(h, j)` / `Fl(h, i)` finished: complete plus the headed-span score of
//!   that boundary.
//!
//! Every consumer (inside, Viterbi, adjoint) walks the same derivations, so
//! the constraint logic lives in exactly one place.

use super::{ConstraintMask, Part};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub enum Kind {
    I = 0,
    S = 1,
    Cr = 2,
    Cl = 3,
    Fr = 4,
    Fl = 5,
}

pub const KINDS: [Kind; 6] = [Kind::I, Kind::S, Kind::Cr, Kind::Cl, Kind::Fr, Kind::Fl];

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::I => "I",
            Kind::S => "S",
            Kind::Cr => "Cr",
            Kind::Cl => "Cl",
            Kind::Fr => "Fr",
            Kind::Fl => "Fl",
        }
    }
}

pub struct Deduction<'a> {
    n: usize,
    w: usize,
    mask: Option<&'a ConstraintMask>,
}

impl<'a> Deduction<'a> {
    pub fn new(n: usize, mask: Option<&'a ConstraintMask>) -> Self {
        Deduction { n, w: n + 1, mask }
    }

    pub fn item_count(&self) -> usize {
        KINDS.len() * self.w * self.w
    }

    #[inline]
    pub fn id(&self, kind: Kind, a: usize, b: usize) -> usize {
        (kind as usize * self.w + a) * self.w + b
    }

    pub fn decode(&self, id: usize) -> (Kind, usize, usize) {
        let b = id % self.w;
        let a = (id / self.w) % self.w;
        let k = id / (self.w * self.w);
        (KINDS[k], a, b)
    }

    pub fn goal(&self) -> usize {
        self.id(Kind::Fr, 0, self.n)
    }

    #[inline]
    fn allowed(&self, h: usize, m: usize) -> bool {
        self.mask.is_none_or(|mk| mk.allows_arc(h, m))
    }

    #[inline]
    fn gated(&self, h: usize, m: usize) -> bool {
        self.mask.is_some_and(|mk| mk.is_gated(h, m))
    }

    #[inline]
    fn left_ok(&self, m: usize, i: usize) -> bool {
        self.mask.is_none_or(|mk| mk.finish_left_allowed(m, i))
    }

    #[inline]
    fn right_ok(&self, m: usize, j: usize) -> bool {
        self.mask.is_none_or(|mk| mk.finish_right_allowed(m, j))
    }

    /// Items in an order where every antecedent precedes its consequent:
    /// by width, then left index, and within one `(i, j)` pair
    /// `I, S, C, F`.
    pub fn order(&self) -> Vec<usize> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.item_count());
        for i in 0..=n {
            out.push(self.id(Kind::Cr, i, i));
            out.push(self.id(Kind::Cl, i, i));
            if i >= 1 {
                out.push(self.id(Kind::Fr, i, i));
                out.push(self.id(Kind::Fl, i, i));
            }
        }
        for width in 1..=n {
            for i in 0..=n - width {
                let j = i + width;
                out.push(self.id(Kind::I, i, j));
                if i >= 1 {
                    out.push(self.id(Kind::I, j, i));
                    out.push(self.id(Kind::S, i, j));
                }
                out.push(self.id(Kind::Cr, i, j));
                if i >= 1 {
                    out.push(self.id(Kind::Cl, j, i));
                    out.push(self.id(Kind::Fr, i, j));
                    out.push(self.id(Kind::Fl, j, i));
                } else if j == n {
                    out.push(self.id(Kind::Fr, 0, n));
                }
            }
        }
        out
    }

    /// Calls `f(antecedents, parts)` for every derivation of `item`, in a
    /// fixed order of increasing split point. The value of a derivation is
    /// the semiring product of its antecedent items and scored parts.
    #[inline]
    pub fn for_each<F: FnMut(&[usize], &[Part])>(&self, item: usize, f: &mut F) {
        let (kind, a, b) = self.decode(item);
        match kind {
            Kind::Cr | Kind::Cl if a == b => f(&[], &[]),
            Kind::Fr => {
                if a == 0 {
                    f(&[self.id(Kind::Cr, 0, b)], &[]);
                } else {
                    f(&[self.id(Kind::Cr, a, b)], &[Part::Right(a, b)]);
                }
            }
            Kind::Fl => f(&[self.id(Kind::Cl, a, b)], &[Part::Left(a, b)]),
            Kind::I if a < b => self.incomplete_right(a, b, f),
            Kind::I => self.incomplete_left(a, b, f),
            Kind::S => {
                for k in a..b {
                    f(&[self.id(Kind::Fr, a, k), self.id(Kind::Fl, b, k + 1)], &[]);
                }
            }
            Kind::Cr => {
                let h = a;
                for m in h + 1..=b {
                    if !self.allowed(h, m) {
                        continue;
                    }
                    if self.gated(h, m) && !self.right_ok(m, b) {
                        continue;
                    }
                    f(&[self.id(Kind::I, h, m), self.id(Kind::Fr, m, b)], &[]);
                }
            }
            Kind::Cl => {
                let h = a;
                for m in b..h {
                    if !self.allowed(h, m) {
                        continue;
                    }
                    if self.gated(h, m) && !self.left_ok(m, b) {
                        continue;
                    }
                    f(&[self.id(Kind::I, h, m), self.id(Kind::Fl, m, b)], &[]);
                }
            }
        }
    }

    fn incomplete_right<F: FnMut(&[usize], &[Part])>(&self, h: usize, m: usize, f: &mut F) {
        if !self.allowed(h, m) {
            return;
        }
        let gated = self.gated(h, m);
        let arc = Part::Arc(h, m);
        // m is the closest right child of h
        if !gated || self.left_ok(m, h + 1) {
            f(&[self.id(Kind::Fl, m, h + 1)], &[arc]);
        }
        // s is the previous right child of h
        for s in h + 1..m {
            let sib = Part::Sib(h, s, m);
            let gated_s = self.gated(h, s);
            if !gated && !gated_s {
                f(&[self.id(Kind::I, h, s), self.id(Kind::S, s, m)], &[arc, sib]);
            } else {
                for k in s..m {
                    if (!gated || self.left_ok(m, k + 1)) && (!gated_s || self.right_ok(s, k)) {
                        f(
                            &[
                                self.id(Kind::I, h, s),
                                self.id(Kind::Fr, s, k),
                                self.id(Kind::Fl, m, k + 1),
                            ],
                            &[arc, sib],
                        );
                    }
                }
            }
        }
    }

    fn incomplete_left<F: FnMut(&[usize], &[Part])>(&self, h: usize, m: usize, f: &mut F) {
        if m == 0 || !self.allowed(h, m) {
            return;
        }
        let gated = self.gated(h, m);
        let arc = Part::Arc(h, m);
        if !gated || self.right_ok(m, h - 1) {
            f(&[self.id(Kind::Fr, m, h - 1)], &[arc]);
        }
        for s in m + 1..h {
            let sib = Part::Sib(h, s, m);
            let gated_s = self.gated(h, s);
            if !gated && !gated_s {
                f(&[self.id(Kind::I, h, s), self.id(Kind::S, m, s)], &[arc, sib]);
            } else {
                for k in m..s {
                    if (!gated || self.right_ok(m, k)) && (!gated_s || self.left_ok(s, k + 1)) {
                        f(
                            &[
                                self.id(Kind::I, h, s),
                                self.id(Kind::Fr, m, k),
                                self.id(Kind::Fl, s, k + 1),
                            ],
                            &[arc, sib],
                        );
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_topological() {
        for n in 1..=6 {
            let d = Deduction::new(n, None);
            let order = d.order();
            let mut pos = vec![usize::MAX; d.item_count()];
            for (i, &it) in order.iter().enumerate() {
                assert_eq!(pos[it], usize::MAX, "item listed twice");
                pos[it] = i;
            }
            for &it in &order {
                d.for_each(it, &mut |ants, _| {
                    for &a in ants {
                        assert!(
                            pos[a] < pos[it],
                            "{:?} needs {:?} first",
                            d.decode(it),
                            d.decode(a)
                        );
                    }
                });
            }
            assert_eq!(*order.last().unwrap(), d.goal());
        }
    }
}
