//! Hashed linear scorer over word-window templates.

use std::hash::Hasher;

use fnv::FnvHasher;

use crate::charts::ScoreSet;
use crate::num::Scalar;

use super::params::{BlockId, ParamStore};
use super::{LabelScores, Stage, StageContext, StageScores};

#[derive(Clone, Debug)]
pub struct SparseScorer {
    pub bits: u32,
    pub weights: BlockId,
}

/// Original word forms padded with `<root>` and `<eos>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseSentence {
    forms: Vec<String>,
}

impl SparseSentence {
    pub fn new<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut forms = Vec::with_capacity(tokens.len() + 2);
        forms.push("<root>".to_string());
        forms.extend(tokens.iter().map(|t| t.as_ref().to_string()));
        forms.push("<eos>".to_string());
        SparseSentence { forms }
    }

    pub fn n(&self) -> usize {
        self.forms.len() - 2
    }

    fn word(&self, p: isize) -> &str {
        if p < 0 || p as usize >= self.forms.len() {
            "<pad>"
        } else {
            &self.forms[p as usize]
        }
    }
}

fn bucket(d: usize) -> u8 {
    match d {
        0..=4 => d as u8,
        5..=7 => 5,
        8..=12 => 6,
        _ => 7,
    }
}

struct Feat {
    h: FnvHasher,
}

impl Feat {
    fn new(stage: Stage, template: u8) -> Self {
        let mut h = FnvHasher::default();
        h.write_u8(stage as u8);
        h.write_u8(template);
        Feat { h }
    }
    fn w(mut self, s: &str) -> Self {
        self.h.write(s.as_bytes());
        self.h.write_u8(0xff);
        self
    }
    fn b(mut self, x: u8) -> Self {
        self.h.write_u8(x);
        self
    }
    fn done(self, mask: u64) -> usize {
        (self.h.finish() & mask) as usize
    }
}

impl SparseScorer {
    pub fn new<T: Scalar>(p: &mut ParamStore<T>, bits: u32) -> Self {
        let weights = p.add_zeros("sparse.w", &[1usize << bits]);
        SparseScorer { bits, weights }
    }

    fn mask(&self) -> u64 {
        (1u64 << self.bits) - 1
    }

    fn flag(ctx: &StageContext, p: usize) -> u8 {
        ctx.in_expression.get(p).copied().unwrap_or(false) as u8
    }

    /// Feature indices of arc `(h, m)`, appended to `out`.
    pub fn arc_features(&self, s: &SparseSentence, ctx: &StageContext, h: usize, m: usize, out: &mut Vec<usize>) {
        let st = ctx.stage;
        let mk = self.mask();
        let (hi, mi) = (h as isize, m as isize);
        let dir = (h < m) as u8;
        let dist = bucket(h.abs_diff(m));
        let (fh, fm) = (Self::flag(ctx, h), Self::flag(ctx, m));
        out.push(Feat::new(st, 0).w(s.word(hi)).w(s.word(mi)).done(mk));
        out.push(Feat::new(st, 1).w(s.word(hi)).b(dir).b(dist).done(mk));
        out.push(Feat::new(st, 2).w(s.word(mi)).b(dir).b(dist).done(mk));
        out.push(Feat::new(st, 3).w(s.word(hi)).w(s.word(mi + 1)).done(mk));
        out.push(Feat::new(st, 4).w(s.word(hi)).w(s.word(mi - 1)).done(mk));
        out.push(Feat::new(st, 5).w(s.word(hi - 1)).w(s.word(mi)).done(mk));
        out.push(Feat::new(st, 6).w(s.word(hi + 1)).w(s.word(mi)).done(mk));
        out.push(Feat::new(st, 7).b(dir).b(dist).b(fh).b(fm).done(mk));
        out.push(Feat::new(st, 8).w(s.word(hi)).b(fm).b(dir).done(mk));
        out.push(Feat::new(st, 9).w(s.word(mi)).b(fh).b(dir).done(mk));
        out.push(Feat::new(st, 10).w(s.word(mi - 2)).w(s.word(mi)).w(s.word(mi + 2)).b(dir).done(mk));
    }

    fn sib_features(&self, s: &SparseSentence, ctx: &StageContext, h: usize, sb: usize, m: usize, out: &mut Vec<usize>) {
        let st = ctx.stage;
        let mk = self.mask();
        let dir = (h < m) as u8;
        out.push(Feat::new(st, 20).w(s.word(h as isize)).w(s.word(sb as isize)).w(s.word(m as isize)).done(mk));
        out.push(Feat::new(st, 21).w(s.word(sb as isize)).w(s.word(m as isize)).b(dir).done(mk));
        out.push(Feat::new(st, 22).b(dir).b(bucket(sb.abs_diff(m))).done(mk));
        out.push(
            Feat::new(st, 23)
                .b(Self::flag(ctx, h))
                .b(Self::flag(ctx, sb))
                .b(Self::flag(ctx, m))
                .b(dir)
                .done(mk),
        );
    }

    /// Boundary features for a yield edge: `inner` is the outermost covered
    /// position and `outer` the first uncovered one.
    fn span_features(
        &self,
        s: &SparseSentence,
        ctx: &StageContext,
        side: u8,
        k: usize,
        inner: isize,
        outer: isize,
        out: &mut Vec<usize>,
    ) {
        let st = ctx.stage;
        let mk = self.mask();
        let len = bucket(k.abs_diff(inner as usize));
        let fo = if outer >= 0 { Self::flag(ctx, outer as usize) } else { 0 };
        let fi = Self::flag(ctx, inner as usize);
        out.push(Feat::new(st, 30).b(side).w(s.word(k as isize)).w(s.word(inner)).done(mk));
        out.push(Feat::new(st, 31).b(side).w(s.word(inner)).w(s.word(outer)).done(mk));
        out.push(Feat::new(st, 32).b(side).w(s.word(k as isize)).b(len).done(mk));
        out.push(Feat::new(st, 33).b(side).w(s.word(outer)).done(mk));
        out.push(
            Feat::new(st, 34)
                .b(side)
                .b(Self::flag(ctx, k))
                .b(fi)
                .b(fo)
                .done(mk),
        );
    }

    /// Feature indices of label `a` on arc `(h, m)`, appended to `out`.
    pub fn label_features(&self, s: &SparseSentence, ctx: &StageContext, h: usize, m: usize, a: usize, out: &mut Vec<usize>) {
        let st = ctx.stage;
        let mk = self.mask();
        let a = a as u8;
        let (hi, mi) = (h as isize, m as isize);
        let dir = (h < m) as u8;
        out.push(Feat::new(st, 40).b(a).done(mk));
        out.push(Feat::new(st, 41).b(a).w(s.word(mi)).done(mk));
        out.push(Feat::new(st, 42).b(a).w(s.word(hi)).w(s.word(mi)).done(mk));
        out.push(Feat::new(st, 43).b(a).w(s.word(mi - 1)).w(s.word(mi)).done(mk));
        out.push(Feat::new(st, 44).b(a).w(s.word(mi)).w(s.word(mi + 1)).done(mk));
        out.push(
            Feat::new(st, 45)
                .b(a)
                .b(Self::flag(ctx, h))
                .b(Self::flag(ctx, m))
                .b(dir)
                .b(bucket(h.abs_diff(m)))
                .done(mk),
        );
        out.push(Feat::new(st, 46).b(a).w(s.word(mi - 1)).done(mk));
        out.push(Feat::new(st, 47).b(a).w(s.word(mi + 1)).done(mk));
    }

    /// Visits every scored part of the tables with its feature indices.
    fn for_each_part<F: FnMut(PartSlot, &[usize])>(&self, s: &SparseSentence, ctx: &StageContext, labels: usize, mut f: F) {
        let n = s.n();
        let mut buf = Vec::with_capacity(16);
        for h in 0..=n {
            for m in 1..=n {
                if h == m {
                    continue;
                }
                buf.clear();
                self.arc_features(s, ctx, h, m, &mut buf);
                f(PartSlot::Arc(h, m), &buf);
                for a in 0..labels {
                    buf.clear();
                    self.label_features(s, ctx, h, m, a, &mut buf);
                    f(PartSlot::Label(h, m, a), &buf);
                }
                let (lo, hi) = if h < m { (h + 1, m) } else { (m + 1, h) };
                for sb in lo..hi {
                    buf.clear();
                    self.sib_features(s, ctx, h, sb, m, &mut buf);
                    f(PartSlot::Sib(h, sb, m), &buf);
                }
            }
        }
        for k in 1..=n {
            for i in 1..=k {
                buf.clear();
                self.span_features(s, ctx, 0, k, i as isize, i as isize - 1, &mut buf);
                f(PartSlot::Left(k, i), &buf);
            }
            for j in k..=n {
                buf.clear();
                self.span_features(s, ctx, 1, k, j as isize, j as isize + 1, &mut buf);
                f(PartSlot::Right(k, j), &buf);
            }
        }
    }

    pub fn score<T: Scalar>(
        &self,
        p: &ParamStore<T>,
        s: &SparseSentence,
        ctx: &StageContext,
        num_labels: usize,
    ) -> StageScores<T> {
        let w = p.get(self.weights);
        let n = s.n();
        let npos = n + 1;
        let mut scores = ScoreSet::zeros(n);
        let mut logits = vec![T::zero(); npos * npos * num_labels];
        self.for_each_part(s, ctx, num_labels, |slot, feats| {
            let v: T = feats.iter().map(|&i| w[i]).sum();
            match slot {
                PartSlot::Arc(h, m) => *scores.arc_mut(h, m) = v,
                PartSlot::Sib(h, sb, m) => *scores.sib_mut(h, sb, m) = v,
                PartSlot::Left(k, i) => *scores.span_left_mut(k, i) = v,
                PartSlot::Right(k, j) => *scores.span_right_mut(k, j) = v,
                PartSlot::Label(h, m, a) => logits[(h * npos + m) * num_labels + a] = v,
            }
        });
        StageScores {
            scores,
            labels: LabelScores::from_logits(npos, num_labels, logits),
        }
    }

    pub fn backward<T: Scalar>(
        &self,
        s: &SparseSentence,
        ctx: &StageContext,
        num_labels: usize,
        part_w: &ScoreSet<T>,
        label_w: &[T],
        g: &mut ParamStore<T>,
    ) {
        let npos = s.n() + 1;
        let gw = g.get_mut(self.weights);
        self.for_each_part(s, ctx, num_labels, |slot, feats| {
            let wt = match slot {
                PartSlot::Arc(h, m) => part_w.arc(h, m),
                PartSlot::Sib(h, sb, m) => part_w.sib(h, sb, m),
                PartSlot::Left(k, i) => part_w.span_left(k, i),
                PartSlot::Right(k, j) => part_w.span_right(k, j),
                PartSlot::Label(h, m, a) => label_w[(h * npos + m) * num_labels + a],
            };
            if wt != T::zero() {
                for &i in feats {
                    gw[i] += wt;
                }
            }
        });
    }
}

#[derive(Clone, Copy)]
enum PartSlot {
    Arc(usize, usize),
    Sib(usize, usize, usize),
    Left(usize, usize),
    Right(usize, usize),
    Label(usize, usize, usize),
}
