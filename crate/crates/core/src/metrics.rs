//! Token-level span F1 and exact-match sentiment-graph F1.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::constraints::{token_set, SentimentTuple, Span};
use crate::labels::Polarity;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("gold has {gold} sentences but predictions have {pred}")]
    Misaligned { gold: usize, pred: usize },
    #[error("bucket edges must be strictly increasing and non-empty")]
    BadEdges,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Holder,
    Target,
    Expression,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Holder, Role::Target, Role::Expression];

    pub fn spans(self, t: &SentimentTuple) -> &[Span] {
        match self {
            Role::Holder => &t.holder,
            Role::Target => &t.target,
            Role::Expression => &t.expression,
        }
    }
}

/// Precision, recall and F1 with raw counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Prf {
    /// Undefined ratios are reported as 0.
    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            correct,
            predicted,
            gold,
        }
    }
}

fn check(gold: &[Vec<SentimentTuple>], pred: &[Vec<SentimentTuple>]) -> Result<(), MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::Misaligned {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    Ok(())
}

fn role_tokens<'a>(tuples: impl IntoIterator<Item = &'a SentimentTuple>, role: Role) -> BTreeSet<usize> {
    tuples.into_iter().flat_map(|t| token_set(role.spans(t))).collect()
}

/// Token-level span F1; each token counts once per sentence and role.
pub fn span_f1(gold: &[Vec<SentimentTuple>], pred: &[Vec<SentimentTuple>], role: Role) -> Result<Prf, MetricsError> {
    check(gold, pred)?;
    let (mut c, mut p, mut g) = (0, 0, 0);
    for (gs, ps) in gold.iter().zip(pred) {
        let gt = role_tokens(gs, role);
        let pt = role_tokens(ps, role);
        c += gt.intersection(&pt).count();
        p += pt.len();
        g += gt.len();
    }
    Ok(Prf::from_counts(c, p, g))
}

type TupleKey = (BTreeSet<usize>, BTreeSet<usize>, BTreeSet<usize>, Option<Polarity>);

fn key(t: &SentimentTuple, with_polarity: bool) -> TupleKey {
    (
        token_set(&t.holder),
        token_set(&t.target),
        token_set(&t.expression),
        with_polarity.then_some(t.polarity),
    )
}

/// One-to-one exact matches between two tuple lists.
fn matches<'a>(
    gold: impl IntoIterator<Item = &'a SentimentTuple>,
    pred: impl IntoIterator<Item = &'a SentimentTuple>,
    with_polarity: bool,
) -> (usize, usize, usize) {
    let mut pool: Vec<Option<TupleKey>> = gold.into_iter().map(|t| Some(key(t, with_polarity))).collect();
    let g = pool.len();
    let (mut c, mut p) = (0, 0);
    for t in pred {
        p += 1;
        let k = key(t, with_polarity);
        if let Some(slot) = pool.iter_mut().find(|s| s.as_ref() == Some(&k)) {
            *slot = None;
            c += 1;
        }
    }
    (c, p, g)
}

/// Exact-match tuple F1: SF1 with polarity, NSF1 without.
pub fn graph_f1(gold: &[Vec<SentimentTuple>], pred: &[Vec<SentimentTuple>], with_polarity: bool) -> Result<Prf, MetricsError> {
    check(gold, pred)?;
    let (mut c, mut p, mut g) = (0, 0, 0);
    for (gs, ps) in gold.iter().zip(pred) {
        let (ci, pi, gi) = matches(gs, ps, with_polarity);
        c += ci;
        p += pi;
        g += gi;
    }
    Ok(Prf::from_counts(c, p, g))
}

/// Every headline metric of a corpus pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub holder: Prf,
    pub target: Prf,
    pub expression: Prf,
    pub nsf1: Prf,
    pub sf1: Prf,
}

pub fn evaluate(gold: &[Vec<SentimentTuple>], pred: &[Vec<SentimentTuple>]) -> Result<Report, MetricsError> {
    Ok(Report {
        holder: span_f1(gold, pred, Role::Holder)?,
        target: span_f1(gold, pred, Role::Target)?,
        expression: span_f1(gold, pred, Role::Expression)?,
        nsf1: graph_f1(gold, pred, false)?,
        sf1: graph_f1(gold, pred, true)?,
    })
}

impl Report {
    pub fn table(&self) -> String {
        let mut s = format!("{:<12}{:>10}{:>10}{:>10}\n", "metric", "P", "R", "F1");
        for (name, m) in [
            ("holder", &self.holder),
            ("target", &self.target),
            ("expression", &self.expression),
            ("NSF1", &self.nsf1),
            ("SF1", &self.sf1),
        ] {
            s += &format!("{:<12}{:>10.3}{:>10.3}{:>10.3}\n", name, m.precision, m.recall, m.f1);
        }
        s
    }
}

/// Lengths `[lo, hi)`; `hi` is `None` for the last bucket.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bucket {
    pub lo: usize,
    pub hi: Option<usize>,
    /// `None` when the bucket holds neither gold nor predicted items.
    pub f1: Option<Prf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Breakdown {
    /// Expression token F1 by expression length.
    pub expression: Vec<Bucket>,
    /// SF1 by tuple length (tokens over all roles).
    pub tuple: Vec<Bucket>,
}

fn bucket_of(edges: &[usize], len: usize) -> Option<usize> {
    edges.iter().rposition(|&e| e <= len)
}

fn ranges(edges: &[usize]) -> Vec<(usize, Option<usize>)> {
    edges
        .iter()
        .enumerate()
        .map(|(i, &lo)| (lo, edges.get(i + 1).copied()))
        .collect()
}

/// Length-bucketed scores. `edges` are increasing lower bounds; items
/// shorter than the first edge are ignored.
pub fn breakdown(gold: &[Vec<SentimentTuple>], pred: &[Vec<SentimentTuple>], edges: &[usize]) -> Result<Breakdown, MetricsError> {
    check(gold, pred)?;
    if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MetricsError::BadEdges);
    }
    let nb = edges.len();
    let mut expr = vec![(0, 0, 0); nb];
    let mut tup = vec![(0, 0, 0); nb];
    for (gs, ps) in gold.iter().zip(pred) {
        for (b, acc) in expr.iter_mut().enumerate() {
            let in_b = |t: &&SentimentTuple| bucket_of(edges, token_set(&t.expression).len()) == Some(b);
            let gt = role_tokens(gs.iter().filter(in_b), Role::Expression);
            let pt = role_tokens(ps.iter().filter(in_b), Role::Expression);
            acc.0 += gt.intersection(&pt).count();
            acc.1 += pt.len();
            acc.2 += gt.len();
        }
        for (b, acc) in tup.iter_mut().enumerate() {
            let in_b = |t: &&SentimentTuple| bucket_of(edges, t.length()) == Some(b);
            let (c, p, g) = matches(gs.iter().filter(in_b), ps.iter().filter(in_b), true);
            acc.0 += c;
            acc.1 += p;
            acc.2 += g;
        }
    }
    let finish = |counts: Vec<(usize, usize, usize)>| {
        ranges(edges)
            .into_iter()
            .zip(counts)
            .map(|((lo, hi), (c, p, g))| Bucket {
                lo,
                hi,
                f1: (p + g > 0).then(|| Prf::from_counts(c, p, g)),
            })
            .collect()
    };
    Ok(Breakdown {
        expression: finish(expr),
        tuple: finish(tup),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: Option<(usize, usize)>, tg: Option<(usize, usize)>, e: (usize, usize), p: Polarity) -> SentimentTuple {
        let s = |x: Option<(usize, usize)>| x.map(|(a, b)| vec![Span::new(a, b)]).unwrap_or_default();
        SentimentTuple::new(s(h), s(tg), vec![Span::new(e.0, e.1)], p)
    }

    #[test]
    fn degenerate_counts() {
        let f = Prf::from_counts(0, 0, 3);
        assert_eq!((f.precision, f.recall, f.f1), (0.0, 0.0, 0.0));
        assert_eq!(Prf::from_counts(0, 0, 0).f1, 0.0);
    }

    #[test]
    fn misaligned() {
        assert!(span_f1(&[vec![]], &[], Role::Holder).is_err());
    }

    #[test]
    fn bucket_assignment() {
        let gold = vec![vec![
            t(None, None, (0, 0), Polarity::Positive),
            t(Some((2, 3)), None, (5, 7), Polarity::Negative),
        ]];
        let b = breakdown(&gold, &gold, &[1, 2, 4]).unwrap();
        assert_eq!(b.expression[0].f1.unwrap().gold, 1);
        assert_eq!(b.expression[1].f1.unwrap().gold, 3);
        assert!(b.expression[2].f1.is_none());
        assert_eq!(b.tuple[0].f1.unwrap().gold, 1);
        assert!(b.tuple[1].f1.is_none());
        assert_eq!(b.tuple[2].f1.unwrap().gold, 1);
        assert_eq!(b.tuple[2].hi, None);
    }
}
