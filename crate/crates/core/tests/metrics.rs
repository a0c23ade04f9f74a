use latent_ssa::constraints::{SentimentTuple, Span};
use latent_ssa::labels::Polarity;
use latent_ssa::metrics::{breakdown, evaluate, graph_f1, span_f1, Role};
use proptest::prelude::*;

fn tuple(h: &[(usize, usize)], t: &[(usize, usize)], e: &[(usize, usize)], p: Polarity) -> SentimentTuple {
    let spans = |xs: &[(usize, usize)]| xs.iter().map(|&(a, b)| Span::new(a, b)).collect();
    SentimentTuple::new(spans(h), spans(t), spans(e), p)
}

fn gold() -> Vec<Vec<SentimentTuple>> {
    vec![
        vec![tuple(&[(0, 0)], &[(4, 6)], &[(1, 3)], Polarity::Negative)],
        vec![],
        vec![
            tuple(&[], &[(0, 0)], &[(2, 4)], Polarity::Negative),
            tuple(&[(7, 8)], &[(0, 0)], &[(6, 6)], Polarity::Neutral),
        ],
    ]
}

#[test]
fn identical_predictions_score_one() {
    let r = evaluate(&gold(), &gold()).unwrap();
    for p in [r.holder, r.target, r.expression, r.nsf1, r.sf1] {
        assert_eq!(p.f1, 1.0);
    }
}

#[test]
fn empty_predictions_score_zero() {
    let empty = vec![vec![]; 3];
    let r = evaluate(&gold(), &empty).unwrap();
    assert_eq!((r.sf1.precision, r.sf1.recall, r.sf1.f1), (0.0, 0.0, 0.0));
    assert_eq!((r.expression.precision, r.expression.recall, r.expression.f1), (0.0, 0.0, 0.0));
}

#[test]
fn partial_token_overlap() {
    let g = vec![vec![tuple(&[], &[], &[(2, 4)], Polarity::Positive)]];
    let p = vec![vec![tuple(&[], &[], &[(3, 5)], Polarity::Positive)]];
    let f = span_f1(&g, &p, Role::Expression).unwrap();
    assert!((f.f1 - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!((f.correct, f.predicted, f.gold), (2, 3, 3));
}

#[test]
fn polarity_only_affects_sf1() {
    let g = vec![vec![tuple(&[(0, 0)], &[(2, 2)], &[(1, 1)], Polarity::Positive)]];
    let p = vec![vec![tuple(&[(0, 0)], &[(2, 2)], &[(1, 1)], Polarity::Negative)]];
    let r = evaluate(&g, &p).unwrap();
    assert_eq!(r.nsf1.f1, 1.0);
    assert_eq!(r.sf1.f1, 0.0);
}

#[test]
fn one_match_and_one_spurious() {
    let g = vec![vec![
        tuple(&[(0, 0)], &[(2, 2)], &[(1, 1)], Polarity::Positive),
        tuple(&[], &[(5, 5)], &[(4, 4)], Polarity::Negative),
    ]];
    let p = vec![vec![
        tuple(&[(0, 0)], &[(2, 2)], &[(1, 1)], Polarity::Positive),
        tuple(&[], &[(6, 6)], &[(7, 7)], Polarity::Negative),
    ]];
    let f = graph_f1(&g, &p, true).unwrap();
    assert_eq!((f.precision, f.recall, f.f1), (0.5, 0.5, 0.5));
}

#[test]
fn single_bucket_equals_global() {
    let mut pred = gold();
    pred[2].pop();
    pred[1].push(tuple(&[], &[(1, 1)], &[(0, 0)], Polarity::Positive));
    let r = evaluate(&gold(), &pred).unwrap();
    let b = breakdown(&gold(), &pred, &[1]).unwrap();
    assert_eq!(b.tuple[0].f1.as_ref().unwrap(), &r.sf1);
    assert_eq!(b.expression[0].f1.as_ref().unwrap(), &r.expression);
}

#[test]
fn empty_bucket_is_none() {
    let b = breakdown(&gold(), &gold(), &[1, 50]).unwrap();
    assert!(b.tuple[1].f1.is_none());
    assert!(b.expression[1].f1.is_none());
    assert!(breakdown(&gold(), &gold(), &[3, 2]).is_err());
}

#[test]
fn misaligned_inputs_are_rejected() {
    assert!(evaluate(&gold(), &[]).is_err());
}

fn arb_tuple() -> impl Strategy<Value = SentimentTuple> {
    let span = (0usize..6, 0usize..3).prop_map(|(a, l)| (a, a + l));
    (
        proptest::option::of(span.clone()),
        proptest::option::of(span.clone()),
        span,
        0usize..3,
    )
        .prop_map(|(h, t, e, p)| {
            let pol = [Polarity::Positive, Polarity::Negative, Polarity::Neutral][p];
            tuple(
                h.as_slice(),
                t.as_slice(),
                &[e],
                pol,
            )
        })
}

fn arb_corpus() -> impl Strategy<Value = (Vec<Vec<SentimentTuple>>, Vec<Vec<SentimentTuple>>)> {
    proptest::collection::vec(
        (proptest::collection::vec(arb_tuple(), 0..4), proptest::collection::vec(arb_tuple(), 0..4)),
        1..6,
    )
    .prop_map(|pairs| pairs.into_iter().unzip())
}

proptest! {
    #[test]
    fn nsf1_bounds_sf1((g, p) in arb_corpus()) {
        let r = evaluate(&g, &p).unwrap();
        prop_assert!(r.nsf1.f1 >= r.sf1.f1);
        prop_assert!(r.nsf1.correct >= r.sf1.correct);
        for x in [r.holder, r.target, r.expression, r.nsf1, r.sf1] {
            prop_assert!((0.0..=1.0).contains(&x.f1));
        }
    }
}
