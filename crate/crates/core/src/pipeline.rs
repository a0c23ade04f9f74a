//! Two-stage decoding: expressions first, then holders and targets for
//! each expression.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::charts::{ChartArena, DepTree};
use crate::constraints::{group_by_expression, normalize_spans, recover_stage1, recover_stage2, stage2_decode_mask, SentimentTuple, Span};
use crate::labels::{ArcLabel, Polarity};
use crate::num::Scalar;
use crate::scoring::{Encoded, LabelScores, Model, StageContext};

/// Root-child labels of the expression stage, or cross-arc labels of the
/// role stage, taken as the per-arc argmax.
fn label_arcs<T: Scalar>(tree: &DepTree, labels: &LabelScores<T>, set: &[ArcLabel], keep: impl Fn(usize, usize) -> bool) -> DepTree {
    let mut out = tree.unlabeled();
    for (h, m) in tree.arcs() {
        if keep(h, m) {
            out.set_label(m, set[labels.argmax(h, m)]);
        }
    }
    out
}

fn decode_expressions<T: Scalar>(model: &Model<T>, enc: &Encoded<T>, arena: &mut ChartArena<T>) -> Vec<(Vec<Span>, Polarity)> {
    let n = enc.n();
    let ctx = StageContext::expression(n);
    let s = model.scores(enc, &ctx).expect("expression-stage scores");
    let (tree, _) = arena.viterbi(&s.scores, None, None).expect("unconstrained decode");
    let labeled = label_arcs(&tree, &s.labels, model.label_set(ctx.stage).labels(), |h, _| h == 0);
    recover_stage1(&labeled)
}

fn decode_roles<T: Scalar>(
    model: &Model<T>,
    enc: &Encoded<T>,
    expression: &[Span],
    arena: &mut ChartArena<T>,
) -> (Vec<Span>, Vec<Span>) {
    let n = enc.n();
    let ctx = StageContext::role(n, expression);
    let s = model.scores(enc, &ctx).expect("role-stage scores");
    let mask = stage2_decode_mask(n, expression).expect("expression within bounds");
    let (tree, _) = arena.viterbi(&s.scores, Some(&mask), None).expect("expression-rooted decode");
    let root_children = tree.children(0);
    assert!(
        root_children.len() == 1 && expression.iter().any(|sp| sp.contains(root_children[0] - 1)),
        "role-stage root must lie inside the expression"
    );
    let inside = &ctx.in_expression;
    let labeled = label_arcs(&tree, &s.labels, model.label_set(ctx.stage).labels(), |h, m| {
        inside[h] && !inside[m]
    });
    recover_stage2(&labeled, expression).expect("decoded tree satisfies the role-stage contract")
}

/// Predicts tuples for one tokenized sentence, reusing `arena`.
///
/// Roles of an expression are reported in a single tuple, so an expression
/// span never occurs twice in the output. Tuples are sorted by expression
/// start.
pub fn predict_in<T: Scalar, S: AsRef<str>>(model: &Model<T>, tokens: &[S], arena: &mut ChartArena<T>) -> Vec<SentimentTuple> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let enc = model.encode(tokens).expect("encode");
    let expressions = decode_expressions(model, &enc, arena);
    finish(model, &enc, expressions, arena)
}

fn finish<T: Scalar>(
    model: &Model<T>,
    enc: &Encoded<T>,
    expressions: Vec<(Vec<Span>, Polarity)>,
    arena: &mut ChartArena<T>,
) -> Vec<SentimentTuple> {
    let mut out: Vec<SentimentTuple> = expressions
        .into_iter()
        .map(|(expr, pol)| {
            let (holder, target) = decode_roles(model, enc, &expr, arena);
            SentimentTuple::new(holder, target, expr, pol)
        })
        .collect();
    out.sort_by(|a, b| a.expression.cmp(&b.expression));
    out
}

pub fn predict<T: Scalar, S: AsRef<str>>(model: &Model<T>, tokens: &[S]) -> Vec<SentimentTuple> {
    predict_in(model, tokens, &mut ChartArena::new())
}

/// Role decoding for the gold expressions (and polarities) of `gold`,
/// bypassing the expression stage.
pub fn predict_gold_expressions<T: Scalar, S: AsRef<str>>(
    model: &Model<T>,
    tokens: &[S],
    gold: &[SentimentTuple],
    arena: &mut ChartArena<T>,
) -> Vec<SentimentTuple> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let n = tokens.len();
    let expressions = match group_by_expression(n, gold) {
        Ok(g) => g.into_iter().map(|i| (normalize_spans(&i.expression), i.polarity)).collect(),
        Err(_) => return Vec::new(),
    };
    let enc = model.encode(tokens).expect("encode");
    finish(model, &enc, expressions, arena)
}

/// Result of a dataset-level run.
#[derive(Clone, Debug, Serialize)]
pub struct DatasetPrediction {
    /// One entry per input sentence, in input order; `Err` holds the
    /// message of a failed sentence.
    pub results: Vec<Result<Vec<SentimentTuple>, String>>,
    pub sentences: usize,
    pub seconds: f64,
    /// Sentences per second, absent for an empty input.
    pub throughput: Option<f64>,
}

impl DatasetPrediction {
    /// Predictions with failed sentences replaced by empty lists.
    pub fn tuples(&self) -> Vec<Vec<SentimentTuple>> {
        self.results.iter().map(|r| r.clone().unwrap_or_default()).collect()
    }

    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.is_err()).count()
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "prediction panicked".into()
    }
}

/// Order-preserving parallel prediction over `workers` threads (0 = all
/// cores). A panic inside one sentence becomes that sentence's error.
pub fn predict_dataset<T: Scalar, S: AsRef<str> + Sync>(model: &Model<T>, sentences: &[Vec<S>], workers: usize) -> DatasetPrediction {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    let start = Instant::now();
    let results = pool.install(|| {
        sentences
            .par_iter()
            .map_init(ChartArena::new, |arena, tokens| {
                catch_unwind(AssertUnwindSafe(|| predict_in(model, tokens, arena))).map_err(panic_message)
            })
            .collect::<Vec<_>>()
    });
    let seconds = start.elapsed().as_secs_f64();
    let throughput = (!sentences.is_empty()).then(|| sentences.len() as f64 / seconds.max(1e-9));
    DatasetPrediction {
        results,
        sentences: sentences.len(),
        seconds,
        throughput,
    }
}
