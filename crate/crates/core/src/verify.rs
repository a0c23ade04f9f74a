//! Self-checks against exhaustive and numerical oracles.
//!
//! Each suite returns a [`SuiteReport`]; the CLI `verify` command and the
//! acceptance tests run them with different sizes.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::charts::{
    brute_force, enumerate_projective_trees, inside, tree_score, BruteMode, ChartArena, ConstraintMask, DepTree, ScoreSet,
};
use crate::constraints::{
    build_stage1_mask, build_stage2_mask, normalize_spans, recover_stage1, recover_stage2, LabeledTargets, SentimentTuple, Span,
};
use crate::labels::{ArcLabel, LabelSet, Polarity};
use crate::scoring::{EncoderKind, LabelScores, Model, ModelConfig, ScorerKind, StageContext, StageScores, Vocab};
use crate::training::{example_gradient, example_loss, stage_loss, StageTarget, TrainingExample};

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    /// Largest observed error measure of the suite.
    pub worst: f64,
    pub seconds: f64,
    /// First failure, if any.
    pub detail: Option<String>,
}

struct Tally {
    name: String,
    start: Instant,
    checks: usize,
    failures: usize,
    worst: f64,
    detail: Option<String>,
}

impl Tally {
    fn new(name: &str) -> Self {
        Tally {
            name: name.into(),
            start: Instant::now(),
            checks: 0,
            failures: 0,
            worst: 0.0,
            detail: None,
        }
    }

    fn check(&mut self, ok: bool, err: f64, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if err.is_finite() {
            self.worst = self.worst.max(err);
        } else {
            self.worst = f64::INFINITY;
        }
        if !ok {
            self.failures += 1;
            if self.detail.is_none() {
                self.detail = Some(detail());
            }
        }
    }

    fn done(self) -> SuiteReport {
        SuiteReport {
            name: self.name,
            passed: self.failures == 0 && self.checks > 0,
            checks: self.checks,
            failures: self.failures,
            worst: self.worst,
            seconds: self.start.elapsed().as_secs_f64(),
            detail: self.detail,
        }
    }
}

/// Uniform scores in `[-scale, scale]` for every table entry.
pub fn random_scores(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> ScoreSet<f64> {
    let mut s = ScoreSet::zeros(n);
    let mut fill = |t: &mut [f64]| t.iter_mut().for_each(|x| *x = rng.gen_range(-scale..=scale));
    fill(s.arc_table_mut());
    fill(s.sib_table_mut());
    fill(s.span_left_table_mut());
    fill(s.span_right_table_mut());
    s
}

fn random_span(n: usize, max_len: usize, rng: &mut ChaCha8Rng) -> Span {
    let a = rng.gen_range(0..n);
    let b = (a + rng.gen_range(0..max_len)).min(n - 1);
    Span::new(a, b)
}

fn disjoint_from(s: &Span, taken: &[Span]) -> bool {
    taken.iter().all(|t| !t.overlaps(s))
}

/// A random satisfiable stage-1 or stage-2 mask built from random tuples.
pub fn random_mask(n: usize, rng: &mut ChaCha8Rng) -> ConstraintMask {
    loop {
        let mut taken = Vec::new();
        let mut pick = |rng: &mut ChaCha8Rng, p: f64| -> Vec<Span> {
            if !rng.gen_bool(p) {
                return vec![];
            }
            let s = random_span(n, 3, rng);
            if disjoint_from(&s, &taken) {
                taken.push(s);
                vec![s]
            } else {
                vec![]
            }
        };
        let expression = pick(rng, 1.0);
        if expression.is_empty() {
            continue;
        }
        let holders = pick(rng, 0.6);
        let targets = pick(rng, 0.6);
        let mask = if rng.gen_bool(0.5) {
            let second = pick(rng, 0.4);
            let mut tuples = vec![SentimentTuple::new(holders, targets, expression, Polarity::Positive)];
            if !second.is_empty() {
                tuples.push(SentimentTuple::new(vec![], vec![], second, Polarity::Negative));
            }
            build_stage1_mask(n, &tuples).map(|(m, _)| m)
        } else {
            build_stage2_mask(n, &expression, &holders, &targets).map(|(m, _)| m)
        };
        if let Ok(m) = mask {
            if inside(&ScoreSet::<f64>::zeros(n), Some(&m)).is_ok_and(|z| z > f64::NEG_INFINITY) {
                return m;
            }
        }
    }
}

/// Inside and Viterbi against exhaustive enumeration for every
/// `n in 1..=n_max`: `trials` random score sets per `n`, each checked
/// unmasked and under one of `masks` random masks (used round-robin).
pub fn oracle_suite(n_max: usize, trials: usize, masks: usize, seed: u64) -> (SuiteReport, SuiteReport) {
    let mut ins = Tally::new("inside-oracle");
    let mut vit = Tally::new("viterbi-oracle");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arena = ChartArena::new();
    for n in 1..=n_max {
        let mask_pool: Vec<ConstraintMask> = (0..masks.max(1)).map(|_| random_mask(n, &mut rng)).collect();
        for t in 0..trials {
            let s = random_scores(n, 3.0, &mut rng);
            for mask in [None, Some(&mask_pool[t % mask_pool.len()])] {
                let z = arena.inside(&s, mask).unwrap_or(f64::NAN);
                let b = brute_force(&s, mask, BruteMode::Sum).expect("n within oracle range");
                let err = (z - b.value).abs();
                ins.check(err <= 1e-9, err, || format!("n={n} trial={t} masked={}: inside {z} vs oracle {}", mask.is_some(), b.value));

                let bm = brute_force(&s, mask, BruteMode::Max).expect("n within oracle range");
                let first = arena.viterbi(&s, mask, None);
                let second = arena.viterbi(&s, mask, None);
                match (first, second) {
                    (Ok((tree, score)), Ok((tree2, _))) => {
                        let attained = tree_score(&s, &tree).unwrap_or(f64::NAN);
                        let err = (score - bm.value).abs().max((attained - score).abs());
                        let legal = mask.is_none_or(|m| m.permits(&tree));
                        vit.check(err <= 1e-9 && legal && tree == tree2, err, || {
                            format!("n={n} trial={t}: viterbi {score} (tree {attained}) vs oracle {}", bm.value)
                        });
                    }
                    (e1, e2) => vit.check(false, f64::INFINITY, || format!("n={n} trial={t}: {e1:?} / {e2:?}")),
                }
            }
        }
    }
    (ins.done(), vit.done())
}

/// Part marginals against central differences of the log-partition
/// function (step 1e-4, relative tolerance 1e-4).
pub fn marginal_suite(instances: usize, n_max: usize, seed: u64) -> SuiteReport {
    let mut tally = Tally::new("marginal-gradient");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arena = ChartArena::new();
    let h = 1e-4;
    for i in 0..instances {
        let n = 1 + i % n_max.max(1);
        let s = random_scores(n, 2.0, &mut rng);
        let mask = (i % 2 == 1).then(|| random_mask(n, &mut rng));
        let (_, mu) = arena.marginals(&s, mask.as_ref()).expect("satisfiable");
        for p in ScoreSet::<f64>::valid_parts(n) {
            let mut plus = s.clone();
            *plus.part_mut(p) += h;
            let mut minus = s.clone();
            *minus.part_mut(p) -= h;
            let fd = (arena.inside(&plus, mask.as_ref()).unwrap() - arena.inside(&minus, mask.as_ref()).unwrap()) / (2.0 * h);
            let a = mu.part(p);
            let err = (a - fd).abs();
            let rel = err / a.abs().max(fd.abs()).max(1e-300);
            tally.check(err <= 1e-4 * a.abs().max(fd.abs()) + 1e-9, rel.min(err), || {
                format!("instance {i} n={n} part {p:?}: marginal {a} vs difference {fd}")
            });
        }
    }
    tally.done()
}

/// The three-token example used by the gradient checks.
pub fn tiny_example() -> TrainingExample {
    let tokens: Vec<String> = ["alice", "loves", "cats"].iter().map(|s| s.to_string()).collect();
    let tuple = SentimentTuple::new(vec![Span::single(0)], vec![Span::single(2)], vec![Span::single(1)], Polarity::Positive);
    TrainingExample::build("tiny", &tokens, &[tuple]).expect("well-formed")
}

/// A deliberately small architecture for numerical checks.
pub fn tiny_config(scorer: ScorerKind, encoder: EncoderKind, seed: u64) -> ModelConfig {
    ModelConfig {
        scorer,
        encoder,
        embed_dim: 4,
        hidden_dim: 3,
        proj_dim: 3,
        sib_dim: 2,
        label_dim: 3,
        rnn_layers: 2,
        sparse_bits: 8,
        seed,
    }
}

fn randomize(model: &mut Model<f64>, scale: f64, rng: &mut ChaCha8Rng) {
    for b in model.params_mut().blocks_mut() {
        for x in &mut b.data {
            *x = rng.gen_range(-scale..=scale);
        }
    }
}

/// Analytic loss gradient against central differences of the loss on
/// `trials` random parameterizations (relative tolerance 1e-3).
pub fn gradient_suite(scorer: ScorerKind, encoder: EncoderKind, trials: usize, seed: u64) -> SuiteReport {
    let name = match scorer {
        ScorerKind::Neural => format!("loss-gradient-neural-{encoder:?}").to_lowercase(),
        ScorerKind::Sparse => "loss-gradient-sparse".to_string(),
    };
    let mut tally = Tally::new(&name);
    let ex = tiny_example();
    let vocab = Vocab::build([ex.tokens.as_slice()], 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    for trial in 0..trials {
        let mut model = Model::<f64>::new(tiny_config(scorer, encoder, seed + trial as u64), vocab.clone());
        randomize(&mut model, 0.8, &mut rng);
        let (_, grad) = example_gradient(&model, &ex).expect("finite loss");
        let coords: Vec<_> = model.params().coordinates().collect();
        for (id, k) in coords {
            let x = model.params().get(id)[k];
            model.params_mut().get_mut(id)[k] = x + h;
            let lp = example_loss(&model, &ex).unwrap();
            model.params_mut().get_mut(id)[k] = x - h;
            let lm = example_loss(&model, &ex).unwrap();
            model.params_mut().get_mut(id)[k] = x;
            let fd = (lp - lm) / (2.0 * h);
            let a = grad.get(id)[k];
            let err = (a - fd).abs();
            let scale = a.abs().max(fd.abs());
            tally.check(err <= 1e-3 * scale + 1e-7, if scale > 1e-6 { err / scale } else { 0.0 }, || {
                let block = &model.params().blocks()[id.0].name;
                format!("trial {trial} {block}[{k}]: analytic {a} vs difference {fd}")
            });
        }
    }
    tally.done()
}

fn single_role_options(n: usize, max_len: usize) -> Vec<Span> {
    let mut v = Vec::new();
    for a in 0..n {
        for b in a..n.min(a + max_len) {
            v.push(Span::new(a, b));
        }
    }
    v
}

/// Every single-tuple annotation over `n` tokens with spans of length at
/// most `max_len`: one- or two-segment expressions, optional holder and
/// target, all pairwise disjoint (segments also non-adjacent).
pub fn single_tuple_annotations(n: usize, max_len: usize) -> Vec<SentimentTuple> {
    let spans = single_role_options(n, max_len);
    let mut expressions: Vec<Vec<Span>> = spans.iter().map(|&s| vec![s]).collect();
    for (i, a) in spans.iter().enumerate() {
        for b in &spans[i + 1..] {
            if b.start > a.end + 1 {
                expressions.push(vec![*a, *b]);
            }
        }
    }
    let mut out = Vec::new();
    let optional: Vec<Option<Span>> = std::iter::once(None).chain(spans.iter().copied().map(Some)).collect();
    for (ei, e) in expressions.iter().enumerate() {
        for h in &optional {
            for t in &optional {
                let mut taken = e.clone();
                let mut ok = true;
                for s in [h, t].into_iter().flatten() {
                    ok &= disjoint_from(s, &taken);
                    taken.push(*s);
                }
                if ok {
                    let pol = Polarity::ALL[ei % 3];
                    out.push(SentimentTuple::new(h.iter().copied().collect(), t.iter().copied().collect(), e.clone(), pol));
                }
            }
        }
    }
    out
}

/// Exhaustive conversion check: for each annotation and stage, a tree is
/// admitted by the mask exactly when recovery from its gold-labeled copy
/// returns the annotation.
pub fn roundtrip_suite(n_max: usize, max_len: usize) -> SuiteReport {
    let mut tally = Tally::new("conversion-roundtrip");
    for n in 1..=n_max {
        let trees: Vec<DepTree> = enumerate_projective_trees(n)
            .into_iter()
            .map(|h| DepTree::new(h).expect("enumerated trees are valid"))
            .collect();
        for tuple in single_tuple_annotations(n, max_len) {
            let (m1, l1) = build_stage1_mask(n, std::slice::from_ref(&tuple)).expect("valid annotation");
            let gold1 = vec![(normalize_spans(&tuple.expression), tuple.polarity)];
            let (m2, l2) =
                build_stage2_mask(n, &tuple.expression, &tuple.holder, &tuple.target).expect("valid annotation");
            let gold2 = (normalize_spans(&tuple.holder), normalize_spans(&tuple.target));
            for tree in &trees {
                let admitted = m1.permits(tree);
                let recovered = recover_stage1(&l1.label_tree(tree)) == gold1;
                tally.check(admitted == recovered, (admitted != recovered) as u8 as f64, || {
                    format!("stage 1, n={n}, {tuple:?}, heads {:?}: admitted={admitted} recovered={recovered}", tree.heads())
                });
                let admitted = m2.permits(tree);
                let recovered = recover_stage2(&l2.label_tree(tree), &tuple.expression).ok().as_ref() == Some(&gold2);
                tally.check(admitted == recovered, (admitted != recovered) as u8 as f64, || {
                    format!("stage 2, n={n}, {tuple:?}, heads {:?}: admitted={admitted} recovered={recovered}", tree.heads())
                });
            }
        }
    }
    tally.done()
}

/// Loss non-negativity over random parameter draws on `corpus`, and the
/// exact zero of the single-label, unconstrained case.
pub fn loss_sanity_suite(corpus: &[TrainingExample], draws: usize, seed: u64) -> SuiteReport {
    let mut tally = Tally::new("loss-sanity");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocab::build(corpus.iter().map(|e| e.tokens.as_slice()), 1);
    for d in 0..draws {
        let (scorer, encoder) = match d % 3 {
            0 => (ScorerKind::Neural, EncoderKind::Birnn),
            1 => (ScorerKind::Neural, EncoderKind::Window),
            _ => (ScorerKind::Sparse, EncoderKind::Birnn),
        };
        let mut model = Model::<f64>::new(tiny_config(scorer, encoder, seed + d as u64), vocab.clone());
        randomize(&mut model, 1.5, &mut rng);
        for ex in corpus {
            match example_loss(&model, ex) {
                Ok(l) => tally.check(l >= 0.0, -l.min(0.0), || format!("draw {d} {}: loss {l}", ex.id)),
                Err(e) => tally.check(false, f64::INFINITY, || format!("draw {d}: {e}")),
            }
        }
    }
    let single = LabelSet::new(vec![ArcLabel::Null]);
    for n in 1..=5 {
        let s = random_scores(n, 3.0, &mut rng);
        let npos = n + 1;
        let scores = StageScores {
            scores: s,
            labels: LabelScores::from_logits(npos, 1, vec![rng.gen_range(-2.0..2.0); npos * npos]),
        };
        let arcs: Vec<_> = (0..=n)
            .flat_map(|h| (1..=n).filter(move |&m| m != h).map(move |m| (h, m, ArcLabel::Null)))
            .collect();
        let target = StageTarget {
            ctx: StageContext::expression(n),
            mask: ConstraintMask::all_permissive(n),
            targets: LabeledTargets::from_arcs(n, &arcs),
        };
        let l = stage_loss("degenerate", &scores, &target, &single).unwrap_or(f64::NAN);
        tally.check(l == 0.0, l.abs(), || format!("single-label all-trees n={n}: loss {l}"));
    }
    tally.done()
}

/// Sizes for [`run_all`].
#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n_max: 7,
            trials: 200,
            seed: 1,
        }
    }
}

/// Oracle, gradient and round-trip suites at the requested sizes.
pub fn run_all(opts: &VerifyOptions) -> Vec<SuiteReport> {
    let n_max = opts.n_max.clamp(1, crate::charts::BRUTE_FORCE_MAX_N);
    let (ins, vit) = oracle_suite(n_max, opts.trials, 50, opts.seed);
    let mut out = vec![ins, vit];
    out.push(marginal_suite(opts.trials.clamp(1, 20), n_max.min(5), opts.seed + 1));
    let grad_trials = opts.trials.clamp(1, 10);
    out.push(gradient_suite(ScorerKind::Neural, EncoderKind::Birnn, grad_trials, opts.seed + 2));
    out.push(gradient_suite(ScorerKind::Neural, EncoderKind::Window, grad_trials, opts.seed + 3));
    out.push(gradient_suite(ScorerKind::Sparse, EncoderKind::Birnn, grad_trials, opts.seed + 4));
    out.push(roundtrip_suite(n_max.min(6), 3));
    let corpus: Vec<TrainingExample> = crate::synthetic::templated_corpus(10, opts.seed)
        .iter()
        .map(|e| TrainingExample::build(&e.sentence.id, &e.sentence.tokens, &e.tuples).expect("synthetic data is well-formed"))
        .collect();
    out.push(loss_sanity_suite(&corpus, opts.trials.clamp(1, 100), opts.seed + 5));
    out
}
