use latent_ssa::charts::ScoreSet;
use latent_ssa::constraints::{stage2_decode_mask, SentimentTuple, Span};
use latent_ssa::labels::{ArcLabel, Polarity};
use latent_ssa::pipeline::{predict, predict_dataset, predict_gold_expressions};
use latent_ssa::scoring::{Model, ModelConfig, ScorerKind, SparseSentence, Stage, StageContext, Vocab};
use latent_ssa::synthetic::{random_sentences, templated_corpus};
use latent_ssa::training::train;
use latent_ssa::{ChartArena64, TrainConfig};

const SENTENCE: [&str; 10] = [
    "Moscow", "Government", "expressed", "the", "wish", "to", "import", "the", "Mongolian", "meat.",
];

/// Intended heads (1-based positions, 0 = root) of the expression-stage
/// and role-stage trees.
const STAGE1_HEADS: [usize; 10] = [2, 0, 0, 5, 3, 7, 0, 10, 10, 7];
const STAGE2_HEADS: [usize; 10] = [2, 3, 0, 5, 3, 5, 5, 10, 10, 7];

fn tokens() -> Vec<String> {
    SENTENCE.iter().map(|s| s.to_string()).collect()
}

fn sparse_model() -> Model<f64> {
    let cfg = ModelConfig {
        scorer: ScorerKind::Sparse,
        ..ModelConfig::default()
    };
    Model::new(cfg, Vocab::from_words(vec!["<unk>".into(), "<root>".into(), "<eos>".into()]))
}

/// Lexicalized arc templates raised for every intended arc.
const ARC_TEMPLATES: [usize; 5] = [0, 3, 4, 5, 6];
/// Position of the (label, head word, modifier word) template.
const LABEL_TEMPLATE: usize = 2;

/// Raises the lexicalized arc features of the intended arcs and the
/// head/modifier label feature of the annotation-bearing arcs by `big`.
fn hand_construct() -> Model<f64> {
    let mut model = sparse_model();
    let sent = SparseSentence::new(&SENTENCE);
    let n = SENTENCE.len();
    let big = 10.0;
    let expr = [Span::new(2, 4)];
    let mut bumps: Vec<usize> = Vec::new();
    let mut buf = Vec::new();
    let sp = model.sparse().unwrap().clone();
    for (ctx, heads) in [(StageContext::expression(n), STAGE1_HEADS), (StageContext::role(n, &expr), STAGE2_HEADS)] {
        for (i, &h) in heads.iter().enumerate() {
            buf.clear();
            sp.arc_features(&sent, &ctx, h, i + 1, &mut buf);
            bumps.extend(ARC_TEMPLATES.iter().map(|&t| buf[t]));
        }
        let labeled: &[(usize, usize, ArcLabel)] = match ctx.stage {
            Stage::Expression => &[(0, 3, ArcLabel::Expression(Polarity::Neutral))],
            Stage::Role => &[(3, 2, ArcLabel::Holder), (5, 7, ArcLabel::Target)],
        };
        for &(h, m, l) in labeled {
            let a = model.label_set(ctx.stage).index_of(l).unwrap();
            buf.clear();
            sp.label_features(&sent, &ctx, h, m, a, &mut buf);
            bumps.push(buf[LABEL_TEMPLATE]);
        }
    }
    let w = model.params_mut().get_mut(sp.weights);
    for i in bumps {
        w[i] += big;
    }
    model
}

/// The intended tree is the unique maximizer when only arc scores are
/// non-zero and each modifier's intended head strictly beats every other.
fn assert_unique_argmax(scores: &ScoreSet<f64>, heads: &[usize]) {
    assert!(scores.sib_table().iter().all(|&x| x == 0.0));
    assert!(scores.span_left_table().iter().all(|&x| x == 0.0));
    assert!(scores.span_right_table().iter().all(|&x| x == 0.0));
    let n = heads.len();
    for m in 1..=n {
        let best = scores.arc(heads[m - 1], m);
        for h in (0..=n).filter(|&h| h != m && h != heads[m - 1]) {
            assert!(best > scores.arc(h, m), "modifier {m}: head {h} ties or beats the intended head");
        }
    }
}

#[test]
fn hand_constructed_parameters_recover_the_running_example() {
    let model = hand_construct();
    let n = SENTENCE.len();
    let enc = model.encode(&tokens()).unwrap();

    let s1 = model.scores(&enc, &StageContext::expression(n)).unwrap();
    assert_unique_argmax(&s1.scores, &STAGE1_HEADS);
    let expr = [Span::new(2, 4)];
    let s2 = model.scores(&enc, &StageContext::role(n, &expr)).unwrap();
    assert_unique_argmax(&s2.scores, &STAGE2_HEADS);
    let mask = stage2_decode_mask(n, &expr).unwrap();
    let tree2 = latent_ssa::DepTree::new(STAGE2_HEADS.to_vec()).unwrap();
    assert!(mask.permits(&tree2));

    let got = predict(&model, &tokens());
    let want = vec![SentimentTuple::new(
        vec![Span::new(0, 1)],
        vec![Span::new(6, 9)],
        vec![Span::new(2, 4)],
        Polarity::Neutral,
    )];
    assert_eq!(got, want);
}

#[test]
fn no_expression_gives_empty_output() {
    // zero weights: every label ties and resolves to the null label
    let model = sparse_model();
    assert_eq!(predict(&model, &tokens()), vec![]);
    assert_eq!(predict(&model, &Vec::<String>::new()), vec![]);
}

#[test]
fn prediction_is_idempotent_and_worker_independent() {
    let train_data = templated_corpus(12, 5);
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 4,
        lr: 0.01,
        ..TrainConfig::default()
    };
    let model = train::<f32>(&train_data, &[], &cfg, None).unwrap().model;
    let sents: Vec<Vec<String>> = templated_corpus(30, 6).into_iter().map(|e| e.sentence.tokens).collect();
    let a = predict_dataset(&model, &sents, 1);
    let b = predict_dataset(&model, &sents, 8);
    assert_eq!(a.tuples(), b.tuples());
    assert_eq!(a.failures(), 0);
    for s in &sents {
        assert_eq!(predict(&model, s), predict(&model, s));
    }
    for (s, tuples) in sents.iter().zip(a.tuples()) {
        for t in tuples {
            for sp in t.holder.iter().chain(&t.target).chain(&t.expression) {
                assert!(sp.start <= sp.end && sp.end < s.len());
            }
        }
    }
}

#[test]
fn empty_dataset_reports_no_throughput() {
    let model = sparse_model();
    let r = predict_dataset(&model, &Vec::<Vec<String>>::new(), 2);
    assert!(r.results.is_empty());
    assert_eq!(r.throughput, None);
}

#[test]
fn throughput_is_reported() {
    let model = sparse_model();
    let sents = random_sentences(40, 24, 9);
    let r = predict_dataset(&model, &sents, 0);
    assert_eq!(r.results.len(), 40);
    assert!(r.throughput.unwrap() > 0.0);
}

#[test]
fn gold_expression_mode_keeps_gold_expressions() {
    let model = hand_construct();
    let gold = vec![SentimentTuple::new(vec![], vec![], vec![Span::new(2, 4)], Polarity::Negative)];
    let got = predict_gold_expressions(&model, &tokens(), &gold, &mut ChartArena64::new());
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].expression, vec![Span::new(2, 4)]);
    assert_eq!(got[0].polarity, Polarity::Negative);
    assert_eq!(got[0].holder, vec![Span::new(0, 1)]);
    assert_eq!(got[0].target, vec![Span::new(6, 9)]);
}
