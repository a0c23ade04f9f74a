use std::path::Path;

use latent_ssa::constraints::{SentimentTuple, Span};
use latent_ssa::data::{
    convert, dataset_stats, load_dataset, parse_dataset, save_dataset, to_json, Alignment, DataError, Example, RawOpinion,
    RawRole, RawSentence, Sentence,
};
use latent_ssa::labels::Polarity;

fn fixture() -> Vec<Example> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/three_sentences.json");
    load_dataset(&path, Alignment::Strict).unwrap()
}

fn raw(text: &str, offsets: &str, polarity: &str) -> RawSentence {
    RawSentence {
        sent_id: "s-1".into(),
        text: text.into(),
        opinions: vec![RawOpinion {
            source: RawRole::default(),
            target: RawRole::default(),
            expression: RawRole(vec!["x".into()], vec![offsets.into()]),
            polarity: Some(polarity.into()),
            intensity: None,
        }],
    }
}

#[test]
fn fixture_spans() {
    let data = fixture();
    assert_eq!(data.len(), 3);
    assert!(data[0].tuples.is_empty());
    assert_eq!(data[0].sentence.tokens[1], "café");
    // character offsets, not bytes: "was" starts at char 9
    assert_eq!(data[0].sentence.offsets[2], (9, 12));

    let fx2 = &data[1].tuples;
    assert_eq!(
        fx2,
        &vec![SentimentTuple::new(
            vec![Span::new(0, 0)],
            vec![Span::new(4, 6)],
            vec![Span::new(1, 3), Span::new(7, 8)],
            Polarity::Negative,
        )]
    );

    let fx3 = &data[2].tuples;
    assert_eq!(fx3.len(), 2);
    assert!(fx3[0].holder.is_empty());
    assert_eq!(fx3[0].target, vec![Span::new(0, 0)]);
    assert_eq!(fx3[0].expression, vec![Span::new(2, 4)]);
    assert_eq!(fx3[1].holder, vec![Span::new(7, 8)]);
    assert_eq!(fx3[1].expression, vec![Span::new(6, 6)]);
    assert_eq!(fx3[1].polarity, Polarity::Neutral);
}

#[test]
fn json_round_trip() {
    let data = fixture();
    let again = parse_dataset(&to_json(&data), Path::new("<mem>"), Alignment::Strict).unwrap();
    assert_eq!(again, data);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    save_dataset(&path, &data).unwrap();
    assert_eq!(load_dataset(&path, Alignment::Strict).unwrap(), data);
}

#[test]
fn single_token_offset() {
    let ex = convert(&raw("a b c", "2:3", "Positive"), Alignment::Strict).unwrap();
    assert_eq!(ex.tuples[0].expression, vec![Span::new(1, 1)]);
    let s = Sentence::new("s", "a b c");
    assert_eq!(s.snap(2, 3), Some((Span::new(1, 1), false)));
}

#[test]
fn misaligned_offsets_snap_or_fail() {
    let r = raw("good morning all", "1:7", "Positive");
    let ex = convert(&r, Alignment::Snap).unwrap();
    assert_eq!(ex.tuples[0].expression, vec![Span::new(0, 1)]);
    match convert(&r, Alignment::Strict) {
        Err(DataError::Sentence { sent_id, .. }) => assert_eq!(sent_id, "s-1"),
        other => panic!("expected a sentence error, got {other:?}"),
    }
}

#[test]
fn unknown_polarity_names_the_sentence() {
    let err = convert(&raw("a b c", "0:1", "Ecstatic"), Alignment::Snap).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("s-1") && msg.contains("Ecstatic"), "{msg}");
}

#[test]
fn malformed_json_reports_position() {
    let err = parse_dataset("[{\"sent_id\": }]", Path::new("bad.json"), Alignment::Snap).unwrap_err();
    match err {
        DataError::Json { line, column, .. } => {
            assert_eq!(line, 1);
            assert!(column > 1);
        }
        other => panic!("expected a JSON error, got {other:?}"),
    }
}

#[test]
fn stats_of_a_long_target() {
    let ex = Example {
        sentence: Sentence::new("s", "the very long product name is great"),
        tuples: vec![SentimentTuple::new(vec![], vec![Span::new(0, 4)], vec![Span::new(6, 6)], Polarity::Positive)],
    };
    let s = dataset_stats(&[ex]);
    assert_eq!(s.target.fraction_ge4, Some(1.0));
    assert_eq!(s.target.max_len, Some(5));
    assert_eq!(s.holder.count, 0);
    assert_eq!(s.holder.fraction_ge4, None);
    assert_eq!(s.holder.max_len, None);
}

#[test]
fn stats_of_empty_dataset() {
    let s = dataset_stats(&[]);
    assert_eq!(s.sentences, 0);
    assert_eq!(s.expression.fraction_ge4, None);
    assert_eq!(s.expression.max_len, None);
}

#[test]
fn stats_of_fixture() {
    let s = dataset_stats(&fixture());
    assert_eq!((s.sentences, s.tuples), (3, 3));
    assert_eq!(s.holder.histogram, vec![0, 1, 1]);
    assert_eq!(s.target.histogram, vec![0, 2, 0, 1]);
    assert_eq!(s.expression.histogram, vec![0, 1, 0, 1, 0, 1]);
    assert_eq!(s.expression.fraction_ge4, Some(1.0 / 3.0));
    assert_eq!(s.holder.fraction_ge4, Some(0.0));
}
