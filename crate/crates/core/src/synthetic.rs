//! Seeded synthetic corpora: a templated opinion corpus with gold tuples,
//! and unannotated random sentences for throughput runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::TrainConfig;
use crate::constraints::{SentimentTuple, Span};
use crate::data::{Example, Sentence};
use crate::labels::Polarity;

const HOLDERS: &[&str] = &["john", "mary", "the critics", "my neighbour", "local experts"];
const TARGETS: &[&str] = &[
    "the phone",
    "the new camera",
    "this hotel",
    "the food",
    "the battery life",
];
const POS_VERBS: &[&str] = &["loves", "really likes"];
const NEG_VERBS: &[&str] = &["hates", "complained about"];
const NEU_VERBS: &[&str] = &["mentioned"];
const POS_ADJS: &[&str] = &["great", "really good"];
const NEG_ADJS: &[&str] = &["terrible", "very bad"];
const FILLERS: &[&str] = &["yesterday", "today", "again", "last week"];

/// Builds a sentence from phrases, returning the token span of each.
struct Builder {
    tokens: Vec<String>,
}

impl Builder {
    fn new() -> Self {
        Builder { tokens: Vec::new() }
    }

    fn push(&mut self, phrase: &str) -> Span {
        let start = self.tokens.len();
        self.tokens.extend(phrase.split_whitespace().map(str::to_string));
        Span::new(start, self.tokens.len() - 1)
    }

    fn finish(self, id: String, tuples: Vec<SentimentTuple>) -> Example {
        Example {
            sentence: Sentence::new(&id, &self.tokens.join(" ")),
            tuples,
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty lexicon")
}

fn verb(rng: &mut ChaCha8Rng) -> (&'static str, Polarity) {
    match rng.gen_range(0..5) {
        0 | 1 => (pick(rng, POS_VERBS), Polarity::Positive),
        2 | 3 => (pick(rng, NEG_VERBS), Polarity::Negative),
        _ => (pick(rng, NEU_VERBS), Polarity::Neutral),
    }
}

fn adjective(rng: &mut ChaCha8Rng) -> (&'static str, Polarity) {
    if rng.gen_bool(0.5) {
        (pick(rng, POS_ADJS), Polarity::Positive)
    } else {
        (pick(rng, NEG_ADJS), Polarity::Negative)
    }
}

fn one(rng: &mut ChaCha8Rng, id: String) -> Example {
    let mut b = Builder::new();
    let template = rng.gen_range(0..5);
    let tuples = match template {
        // holder verb target .
        0 => {
            let h = b.push(pick(rng, HOLDERS));
            let (v, p) = verb(rng);
            let e = b.push(v);
            let t = b.push(pick(rng, TARGETS));
            b.push(".");
            vec![SentimentTuple::new(vec![h], vec![t], vec![e], p)]
        }
        // target is adjective .
        1 => {
            let t = b.push(pick(rng, TARGETS));
            b.push("is");
            let (a, p) = adjective(rng);
            let e = b.push(a);
            b.push(".");
            vec![SentimentTuple::new(vec![], vec![t], vec![e], p)]
        }
        // according to holder , target was adjective .
        2 => {
            b.push("according to");
            let h = b.push(pick(rng, HOLDERS));
            b.push(",");
            let t = b.push(pick(rng, TARGETS));
            b.push("was");
            let (a, p) = adjective(rng);
            let e = b.push(a);
            b.push(".");
            vec![SentimentTuple::new(vec![h], vec![t], vec![e], p)]
        }
        // holder verb target but target is adjective .
        3 => {
            let h = b.push(pick(rng, HOLDERS));
            let (v, p1) = verb(rng);
            let e1 = b.push(v);
            let t1 = b.push(pick(rng, TARGETS));
            b.push("but");
            let t2 = b.push(pick(rng, TARGETS));
            b.push("is");
            let (a, p2) = adjective(rng);
            let e2 = b.push(a);
            b.push(".");
            vec![
                SentimentTuple::new(vec![h], vec![t1], vec![e1], p1),
                SentimentTuple::new(vec![], vec![t2], vec![e2], p2),
            ]
        }
        // a sentence without opinions
        _ => {
            b.push(pick(rng, HOLDERS));
            b.push("bought");
            b.push(pick(rng, TARGETS));
            b.push(pick(rng, FILLERS));
            b.push(".");
            vec![]
        }
    };
    b.finish(id, tuples)
}

/// `count` templated sentences; identical for identical `(count, seed)`.
pub fn templated_corpus(count: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| one(&mut rng, format!("syn-{seed}-{i}"))).collect()
}

/// Training settings under which the templated corpus is learned: the
/// default architecture with a larger step and smaller batches, since 50
/// sentences give only two updates per epoch at the default batch size.
pub fn learnability_config() -> TrainConfig {
    TrainConfig {
        epochs: 50,
        lr: 0.005,
        batch_size: 8,
        ..TrainConfig::default()
    }
}

/// Unannotated sentences with lengths uniform in `avg_len / 2 ..= 3 *
/// avg_len / 2`, drawn from the templated lexicon.
pub fn random_sentences(count: usize, avg_len: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<&str> = [HOLDERS, TARGETS, POS_VERBS, NEG_VERBS, NEU_VERBS, POS_ADJS, NEG_ADJS, FILLERS]
        .iter()
        .flat_map(|l| l.iter().flat_map(|p| p.split_whitespace()))
        .collect();
    let lo = (avg_len / 2).max(1);
    let hi = (avg_len * 3 / 2).max(lo);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(lo..=hi);
            (0..n).map(|_| words.choose(&mut rng).unwrap().to_string()).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::build_stage1_mask;

    #[test]
    fn deterministic_and_well_formed() {
        let a = templated_corpus(50, 7);
        assert_eq!(a, templated_corpus(50, 7));
        for ex in &a {
            assert!(build_stage1_mask(ex.sentence.len(), &ex.tuples).is_ok(), "{:?}", ex);
        }
        assert!(a.iter().any(|e| e.tuples.is_empty()));
    }

    #[test]
    fn random_lengths_average() {
        let s = random_sentences(1000, 24, 3);
        let avg = s.iter().map(Vec::len).sum::<usize>() as f64 / 1000.0;
        assert!((avg - 24.0).abs() < 1.0, "{avg}");
    }
}
