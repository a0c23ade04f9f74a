use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const UNK: usize = 0;
pub const ROOT: usize = 1;
pub const EOS: usize = 2;

const SPECIALS: [&str; 3] = ["<unk>", "<root>", "<eos>"];

/// Lowercased word index. Words rarer than the cutoff share the unknown
/// entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_words(words: Vec<String>) -> Self {
        let mut v = Vocab {
            words,
            index: HashMap::new(),
        };
        v.rebuild_index();
        v
    }

    /// Builds from token streams keeping words seen at least `min_count`
    /// times, in first-seen order.
    pub fn build<'a, I, S>(sentences: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut order = Vec::new();
        for sent in sentences {
            for w in sent {
                let key = w.as_ref().to_lowercase();
                let c = counts.entry(key.clone()).or_insert(0);
                if *c == 0 {
                    order.push(key);
                }
                *c += 1;
            }
        }
        let mut words: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        words.extend(
            order
                .into_iter()
                .filter(|w| counts[w] >= min_count.max(1) && !SPECIALS.contains(&w.as_str())),
        );
        Self::from_words(words)
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.index = self.words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(&word.to_lowercase()).copied().unwrap_or(UNK)
    }

    /// Ids for `<root> w1 .. wn <eos>`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(ROOT);
        ids.extend(tokens.iter().map(|t| self.id(t.as_ref())));
        ids.push(EOS);
        ids
    }
}
