//! Sentiment-graph JSON datasets.
//!
//! Each file is an array of `{"sent_id", "text", "opinions"}` objects; every
//! opinion carries `Source`, `Target` and `Polar_expression` as a pair of
//! lists (surface strings, `"begin:end"` character offsets) plus a
//! `Polarity` string. Text is tokenized on whitespace.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{normalize_spans, token_set, SentimentTuple, Span};
use crate::labels::Polarity;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON at byte {byte} (line {line}, column {column}): {message}")]
    Json {
        path: PathBuf,
        byte: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("sentence {sent_id}: {message}")]
    Sentence { sent_id: String, message: String },
    #[error("{path}: {message}")]
    Write { path: PathBuf, message: String },
}

fn sentence_err(sent_id: &str, message: impl Into<String>) -> DataError {
    DataError::Sentence {
        sent_id: sent_id.to_string(),
        message: message.into(),
    }
}

/// Whitespace-tokenized sentence with per-token character offsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    /// `(begin, end)` character offsets of each token, end exclusive.
    pub offsets: Vec<(usize, usize)>,
}

impl Sentence {
    pub fn new(id: &str, text: &str) -> Self {
        let mut tokens = Vec::new();
        let mut offsets = Vec::new();
        let mut start = None;
        let mut count = 0;
        for (ci, ch) in text.chars().enumerate() {
            count = ci + 1;
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(ci),
                (true, Some(s)) => {
                    offsets.push((s, ci));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            offsets.push((s, count));
        }
        let chars: Vec<char> = text.chars().collect();
        for &(b, e) in &offsets {
            tokens.push(chars[b..e].iter().collect());
        }
        Sentence {
            id: id.to_string(),
            text: text.to_string(),
            tokens,
            offsets,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens covered by the character range `[begin, end)`, widened to
    /// whole tokens. The flag reports whether widening was needed.
    pub fn snap(&self, begin: usize, end: usize) -> Option<(Span, bool)> {
        let first = self.offsets.iter().position(|&(_, e)| e > begin)?;
        let last = self.offsets.iter().rposition(|&(b, _)| b < end)?;
        if first > last {
            return None;
        }
        let exact = self.offsets[first].0 == begin && self.offsets[last].1 == end;
        Some((Span::new(first, last), !exact))
    }

    /// Character range and surface text of a token span.
    pub fn char_range(&self, span: &Span) -> (usize, usize, String) {
        let b = self.offsets[span.start].0;
        let e = self.offsets[span.end].1;
        (b, e, self.text.chars().skip(b).take(e - b).collect())
    }
}

/// A sentence with its gold (or predicted) tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub sentence: Sentence,
    pub tuples: Vec<SentimentTuple>,
}

/// Surface strings and `"begin:end"` offsets of one role.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRole(pub Vec<String>, pub Vec<String>);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawOpinion {
    #[serde(rename = "Source", default)]
    pub source: RawRole,
    #[serde(rename = "Target", default)]
    pub target: RawRole,
    #[serde(rename = "Polar_expression")]
    pub expression: RawRole,
    #[serde(rename = "Polarity")]
    pub polarity: Option<String>,
    #[serde(rename = "Intensity", default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSentence {
    pub sent_id: String,
    pub text: String,
    #[serde(default)]
    pub opinions: Vec<RawOpinion>,
}

/// How to treat offsets that do not fall on token boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Alignment {
    /// Widen to covering tokens and log a warning.
    #[default]
    Snap,
    /// Reject the file.
    Strict,
}

fn parse_offset(sent_id: &str, s: &str) -> Result<(usize, usize), DataError> {
    let bad = || sentence_err(sent_id, format!("malformed offset '{s}'"));
    let (b, e) = s.split_once(':').ok_or_else(bad)?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    let e: usize = e.trim().parse().map_err(|_| bad())?;
    if b >= e {
        return Err(bad());
    }
    Ok((b, e))
}

fn convert_role(sent: &Sentence, role: &RawRole, name: &str, align: Alignment) -> Result<Vec<Span>, DataError> {
    if role.0.len() != role.1.len() {
        return Err(sentence_err(
            &sent.id,
            format!("{name}: {} strings but {} offsets", role.0.len(), role.1.len()),
        ));
    }
    let mut spans = Vec::new();
    for off in &role.1 {
        let (b, e) = parse_offset(&sent.id, off)?;
        let (span, widened) = sent
            .snap(b, e)
            .ok_or_else(|| sentence_err(&sent.id, format!("{name} offset {off} covers no token")))?;
        if widened {
            match align {
                Alignment::Strict => {
                    return Err(sentence_err(&sent.id, format!("{name} offset {off} is not on token boundaries")))
                }
                Alignment::Snap => warn!("{}: {name} offset {off} snapped to token boundaries", sent.id),
            }
        }
        spans.push(span);
    }
    Ok(normalize_spans(&spans))
}

/// Converts one raw record.
pub fn convert(raw: &RawSentence, align: Alignment) -> Result<Example, DataError> {
    let sentence = Sentence::new(&raw.sent_id, &raw.text);
    let mut tuples = Vec::new();
    for op in &raw.opinions {
        let expression = convert_role(&sentence, &op.expression, "Polar_expression", align)?;
        if expression.is_empty() {
            return Err(sentence_err(&raw.sent_id, "opinion without a polar expression"));
        }
        let polarity = match &op.polarity {
            Some(p) => p.parse::<Polarity>().map_err(|e| sentence_err(&raw.sent_id, e))?,
            None => return Err(sentence_err(&raw.sent_id, "opinion without a polarity")),
        };
        tuples.push(SentimentTuple::new(
            convert_role(&sentence, &op.source, "Source", align)?,
            convert_role(&sentence, &op.target, "Target", align)?,
            expression,
            polarity,
        ));
    }
    Ok(Example { sentence, tuples })
}

fn role_to_raw(sent: &Sentence, spans: &[Span]) -> RawRole {
    let mut role = RawRole::default();
    for s in spans {
        let (b, e, text) = sent.char_range(s);
        role.0.push(text);
        role.1.push(format!("{b}:{e}"));
    }
    role
}

/// Inverse of [`convert`], with offsets rebuilt from token indices.
pub fn to_raw(ex: &Example) -> RawSentence {
    let s = &ex.sentence;
    RawSentence {
        sent_id: s.id.clone(),
        text: s.text.clone(),
        opinions: ex
            .tuples
            .iter()
            .map(|t| RawOpinion {
                source: role_to_raw(s, &t.holder),
                target: role_to_raw(s, &t.target),
                expression: role_to_raw(s, &t.expression),
                polarity: Some(t.polarity.to_string()),
                intensity: None,
            })
            .collect(),
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut off = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return off + column.saturating_sub(1).min(l.len());
        }
        off += l.len();
    }
    text.len()
}

/// Parses a dataset held in memory; `path` only labels errors.
pub fn parse_dataset(text: &str, path: &Path, align: Alignment) -> Result<Vec<Example>, DataError> {
    let raw: Vec<RawSentence> = serde_json::from_str(text).map_err(|e| DataError::Json {
        path: path.to_path_buf(),
        byte: byte_offset(text, e.line(), e.column()),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    raw.iter().map(|r| convert(r, align)).collect()
}

pub fn load_dataset(path: &Path, align: Alignment) -> Result<Vec<Example>, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_dataset(&text, path, align)
}

pub fn to_json(examples: &[Example]) -> String {
    let raw: Vec<RawSentence> = examples.iter().map(to_raw).collect();
    serde_json::to_string_pretty(&raw).expect("dataset serializes")
}

pub fn save_dataset(path: &Path, examples: &[Example]) -> Result<(), DataError> {
    fs::write(path, to_json(examples)).map_err(|e| DataError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Length statistics of one role.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoleStats {
    /// Number of non-empty role instances.
    pub count: usize,
    /// Fraction of instances spanning four or more tokens.
    pub fraction_ge4: Option<f64>,
    pub max_len: Option<usize>,
    /// `histogram[k]` counts instances of token length `k`.
    pub histogram: Vec<usize>,
}

impl RoleStats {
    fn from_lengths(lengths: &[usize]) -> Self {
        let max_len = lengths.iter().copied().max();
        let mut histogram = vec![0; max_len.map_or(0, |m| m + 1)];
        for &l in lengths {
            histogram[l] += 1;
        }
        let long = lengths.iter().filter(|&&l| l >= 4).count();
        RoleStats {
            count: lengths.len(),
            fraction_ge4: (!lengths.is_empty()).then(|| long as f64 / lengths.len() as f64),
            max_len,
            histogram,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetStats {
    pub sentences: usize,
    pub tuples: usize,
    pub holder: RoleStats,
    pub target: RoleStats,
    pub expression: RoleStats,
}

/// Per-role span-length statistics. A role's length is its token count
/// over all segments; absent roles are not counted.
pub fn dataset_stats(examples: &[Example]) -> DatasetStats {
    let lengths = |f: fn(&SentimentTuple) -> &Vec<Span>| -> Vec<usize> {
        examples
            .iter()
            .flat_map(|e| e.tuples.iter())
            .map(|t| token_set(f(t)).len())
            .filter(|&l| l > 0)
            .collect()
    };
    DatasetStats {
        sentences: examples.len(),
        tuples: examples.iter().map(|e| e.tuples.len()).sum(),
        holder: RoleStats::from_lengths(&lengths(|t| &t.holder)),
        target: RoleStats::from_lengths(&lengths(|t| &t.target)),
        expression: RoleStats::from_lengths(&lengths(|t| &t.expression)),
    }
}

/// Token set of a role across all tuples of a sentence.
pub fn role_tokens(tuples: &[SentimentTuple], f: fn(&SentimentTuple) -> &Vec<Span>) -> BTreeSet<usize> {
    tuples.iter().flat_map(|t| token_set(f(t))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_with_char_offsets() {
        let s = Sentence::new("x", "  héllo  wörld x");
        assert_eq!(s.tokens, vec!["héllo", "wörld", "x"]);
        assert_eq!(s.offsets, vec![(2, 7), (9, 14), (15, 16)]);
    }

    #[test]
    fn fencepost_offset() {
        let s = Sentence::new("x", "a b c");
        assert_eq!(s.snap(2, 3), Some((Span::new(1, 1), false)));
        assert_eq!(s.snap(3, 5), Some((Span::new(2, 2), true)));
        assert_eq!(s.snap(1, 2), None);
    }

    #[test]
    fn json_error_reports_byte() {
        let text = "[\n {\"sent_id\": 1}\n]";
        match parse_dataset(text, Path::new("f.json"), Alignment::Snap) {
            Err(DataError::Json { byte, line, .. }) => {
                assert_eq!(line, 2);
                assert!(byte > 2 && byte <= text.len());
            }
            other => panic!("{other:?}"),
        }
    }
}
