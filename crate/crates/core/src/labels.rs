//! Arc labels and the per-stage label inventories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Sentiment polarity of an opinion expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "Positive",
            Polarity::Negative => "Negative",
            Polarity::Neutral => "Neutral",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" => Ok(Polarity::Positive),
            "negative" | "neg" => Ok(Polarity::Negative),
            "neutral" | "neu" => Ok(Polarity::Neutral),
            _ => Err(format!("unknown polarity '{}'", s.trim())),
        }
    }
}

/// Label carried by a dependency arc.
///
/// `Null` is the empty label used for arcs that bear no annotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArcLabel {
    Null,
    Expression(Polarity),
    Incomplete,
    Holder,
    Target,
}

impl ArcLabel {
    pub fn is_null(self) -> bool {
        self == ArcLabel::Null
    }

    pub fn name(self) -> &'static str {
        match self {
            ArcLabel::Null => "null",
            ArcLabel::Expression(Polarity::Positive) => "exp:positive",
            ArcLabel::Expression(Polarity::Negative) => "exp:negative",
            ArcLabel::Expression(Polarity::Neutral) => "exp:neutral",
            ArcLabel::Incomplete => "exp:incomplete",
            ArcLabel::Holder => "holder",
            ArcLabel::Target => "target",
        }
    }
}

impl fmt::Display for ArcLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArcLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "null" => ArcLabel::Null,
            "exp:positive" => ArcLabel::Expression(Polarity::Positive),
            "exp:negative" => ArcLabel::Expression(Polarity::Negative),
            "exp:neutral" => ArcLabel::Expression(Polarity::Neutral),
            "exp:incomplete" => ArcLabel::Incomplete,
            "holder" => ArcLabel::Holder,
            "target" => ArcLabel::Target,
            other => return Err(format!("unknown arc label '{}'", other)),
        })
    }
}

/// Ordered label inventory for one parsing stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    labels: Vec<ArcLabel>,
}

impl LabelSet {
    pub fn new(labels: Vec<ArcLabel>) -> Self {
        assert!(!labels.is_empty(), "label set must not be empty");
        LabelSet { labels }
    }

    /// Root-attachment labels of the expression stage.
    pub fn expression_stage() -> Self {
        LabelSet::new(vec![
            ArcLabel::Null,
            ArcLabel::Expression(Polarity::Positive),
            ArcLabel::Expression(Polarity::Negative),
            ArcLabel::Expression(Polarity::Neutral),
            ArcLabel::Incomplete,
        ])
    }

    /// Expression-to-role labels of the holder/target stage.
    pub fn role_stage() -> Self {
        LabelSet::new(vec![ArcLabel::Null, ArcLabel::Holder, ArcLabel::Target])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[ArcLabel] {
        &self.labels
    }

    pub fn get(&self, idx: usize) -> ArcLabel {
        self.labels[idx]
    }

    pub fn index_of(&self, label: ArcLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }
}
