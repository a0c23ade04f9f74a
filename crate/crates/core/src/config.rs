//! Flat `key = value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default; unknown or repeated keys are errors.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `scorer` | `neural` | `neural` or `sparse` |
//! | `encoder` | `birnn` | `birnn` or `window` (neural scorer only) |
//! | `embed_dim` | 50 | word embedding width |
//! | `hidden_dim` | 64 | encoder state width per direction |
//! | `proj_dim` | 64 | arc / span projection width |
//! | `sib_dim` | 16 | sibling projection width |
//! | `label_dim` | 32 | label projection width |
//! | `rnn_layers` | 2 | stacked recurrent layers |
//! | `sparse_bits` | 20 | log2 of the hashed feature table size |
//! | `seed` | 1 | initialization and shuffling seed |
//! | `epochs` | 60 | training epochs |
//! | `batch_size` | 32 | sentences per update |
//! | `lr` | 0.001 | learning rate |
//! | `beta1` | 0.9 | first-moment decay |
//! | `beta2` | 0.999 | second-moment decay |
//! | `adam_eps` | 1e-8 | denominator guard |
//! | `clip` | 5.0 | global gradient-norm clip (0 disables) |
//! | `min_word_count` | 2 | rarer training words map to the unknown id |
//! | `workers` | 0 | gradient/eval threads (0 = all cores) |

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scoring::{EncoderKind, ModelConfig, ScorerKind};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Invalid { key: String, value: String, reason: String },
}

/// Model architecture plus optimization settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub clip: f64,
    pub min_word_count: usize,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            epochs: 60,
            batch_size: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip: 5.0,
            min_word_count: 2,
            workers: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "scorer",
    "encoder",
    "embed_dim",
    "hidden_dim",
    "proj_dim",
    "sib_dim",
    "label_dim",
    "rnn_layers",
    "sparse_bits",
    "seed",
    "epochs",
    "batch_size",
    "lr",
    "beta1",
    "beta2",
    "adam_eps",
    "clip",
    "min_word_count",
    "workers",
];

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V, ConfigError>
where
    V::Err: fmt::Display,
{
    value.parse().map_err(|e: V::Err| ConfigError::Invalid {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

impl TrainConfig {
    /// Parses the whole text; keys not mentioned keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = TrainConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (k, v) = l.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey { line, key: k.into() });
            }
            if !seen.insert(k.to_string()) {
                return Err(ConfigError::Duplicate { line, key: k.into() });
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let m = &mut self.model;
        match key {
            "scorer" => {
                m.scorer = match v {
                    "neural" => ScorerKind::Neural,
                    "sparse" => ScorerKind::Sparse,
                    _ => return Err(invalid(key, v, "expected `neural` or `sparse`")),
                }
            }
            "encoder" => {
                m.encoder = match v {
                    "birnn" => EncoderKind::Birnn,
                    "window" => EncoderKind::Window,
                    _ => return Err(invalid(key, v, "expected `birnn` or `window`")),
                }
            }
            "embed_dim" => m.embed_dim = parse(key, v)?,
            "hidden_dim" => m.hidden_dim = parse(key, v)?,
            "proj_dim" => m.proj_dim = parse(key, v)?,
            "sib_dim" => m.sib_dim = parse(key, v)?,
            "label_dim" => m.label_dim = parse(key, v)?,
            "rnn_layers" => m.rnn_layers = parse(key, v)?,
            "sparse_bits" => m.sparse_bits = parse(key, v)?,
            "seed" => m.seed = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "beta1" => self.beta1 = parse(key, v)?,
            "beta2" => self.beta2 = parse(key, v)?,
            "adam_eps" => self.adam_eps = parse(key, v)?,
            "clip" => self.clip = parse(key, v)?,
            "min_word_count" => self.min_word_count = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.into() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        let positive = [
            ("embed_dim", m.embed_dim),
            ("hidden_dim", m.hidden_dim),
            ("proj_dim", m.proj_dim),
            ("sib_dim", m.sib_dim),
            ("label_dim", m.label_dim),
            ("rnn_layers", m.rnn_layers),
            ("batch_size", self.batch_size),
            ("min_word_count", self.min_word_count),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(invalid(k, "0", "must be positive"));
            }
        }
        if !(4..=28).contains(&m.sparse_bits) {
            return Err(invalid("sparse_bits", &m.sparse_bits.to_string(), "must lie in 4..=28"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(invalid("lr", &self.lr.to_string(), "must be finite and non-negative"));
        }
        for (k, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(invalid(k, &b.to_string(), "must lie in [0, 1)"));
            }
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            return Err(invalid("adam_eps", &self.adam_eps.to_string(), "must be positive"));
        }
        if !(self.clip >= 0.0 && self.clip.is_finite()) {
            return Err(invalid("clip", &self.clip.to_string(), "must be finite and non-negative"));
        }
        Ok(())
    }

    /// Renders every key, so that `parse(render())` is the identity.
    pub fn render(&self) -> String {
        let m = &self.model;
        let scorer = match m.scorer {
            ScorerKind::Neural => "neural",
            ScorerKind::Sparse => "sparse",
        };
        let encoder = match m.encoder {
            EncoderKind::Birnn => "birnn",
            EncoderKind::Window => "window",
        };
        format!(
            "scorer = {scorer}\nencoder = {encoder}\nembed_dim = {}\nhidden_dim = {}\nproj_dim = {}\nsib_dim = {}\n\
             label_dim = {}\nrnn_layers = {}\nsparse_bits = {}\nseed = {}\nepochs = {}\nbatch_size = {}\nlr = {:?}\n\
             beta1 = {:?}\nbeta2 = {:?}\nadam_eps = {:?}\nclip = {:?}\nmin_word_count = {}\nworkers = {}\n",
            m.embed_dim,
            m.hidden_dim,
            m.proj_dim,
            m.sib_dim,
            m.label_dim,
            m.rnn_layers,
            m.sparse_bits,
            m.seed,
            self.epochs,
            self.batch_size,
            self.lr,
            self.beta1,
            self.beta2,
            self.adam_eps,
            self.clip,
            self.min_word_count,
            self.workers
        )
    }
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(TrainConfig::parse("# nothing\n\n").unwrap(), TrainConfig::default());
    }

    #[test]
    fn render_round_trips() {
        let mut c = TrainConfig::default();
        c.set("scorer", "sparse").unwrap();
        c.set("lr", "0.05").unwrap();
        c.set("epochs", "7").unwrap();
        assert_eq!(TrainConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn errors() {
        assert_eq!(TrainConfig::parse("bogus = 1"), Err(ConfigError::UnknownKey { line: 1, key: "bogus".into() }));
        assert_eq!(TrainConfig::parse("\nlr 3"), Err(ConfigError::Syntax { line: 2 }));
        assert!(matches!(TrainConfig::parse("epochs = -1"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(TrainConfig::parse("lr = 1\nlr = 2"), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(TrainConfig::parse("beta1 = 1.0"), Err(ConfigError::Invalid { .. })));
    }
}
