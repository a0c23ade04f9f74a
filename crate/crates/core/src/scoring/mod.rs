//! Scorers mapping a sentence to part scores and arc-label distributions.
//!
//! Two backends share one interface: a neural scorer (embeddings, a
//! recurrent or windowed contextualizer, biaffine/triaffine heads) and a
//! sparse linear scorer over hashed features. Both are differentiated by
//! hand: [`Model::backward_stage`] takes weights shaped like the part
//! tables and the label logits and accumulates exact parameter gradients.

mod dense;
mod encoder;
mod neural;
mod params;
mod sparse;
mod vocab;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charts::ScoreSet;
use crate::constraints::Span;
use crate::labels::LabelSet;
use crate::num::{log_softmax_in_place, Scalar};

pub use dense::{augment, Biaffine, Dense, Triaffine};
pub use encoder::{Encoder, EncoderCache, EncoderKind};
pub use neural::{NeuralScorer, NeuralStageCache};
pub use params::{Block, BlockId, ParamStore};
pub use sparse::{SparseScorer, SparseSentence};
pub use vocab::{Vocab, EOS, ROOT, UNK};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty sentence")]
    EmptySentence,
}

/// Which of the two parsing stages a score table serves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    /// Root-attached expression subtrees.
    Expression = 1,
    /// Holder/target subtrees under one expression.
    Role = 2,
}

/// Per-call conditioning: the stage and, for the role stage, which
/// positions belong to the expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageContext {
    pub stage: Stage,
    /// Indexed by position `0..=n`.
    pub in_expression: Vec<bool>,
}

impl StageContext {
    pub fn expression(n: usize) -> Self {
        StageContext {
            stage: Stage::Expression,
            in_expression: vec![false; n + 1],
        }
    }

    pub fn role(n: usize, expression: &[Span]) -> Self {
        let mut in_expression = vec![false; n + 1];
        for s in expression {
            for t in s.tokens() {
                if t < n {
                    in_expression[t + 1] = true;
                }
            }
        }
        StageContext {
            stage: Stage::Role,
            in_expression,
        }
    }
}

/// Label log-distributions for every ordered position pair.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelScores<T> {
    npos: usize,
    labels: usize,
    logp: Vec<T>,
}

impl<T: Scalar> LabelScores<T> {
    /// Normalizes raw logits laid out as `[(h * npos + m) * labels + a]`.
    pub fn from_logits(npos: usize, labels: usize, mut logits: Vec<T>) -> Self {
        if labels > 0 {
            for chunk in logits.chunks_mut(labels) {
                log_softmax_in_place(chunk);
            }
        }
        LabelScores {
            npos,
            labels,
            logp: logits,
        }
    }

    pub fn num_labels(&self) -> usize {
        self.labels
    }

    pub fn log_probs(&self, h: usize, m: usize) -> &[T] {
        let base = (h * self.npos + m) * self.labels;
        &self.logp[base..base + self.labels]
    }

    /// Most probable label index; ties go to the lower index.
    pub fn argmax(&self, h: usize, m: usize) -> usize {
        let lp = self.log_probs(h, m);
        let mut best = 0;
        for (a, &v) in lp.iter().enumerate() {
            if v > lp[best] {
                best = a;
            }
        }
        best
    }

    pub fn raw(&self) -> &[T] {
        &self.logp
    }
}

/// Everything a stage needs from the scorer.
#[derive(Clone, Debug)]
pub struct StageScores<T> {
    pub scores: ScoreSet<T>,
    pub labels: LabelScores<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Neural,
    Sparse,
}

/// Architecture hyperparameters; stored in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub scorer: ScorerKind,
    pub encoder: EncoderKind,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub proj_dim: usize,
    pub sib_dim: usize,
    pub label_dim: usize,
    pub rnn_layers: usize,
    pub sparse_bits: u32,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            scorer: ScorerKind::Neural,
            encoder: EncoderKind::Birnn,
            embed_dim: 50,
            hidden_dim: 64,
            proj_dim: 64,
            sib_dim: 16,
            label_dim: 32,
            rnn_layers: 2,
            sparse_bits: 20,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
enum Backend {
    Neural(NeuralScorer),
    Sparse(SparseScorer),
}

/// Encoder output or feature context for one sentence.
#[derive(Clone, Debug)]
pub enum Encoded<T> {
    Neural(EncoderCache<T>),
    Sparse(SparseSentence),
}

impl<T: Scalar> Encoded<T> {
    pub fn n(&self) -> usize {
        match self {
            Encoded::Neural(c) => c.ids().len() - 2,
            Encoded::Sparse(s) => s.n(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum StageCache<T> {
    Neural(NeuralStageCache<T>),
    Sparse,
}

/// Gradient flowing back into the encoder output, if the backend has one.
#[derive(Clone, Debug)]
pub struct EncoderGrad<T>(Option<Array2<T>>);

/// Trainable scorer: configuration, vocabulary and parameters.
#[derive(Clone, Debug)]
pub struct Model<T> {
    config: ModelConfig,
    vocab: Vocab,
    params: ParamStore<T>,
    backend: Backend,
    label_sets: [LabelSet; 2],
}

impl<T: Scalar> Model<T> {
    /// Freshly initialized model; initialization is seeded by `config.seed`.
    pub fn new(config: ModelConfig, vocab: Vocab) -> Self {
        let label_sets = [LabelSet::expression_stage(), LabelSet::role_stage()];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let backend = match config.scorer {
            ScorerKind::Neural => Backend::Neural(NeuralScorer::new(
                &mut params,
                &config,
                vocab.len(),
                label_sets[0].len(),
                label_sets[1].len(),
                &mut rng,
            )),
            ScorerKind::Sparse => Backend::Sparse(SparseScorer::new(&mut params, config.sparse_bits)),
        };
        Model {
            config,
            vocab,
            params,
            backend,
            label_sets,
        }
    }

    /// Rebuilds the architecture and installs `params`, which must match
    /// its block layout exactly.
    pub fn from_parts(config: ModelConfig, vocab: Vocab, params: ParamStore<T>) -> Result<Self, ScoringError> {
        let mut model = Self::new(config, vocab);
        let expected = model.params.blocks();
        let found = params.blocks();
        if expected.len() != found.len() {
            return Err(ScoringError::Shape(format!(
                "expected {} parameter blocks, found {}",
                expected.len(),
                found.len()
            )));
        }
        for (e, f) in expected.iter().zip(found) {
            if e.name != f.name || e.shape != f.shape {
                return Err(ScoringError::Shape(format!(
                    "block {} {:?} does not match {} {:?}",
                    f.name, f.shape, e.name, e.shape
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// The hashed-feature backend, when this model uses it.
    pub fn sparse(&self) -> Option<&SparseScorer> {
        match &self.backend {
            Backend::Sparse(sp) => Some(sp),
            Backend::Neural(_) => None,
        }
    }

    pub fn label_set(&self, stage: Stage) -> &LabelSet {
        match stage {
            Stage::Expression => &self.label_sets[0],
            Stage::Role => &self.label_sets[1],
        }
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Encoded<T>, ScoringError> {
        if tokens.is_empty() {
            return Err(ScoringError::EmptySentence);
        }
        Ok(match &self.backend {
            Backend::Neural(nn) => Encoded::Neural(nn.encoder.forward(&self.params, &self.vocab.encode(tokens))),
            Backend::Sparse(_) => Encoded::Sparse(SparseSentence::new(tokens)),
        })
    }

    pub fn score_stage(
        &self,
        enc: &Encoded<T>,
        ctx: &StageContext,
    ) -> Result<(StageScores<T>, StageCache<T>), ScoringError> {
        if ctx.in_expression.len() != enc.n() + 1 {
            return Err(ScoringError::Shape(format!(
                "stage context covers {} positions, sentence has {}",
                ctx.in_expression.len(),
                enc.n() + 1
            )));
        }
        let labels = self.label_set(ctx.stage).len();
        match (&self.backend, enc) {
            (Backend::Neural(nn), Encoded::Neural(cache)) => {
                let (s, c) = nn.score(&self.params, cache, ctx);
                Ok((s, StageCache::Neural(c)))
            }
            (Backend::Sparse(sp), Encoded::Sparse(sent)) => {
                Ok((sp.score(&self.params, sent, ctx, labels), StageCache::Sparse))
            }
            _ => Err(ScoringError::Shape("encoding produced by a different backend".into())),
        }
    }

    /// Scores only, for inference.
    pub fn scores(&self, enc: &Encoded<T>, ctx: &StageContext) -> Result<StageScores<T>, ScoringError> {
        self.score_stage(enc, ctx).map(|(s, _)| s)
    }

    pub fn new_encoder_grad(&self, enc: &Encoded<T>) -> EncoderGrad<T> {
        match enc {
            Encoded::Neural(c) => EncoderGrad(Some(Array2::zeros(c.output().dim()))),
            Encoded::Sparse(_) => EncoderGrad(None),
        }
    }

    /// Accumulates the gradient of `sum(part_w * scores) + sum(label_w *
    /// logits)` into `grads`, and the part flowing into the encoder into
    /// `d_enc`. `label_w` is laid out like [`LabelScores::raw`].
    #[allow(clippy::too_many_arguments)]
    pub fn backward_stage(
        &self,
        enc: &Encoded<T>,
        ctx: &StageContext,
        cache: &StageCache<T>,
        part_w: &ScoreSet<T>,
        label_w: &[T],
        grads: &mut ParamStore<T>,
        d_enc: &mut EncoderGrad<T>,
    ) -> Result<(), ScoringError> {
        let n = enc.n();
        let labels = self.label_set(ctx.stage).len();
        if part_w.n() != n || label_w.len() != (n + 1) * (n + 1) * labels {
            return Err(ScoringError::Shape(format!(
                "weights for n = {} do not fit a sentence of {} tokens",
                part_w.n(),
                n
            )));
        }
        match (&self.backend, enc, cache, d_enc) {
            (Backend::Neural(nn), Encoded::Neural(_), StageCache::Neural(c), EncoderGrad(Some(d))) => {
                nn.backward(&self.params, ctx, c, part_w, label_w, grads, d);
                Ok(())
            }
            (Backend::Sparse(sp), Encoded::Sparse(sent), StageCache::Sparse, _) => {
                sp.backward(sent, ctx, labels, part_w, label_w, grads);
                Ok(())
            }
            _ => Err(ScoringError::Shape("cache produced by a different backend".into())),
        }
    }

    /// Finishes a backward pass by propagating `d_enc` through the encoder.
    pub fn backward_encoder(&self, enc: &Encoded<T>, d_enc: EncoderGrad<T>, grads: &mut ParamStore<T>) {
        if let (Backend::Neural(nn), Encoded::Neural(cache), EncoderGrad(Some(d))) = (&self.backend, enc, d_enc) {
            nn.encoder.backward(&self.params, cache, d, grads);
        }
    }

    /// Same model in another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: self.params.cast(),
            backend: self.backend.clone(),
            label_sets: self.label_sets.clone(),
        }
    }
}
