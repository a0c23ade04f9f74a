//! Joint two-stage training: objective, optimizer, checkpoints and the
//! epoch loop.

mod adam;
pub mod checkpoint;
mod objective;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charts::{inside, ChartArena, ChartError, ScoreSet};
use crate::config::TrainConfig;
use crate::data::Example;
use crate::metrics::{evaluate, Report};
use crate::num::Scalar;
use crate::pipeline::predict_dataset;
use crate::scoring::{Model, ParamStore, ScoringError, Vocab};

pub use adam::Adam;
pub use objective::{
    accumulate_gradient, example_gradient, example_loss, stage_loss, stage_loss_and_weights, StageTarget, TrainingExample,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("example {id}: {message}")]
    Data { id: String, message: String },
    #[error("example {id}: loss or gradient is not finite")]
    Divergence { id: String },
    #[error("example {id}: constrained log-partition {numerator} exceeds unconstrained {denominator}")]
    Dominance { id: String, numerator: f64, denominator: f64 },
    #[error("example {0}: {1}")]
    Chart(String, ChartError),
    #[error("example {0}: {1}")]
    Scoring(String, ScoringError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("no usable training examples")]
    EmptyTrainingSet,
}

impl TrainError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TrainError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean per-sentence training loss.
    pub loss: f64,
    pub holder_f1: f64,
    pub target_f1: f64,
    pub expression_f1: f64,
    pub nsf1: f64,
    pub sf1: f64,
    /// Whether this epoch produced the retained checkpoint.
    pub best: bool,
}

impl EpochMetrics {
    fn new(epoch: usize, loss: f64, r: &Report, best: bool) -> Self {
        EpochMetrics {
            epoch,
            loss,
            holder_f1: r.holder.f1,
            target_f1: r.target.f1,
            expression_f1: r.expression.f1,
            nsf1: r.nsf1.f1,
            sf1: r.sf1.f1,
            best,
        }
    }
}

/// Best model and the full per-epoch history.
#[derive(Debug)]
pub struct TrainOutcome<T> {
    pub model: Model<T>,
    pub best_epoch: usize,
    pub best_sf1: f64,
    pub history: Vec<EpochMetrics>,
    /// Training sentences dropped as unusable.
    pub skipped: usize,
}

/// Converts a dataset, dropping (with a warning) sentences whose
/// annotation cannot be expressed as a constraint set.
pub fn build_examples(data: &[Example]) -> (Vec<TrainingExample>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    for ex in data {
        let built = TrainingExample::build(&ex.sentence.id, &ex.sentence.tokens, &ex.tuples).and_then(|t| {
            check_satisfiable(&t)?;
            Ok(t)
        });
        match built {
            Ok(t) => out.push(t),
            Err(e) => {
                warn!("skipping {e}");
                skipped += 1;
            }
        }
    }
    (out, skipped)
}

fn check_satisfiable(ex: &TrainingExample) -> Result<(), TrainError> {
    for st in ex.stages() {
        let z = inside(&ScoreSet::<f64>::zeros(ex.tokens.len()), Some(&st.mask))
            .map_err(|e| TrainError::Chart(ex.id.clone(), e))?;
        if z == f64::NEG_INFINITY {
            return Err(TrainError::Data {
                id: ex.id.clone(),
                message: "gold constraints admit no tree".into(),
            });
        }
    }
    Ok(())
}

/// Evaluates `model` on `data` with the full two-stage decoder.
pub fn evaluate_model<T: Scalar>(model: &Model<T>, data: &[Example], workers: usize) -> Report {
    let tokens: Vec<Vec<String>> = data.iter().map(|e| e.sentence.tokens.clone()).collect();
    let gold: Vec<_> = data.iter().map(|e| e.tuples.clone()).collect();
    let pred = predict_dataset(model, &tokens, workers);
    evaluate(&gold, &pred.tuples()).expect("aligned by construction")
}

/// Gradient of the summed loss over `batch`, reduced in batch order.
fn batch_gradient<T: Scalar>(model: &Model<T>, batch: &[&TrainingExample]) -> Result<(T, ParamStore<T>), TrainError> {
    let parts: Vec<Result<(T, ParamStore<T>), TrainError>> = batch
        .par_iter()
        .map_init(ChartArena::new, |arena, ex| {
            let mut g = model.params().zeros_like();
            let loss = accumulate_gradient(model, ex, &mut g, arena)?;
            if !loss.is_finite() || !g.is_finite() {
                return Err(TrainError::Divergence { id: ex.id.clone() });
            }
            Ok((loss, g))
        })
        .collect();
    let mut total = model.params().zeros_like();
    let mut loss = T::zero();
    for p in parts {
        let (l, g) = p?;
        loss += l;
        total.axpy(T::one(), &g).expect("same layout");
    }
    Ok((loss, total))
}

/// Trains on `train`, selecting the epoch with the highest SF1 on `dev`
/// (on `train` when `dev` is empty). With `out_dir`, writes
/// `metrics.jsonl`, `best.ckpt` and `config.txt` there.
pub fn train<T: Scalar>(train: &[Example], dev: &[Example], config: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome<T>, TrainError> {
    let (examples, skipped) = build_examples(train);
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let vocab = Vocab::build(examples.iter().map(|e| e.tokens.as_slice()), config.min_word_count);
    let mut model = Model::<T>::new(config.model.clone(), vocab);
    train_model(&mut model, &examples, dev, train, config, out_dir).map(|(best, best_epoch, best_sf1, history)| TrainOutcome {
        model: best,
        best_epoch,
        best_sf1,
        history,
        skipped,
    })
}

type LoopResult<T> = (Model<T>, usize, f64, Vec<EpochMetrics>);

fn train_model<T: Scalar>(
    model: &mut Model<T>,
    examples: &[TrainingExample],
    dev: &[Example],
    train_raw: &[Example],
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<LoopResult<T>, TrainError> {
    let eval_set = if dev.is_empty() { train_raw } else { dev };
    let mut log = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
            let cfg_path = dir.join("config.txt");
            fs::write(&cfg_path, config.render()).map_err(|e| TrainError::io(&cfg_path, e))?;
            let path = dir.join("metrics.jsonl");
            let f = File::create(&path).map_err(|e| TrainError::io(&path, e))?;
            Some((BufWriter::new(f), path))
        }
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .expect("thread pool");
    let mut opt = Adam::new(
        model.params(),
        T::lit(config.lr),
        T::lit(config.beta1),
        T::lit(config.beta2),
        T::lit(config.adam_eps),
        T::lit(config.clip),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.model.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut best: Option<(Model<T>, usize, f64)> = None;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&TrainingExample> = chunk.iter().map(|&i| &examples[i]).collect();
            let (loss, mut grads) = pool.install(|| batch_gradient(model, &batch))?;
            epoch_loss += loss.as_f64();
            grads.scale(T::one() / T::lit(batch.len() as f64));
            opt.step(model.params_mut(), &mut grads);
        }
        let report = pool.install(|| evaluate_model(model, eval_set, config.workers));
        let sf1 = report.sf1.f1;
        let improved = best.as_ref().is_none_or(|b| sf1 > b.2);
        if improved {
            if let Some(dir) = out_dir {
                checkpoint::save(&dir.join("best.ckpt"), model, Some(epoch), Some(sf1))?;
            }
            best = Some((model.clone(), epoch, sf1));
        }
        let m = EpochMetrics::new(epoch, epoch_loss / examples.len() as f64, &report, improved);
        info!(
            "epoch {epoch}: loss {:.4} expression {:.3} holder {:.3} target {:.3} NSF1 {:.3} SF1 {:.3}",
            m.loss, m.expression_f1, m.holder_f1, m.target_f1, m.nsf1, m.sf1
        );
        if let Some((w, path)) = log.as_mut() {
            let line = serde_json::to_string(&m).expect("metrics serialize");
            writeln!(w, "{line}")
                .and_then(|_| w.flush())
                .map_err(|e| TrainError::io(path, e))?;
        }
        history.push(m);
    }
    let (best_model, best_epoch, best_sf1) = match best {
        Some(b) => b,
        None => {
            // zero epochs: the initial parameters are the result
            let report = evaluate_model(model, eval_set, config.workers);
            if let Some(dir) = out_dir {
                checkpoint::save(&dir.join("best.ckpt"), model, Some(0), Some(report.sf1.f1))?;
            }
            (model.clone(), 0, report.sf1.f1)
        }
    };
    Ok((best_model, best_epoch, best_sf1, history))
}

/// Continues optimizing an existing model; used where the vocabulary or
/// initial parameters are fixed by the caller.
pub fn train_from<T: Scalar>(
    model: &mut Model<T>,
    train: &[Example],
    dev: &[Example],
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome<T>, TrainError> {
    let (examples, skipped) = build_examples(train);
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let (best, best_epoch, best_sf1, history) = train_model(model, &examples, dev, train, config, out_dir)?;
    Ok(TrainOutcome {
        model: best,
        best_epoch,
        best_sf1,
        history,
        skipped,
    })
}
