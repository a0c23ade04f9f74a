use log::warn;

use crate::charts::{inside, ChartArena, ChartError, ScoreSet};
use crate::constraints::{build_stage1_mask, build_stage2_mask, group_by_expression, ConstraintMask, LabeledTargets, SentimentTuple};
use crate::labels::LabelSet;
use crate::num::Scalar;
use crate::scoring::{Model, ParamStore, StageContext, StageScores};

use super::TrainError;

/// One observed stage: its conditioning, legality mask and gold arc labels.
#[derive(Clone, Debug)]
pub struct StageTarget {
    pub ctx: StageContext,
    pub mask: ConstraintMask,
    pub targets: LabeledTargets,
}

/// A sentence with its stage-1 target and one stage-2 target per
/// expression.
#[derive(Clone, Debug)]
pub struct TrainingExample {
    pub id: String,
    pub tokens: Vec<String>,
    pub stage1: StageTarget,
    pub stage2: Vec<StageTarget>,
}

impl TrainingExample {
    /// Converts gold tuples. A malformed stage-1 annotation is an error;
    /// a stage-2 instance whose roles overlap is skipped with a warning.
    pub fn build(id: &str, tokens: &[String], tuples: &[SentimentTuple]) -> Result<Self, TrainError> {
        let n = tokens.len();
        if n == 0 {
            return Err(TrainError::Data {
                id: id.to_string(),
                message: "empty sentence".into(),
            });
        }
        let data_err = |e: crate::constraints::ConstraintError| TrainError::Data {
            id: id.to_string(),
            message: e.to_string(),
        };
        let (mask, targets) = build_stage1_mask(n, tuples).map_err(data_err)?;
        let stage1 = StageTarget {
            ctx: StageContext::expression(n),
            mask,
            targets,
        };
        let mut stage2 = Vec::new();
        for inst in group_by_expression(n, tuples).map_err(data_err)? {
            match build_stage2_mask(n, &inst.expression, &inst.holders, &inst.targets) {
                Ok((mask, targets)) => stage2.push(StageTarget {
                    ctx: StageContext::role(n, &inst.expression),
                    mask,
                    targets,
                }),
                Err(e) => warn!("{}: skipping role stage for tuple {}: {}", id, inst.tuple, e),
            }
        }
        Ok(TrainingExample {
            id: id.to_string(),
            tokens: tokens.to_vec(),
            stage1,
            stage2,
        })
    }

    pub fn stages(&self) -> impl Iterator<Item = &StageTarget> {
        std::iter::once(&self.stage1).chain(self.stage2.iter())
    }
}

/// Scores with each annotation-bearing arc raised by its gold label's
/// log-probability.
fn label_augmented<T: Scalar>(scores: &StageScores<T>, target: &StageTarget, labels: &LabelSet) -> ScoreSet<T> {
    let mut aug = scores.scores.clone();
    for &(h, m, l) in target.targets.arcs() {
        let a = labels.index_of(l).expect("gold label in stage label set");
        *aug.arc_mut(h, m) += scores.labels.log_probs(h, m)[a];
    }
    aug
}

fn tolerance<T: Scalar>(log_z: T) -> T {
    T::epsilon().sqrt() * log_z.abs().max(T::one())
}

fn unsatisfiable(id: &str) -> TrainError {
    TrainError::Data {
        id: id.to_string(),
        message: "gold constraints admit no tree".into(),
    }
}

fn check_dominance<T: Scalar>(id: &str, den: T, num: T) -> Result<T, TrainError> {
    let loss = den - num;
    if !loss.is_finite() {
        return Err(TrainError::Divergence { id: id.to_string() });
    }
    if loss < -tolerance(den) {
        return Err(TrainError::Dominance {
            id: id.to_string(),
            numerator: num.as_f64(),
            denominator: den.as_f64(),
        });
    }
    Ok(loss.max(T::zero()))
}

/// Negative log-likelihood of one stage given its scores.
pub fn stage_loss<T: Scalar>(id: &str, scores: &StageScores<T>, target: &StageTarget, labels: &LabelSet) -> Result<T, TrainError> {
    let den = inside(&scores.scores, None).map_err(|e| TrainError::Chart(id.to_string(), e))?;
    let aug = label_augmented(scores, target, labels);
    let num = inside(&aug, Some(&target.mask)).map_err(|e| TrainError::Chart(id.to_string(), e))?;
    if num == T::neg_infinity() {
        return Err(unsatisfiable(id));
    }
    check_dominance(id, den, num)
}

/// Stage loss with its gradient w.r.t. the part scores and the label
/// logits (laid out like [`crate::scoring::LabelScores::raw`]).
pub fn stage_loss_and_weights<T: Scalar>(
    id: &str,
    scores: &StageScores<T>,
    target: &StageTarget,
    labels: &LabelSet,
    arena: &mut ChartArena<T>,
) -> Result<(T, ScoreSet<T>, Vec<T>), TrainError> {
    let chart_err = |e: ChartError| match e {
        ChartError::EmptySupport => unsatisfiable(id),
        e => TrainError::Chart(id.to_string(), e),
    };
    let (den, mu_den) = arena.marginals(&scores.scores, None).map_err(chart_err)?;
    let aug = label_augmented(scores, target, labels);
    let (num, mu_num) = arena.marginals(&aug, Some(&target.mask)).map_err(chart_err)?;
    let loss = check_dominance(id, den, num)?;
    let part_w = mu_den.difference(&mu_num).map_err(chart_err)?;

    let n = scores.scores.n();
    let npos = n + 1;
    let nl = labels.len();
    let mut label_w = vec![T::zero(); npos * npos * nl];
    for &(h, m, l) in target.targets.arcs() {
        let mu = mu_num.arc(h, m);
        if mu == T::zero() {
            continue;
        }
        let gold = labels.index_of(l).expect("gold label in stage label set");
        let lp = scores.labels.log_probs(h, m);
        for a in 0..nl {
            let delta = if a == gold { T::one() } else { T::zero() };
            label_w[(h * npos + m) * nl + a] = -mu * (delta - lp[a].exp());
        }
    }
    Ok((loss, part_w, label_w))
}

/// Joint loss over all stages of one example.
pub fn example_loss<T: Scalar>(model: &Model<T>, ex: &TrainingExample) -> Result<T, TrainError> {
    let enc = model.encode(&ex.tokens).map_err(|e| TrainError::Scoring(ex.id.clone(), e))?;
    let mut total = T::zero();
    for target in ex.stages() {
        let scores = model
            .scores(&enc, &target.ctx)
            .map_err(|e| TrainError::Scoring(ex.id.clone(), e))?;
        total += stage_loss(&ex.id, &scores, target, model.label_set(target.ctx.stage))?;
    }
    Ok(total)
}

/// Joint loss and its exact parameter gradient.
pub fn example_gradient<T: Scalar>(model: &Model<T>, ex: &TrainingExample) -> Result<(T, ParamStore<T>), TrainError> {
    let mut grads = model.params().zeros_like();
    let mut arena = ChartArena::new();
    let loss = accumulate_gradient(model, ex, &mut grads, &mut arena)?;
    Ok((loss, grads))
}

/// Adds the example's gradient into `grads`, reusing `arena`.
pub fn accumulate_gradient<T: Scalar>(
    model: &Model<T>,
    ex: &TrainingExample,
    grads: &mut ParamStore<T>,
    arena: &mut ChartArena<T>,
) -> Result<T, TrainError> {
    let scoring_err = |e| TrainError::Scoring(ex.id.clone(), e);
    let enc = model.encode(&ex.tokens).map_err(scoring_err)?;
    let mut d_enc = model.new_encoder_grad(&enc);
    let mut total = T::zero();
    for target in ex.stages() {
        let (scores, cache) = model.score_stage(&enc, &target.ctx).map_err(scoring_err)?;
        let labels = model.label_set(target.ctx.stage);
        let (loss, part_w, label_w) = stage_loss_and_weights(&ex.id, &scores, target, labels, arena)?;
        total += loss;
        model
            .backward_stage(&enc, &target.ctx, &cache, &part_w, &label_w, grads, &mut d_enc)
            .map_err(scoring_err)?;
    }
    model.backward_encoder(&enc, d_enc, grads);
    Ok(total)
}
