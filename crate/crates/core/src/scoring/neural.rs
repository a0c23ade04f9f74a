//! Embedding-based scorer: encoder states feed per-stage projections and
//! biaffine / triaffine forms.

use ndarray::{s, Array2, Axis};
use rand_chacha::ChaCha8Rng;

use crate::num::Scalar;

use super::dense::{augment, strip, Biaffine, Dense, Triaffine};
use super::encoder::{Encoder, EncoderCache};
use super::params::ParamStore;
use super::{LabelScores, ModelConfig, Stage, StageContext, StageScores};
use crate::charts::ScoreSet;

#[derive(Clone, Debug)]
struct StageHeads {
    arc_h: Dense,
    arc_m: Dense,
    arc: Biaffine,
    sib_h: Dense,
    sib_s: Dense,
    sib_m: Dense,
    sib: Triaffine,
    span_h: Dense,
    span_l: Dense,
    span_r: Dense,
    left: Biaffine,
    right: Biaffine,
    lab_h: Dense,
    lab_m: Dense,
    labels: Vec<Biaffine>,
}

impl StageHeads {
    fn new<T: Scalar>(
        p: &mut ParamStore<T>,
        tag: &str,
        tok_dim: usize,
        bnd_dim: usize,
        cfg: &ModelConfig,
        num_labels: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let (pd, sd, ld) = (cfg.proj_dim, cfg.sib_dim, cfg.label_dim);
        let name = |x: &str| format!("{tag}.{x}");
        StageHeads {
            arc_h: Dense::new(p, &name("arc_head"), tok_dim, pd, rng),
            arc_m: Dense::new(p, &name("arc_mod"), tok_dim, pd, rng),
            arc: Biaffine::new(p, &name("arc_w"), pd, pd),
            sib_h: Dense::new(p, &name("sib_head"), tok_dim, sd, rng),
            sib_s: Dense::new(p, &name("sib_sib"), tok_dim, sd, rng),
            sib_m: Dense::new(p, &name("sib_mod"), tok_dim, sd, rng),
            sib: Triaffine::new(p, &name("sib_w"), sd),
            span_h: Dense::new(p, &name("span_head"), tok_dim, pd, rng),
            span_l: Dense::new(p, &name("span_left"), bnd_dim, pd, rng),
            span_r: Dense::new(p, &name("span_right"), bnd_dim, pd, rng),
            left: Biaffine::new(p, &name("left_w"), pd, pd),
            right: Biaffine::new(p, &name("right_w"), pd, pd),
            lab_h: Dense::new(p, &name("label_head"), tok_dim, ld, rng),
            lab_m: Dense::new(p, &name("label_mod"), tok_dim, ld, rng),
            labels: (0..num_labels)
                .map(|a| Biaffine::new(p, &name(&format!("label_w{a}")), ld, ld))
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NeuralScorer {
    pub(crate) encoder: Encoder,
    hidden: usize,
    stage1: StageHeads,
    stage2: StageHeads,
}

/// Stage inputs and head activations kept for backward.
#[derive(Clone, Debug)]
pub struct NeuralStageCache<T> {
    tok: Array2<T>,
    bnd: Array2<T>,
    acts: Vec<Array2<T>>,
}

// indices into NeuralStageCache::acts
const ARC_H: usize = 0;
const ARC_M: usize = 1;
const SIB_H: usize = 2;
const SIB_S: usize = 3;
const SIB_M: usize = 4;
const SPAN_H: usize = 5;
const SPAN_L: usize = 6;
const SPAN_R: usize = 7;
const LAB_H: usize = 8;
const LAB_M: usize = 9;

impl NeuralScorer {
    pub fn new<T: Scalar>(
        p: &mut ParamStore<T>,
        cfg: &ModelConfig,
        vocab_size: usize,
        labels1: usize,
        labels2: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let encoder = Encoder::new(
            cfg.encoder,
            p,
            vocab_size,
            cfg.embed_dim,
            cfg.hidden_dim,
            cfg.rnn_layers,
            rng,
        );
        let d = encoder.output_dim();
        let stage1 = StageHeads::new(p, "s1", d, d, cfg, labels1, rng);
        let stage2 = StageHeads::new(p, "s2", d + 1, d + 2, cfg, labels2, rng);
        NeuralScorer {
            encoder,
            hidden: cfg.hidden_dim,
            stage1,
            stage2,
        }
    }

    fn heads(&self, stage: Stage) -> &StageHeads {
        match stage {
            Stage::Expression => &self.stage1,
            Stage::Role => &self.stage2,
        }
    }

    /// Token rows `0..=n` and boundary rows `0..=n` for one stage.
    fn stage_inputs<T: Scalar>(&self, enc: &EncoderCache<T>, ctx: &StageContext) -> (Array2<T>, Array2<T>) {
        let out = enc.output();
        let npos = out.nrows() - 1;
        let h = self.hidden;
        let tok = out.slice(s![..npos, ..]).to_owned();
        let mut bnd = Array2::zeros((npos, 2 * h));
        bnd.slice_mut(s![.., ..h]).assign(&out.slice(s![..npos, ..h]));
        bnd.slice_mut(s![.., h..]).assign(&out.slice(s![1.., h..]));
        match ctx.stage {
            Stage::Expression => (tok, bnd),
            Stage::Role => {
                let flag = |p: usize| if ctx.in_expression.get(p).copied().unwrap_or(false) { T::one() } else { T::zero() };
                let tcol = Array2::from_shape_fn((npos, 1), |(i, _)| flag(i));
                let bcol = Array2::from_shape_fn((npos, 2), |(i, c)| flag(i + c));
                (
                    ndarray::concatenate![Axis(1), tok, tcol],
                    ndarray::concatenate![Axis(1), bnd, bcol],
                )
            }
        }
    }

    pub fn score<T: Scalar>(
        &self,
        p: &ParamStore<T>,
        enc: &EncoderCache<T>,
        ctx: &StageContext,
    ) -> (StageScores<T>, NeuralStageCache<T>) {
        let heads = self.heads(ctx.stage);
        let (tok, bnd) = self.stage_inputs(enc, ctx);
        let npos = tok.nrows();
        let n = npos - 1;
        let acts = vec![
            heads.arc_h.forward(p, tok.view()),
            heads.arc_m.forward(p, tok.view()),
            heads.sib_h.forward(p, tok.view()),
            heads.sib_s.forward(p, tok.view()),
            heads.sib_m.forward(p, tok.view()),
            heads.span_h.forward(p, tok.view()),
            heads.span_l.forward(p, bnd.view()),
            heads.span_r.forward(p, bnd.view()),
            heads.lab_h.forward(p, tok.view()),
            heads.lab_m.forward(p, tok.view()),
        ];
        let aug: Vec<Array2<T>> = acts.iter().map(|a| augment(a.view())).collect();

        let mut scores = ScoreSet::zeros(n);
        let arc = heads.arc.forward(p, &aug[ARC_H], &aug[ARC_M]);
        scores.arc_table_mut().copy_from_slice(arc.as_slice().expect("contiguous"));
        let sib = heads.sib.forward(p, &aug[SIB_H], &aug[SIB_S], &aug[SIB_M]);
        scores.sib_table_mut().copy_from_slice(&sib);
        let left = heads.left.forward(p, &aug[SPAN_H], &aug[SPAN_L]);
        let right = heads.right.forward(p, &aug[SPAN_H], &aug[SPAN_R]);
        for k in 0..npos {
            for i in 1..npos {
                *scores.span_left_mut(k, i) = left[[k, i - 1]];
            }
            for j in 0..npos {
                *scores.span_right_mut(k, j) = right[[k, j]];
            }
        }

        let nl = heads.labels.len();
        let mut logits = vec![T::zero(); npos * npos * nl];
        for (a, bi) in heads.labels.iter().enumerate() {
            let la = bi.forward(p, &aug[LAB_H], &aug[LAB_M]);
            for h in 0..npos {
                for m in 0..npos {
                    logits[(h * npos + m) * nl + a] = la[[h, m]];
                }
            }
        }
        let labels = LabelScores::from_logits(npos, nl, logits);
        (StageScores { scores, labels }, NeuralStageCache { tok, bnd, acts })
    }

    /// Backward through one stage; accumulates into `d_enc` (shaped like
    /// the encoder output).
    pub fn backward<T: Scalar>(
        &self,
        p: &ParamStore<T>,
        ctx: &StageContext,
        cache: &NeuralStageCache<T>,
        part_w: &ScoreSet<T>,
        label_w: &[T],
        g: &mut ParamStore<T>,
        d_enc: &mut Array2<T>,
    ) {
        let heads = self.heads(ctx.stage);
        let npos = cache.tok.nrows();
        let aug: Vec<Array2<T>> = cache.acts.iter().map(|a| augment(a.view())).collect();
        let mut d_aug: Vec<Array2<T>> = aug.iter().map(|a| Array2::zeros(a.dim())).collect();

        let garc = Array2::from_shape_vec((npos, npos), part_w.arc_table().to_vec()).expect("shape");
        let (dh, dm) = heads.arc.backward(p, &aug[ARC_H], &aug[ARC_M], garc.view(), g);
        d_aug[ARC_H] += &dh;
        d_aug[ARC_M] += &dm;

        if part_w.sib_table().iter().any(|&x| x != T::zero()) {
            let (dh, ds, dm) = heads.sib.backward(p, &aug[SIB_H], &aug[SIB_S], &aug[SIB_M], part_w.sib_table(), g);
            d_aug[SIB_H] += &dh;
            d_aug[SIB_S] += &ds;
            d_aug[SIB_M] += &dm;
        }

        let mut gl = Array2::zeros((npos, npos));
        let mut gr = Array2::zeros((npos, npos));
        for k in 0..npos {
            for i in 1..npos {
                gl[[k, i - 1]] = part_w.span_left(k, i);
            }
            for j in 0..npos {
                gr[[k, j]] = part_w.span_right(k, j);
            }
        }
        let (dk, dl) = heads.left.backward(p, &aug[SPAN_H], &aug[SPAN_L], gl.view(), g);
        d_aug[SPAN_H] += &dk;
        d_aug[SPAN_L] += &dl;
        let (dk, dr) = heads.right.backward(p, &aug[SPAN_H], &aug[SPAN_R], gr.view(), g);
        d_aug[SPAN_H] += &dk;
        d_aug[SPAN_R] += &dr;

        let nl = heads.labels.len();
        if label_w.iter().any(|&x| x != T::zero()) {
            for (a, bi) in heads.labels.iter().enumerate() {
                let ga = Array2::from_shape_fn((npos, npos), |(h, m)| label_w[(h * npos + m) * nl + a]);
                let (dh, dm) = bi.backward(p, &aug[LAB_H], &aug[LAB_M], ga.view(), g);
                d_aug[LAB_H] += &dh;
                d_aug[LAB_M] += &dm;
            }
        }

        let dense = [
            (heads.arc_h, ARC_H, false),
            (heads.arc_m, ARC_M, false),
            (heads.sib_h, SIB_H, false),
            (heads.sib_s, SIB_S, false),
            (heads.sib_m, SIB_M, false),
            (heads.span_h, SPAN_H, false),
            (heads.span_l, SPAN_L, true),
            (heads.span_r, SPAN_R, true),
            (heads.lab_h, LAB_H, false),
            (heads.lab_m, LAB_M, false),
        ];
        let mut d_tok = Array2::zeros(cache.tok.dim());
        let mut d_bnd = Array2::zeros(cache.bnd.dim());
        for (layer, idx, boundary) in dense {
            let dy = strip(std::mem::replace(&mut d_aug[idx], Array2::zeros((0, 1))));
            let (x, dx_acc) = if boundary {
                (&cache.bnd, &mut d_bnd)
            } else {
                (&cache.tok, &mut d_tok)
            };
            let dx = layer.backward(p, x.view(), cache.acts[idx].view(), dy.view(), g);
            *dx_acc += &dx;
        }

        let h = self.hidden;
        let d = 2 * h;
        {
            let mut rows = d_enc.slice_mut(s![..npos, ..]);
            rows += &d_tok.slice(s![.., ..d]);
        }
        {
            let mut fwd = d_enc.slice_mut(s![..npos, ..h]);
            fwd += &d_bnd.slice(s![.., ..h]);
        }
        {
            let mut bwd = d_enc.slice_mut(s![1.., h..]);
            bwd += &d_bnd.slice(s![.., h..d]);
        }
    }
}
