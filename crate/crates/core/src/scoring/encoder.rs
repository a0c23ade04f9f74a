//! Contextualizers producing directional states over `<root> x1..xn <eos>`.
//!
//! Both encoders emit a `(n + 2) x 2H` matrix whose rows are `[F_i; B_i]`.
//! Token states are rows `0..=n`; the boundary after position `i` is
//! `[F_i; B_{i+1}]`.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::num::Scalar;

use super::params::{BlockId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Birnn,
    Window,
}

#[derive(Clone, Copy, Debug)]
pub struct RnnDirection {
    w: BlockId,
    u: BlockId,
    b: BlockId,
}

#[derive(Clone, Debug)]
pub enum Encoder {
    Birnn {
        embed: BlockId,
        layers: Vec<(RnnDirection, RnnDirection)>,
        hidden: usize,
    },
    Window {
        embed: BlockId,
        w: BlockId,
        b: BlockId,
        hidden: usize,
    },
}

/// Forward activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct EncoderCache<T> {
    ids: Vec<usize>,
    /// Input matrix of every layer (embeddings first).
    inputs: Vec<Array2<T>>,
    /// Per layer `(forward states, backward states)`.
    states: Vec<(Array2<T>, Array2<T>)>,
    output: Array2<T>,
}

impl<T: Scalar> EncoderCache<T> {
    /// `(n + 2) x 2H` rows `[F_i; B_i]`.
    pub fn output(&self) -> &Array2<T> {
        &self.output
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }
}

impl Encoder {
    pub fn new<T: Scalar>(
        kind: EncoderKind,
        p: &mut ParamStore<T>,
        vocab_size: usize,
        embed_dim: usize,
        hidden: usize,
        layers: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let embed = p.add_uniform("embed", &[vocab_size, embed_dim], 0.5, rng);
        match kind {
            EncoderKind::Birnn => {
                let mut out = Vec::new();
                let mut input = embed_dim;
                for l in 0..layers.max(1) {
                    let mut dir = |tag: &str, p: &mut ParamStore<T>| RnnDirection {
                        w: p.add_glorot(&format!("rnn{l}.{tag}.w"), &[hidden, input], rng),
                        u: p.add_glorot(&format!("rnn{l}.{tag}.u"), &[hidden, hidden], rng),
                        b: p.add_zeros(&format!("rnn{l}.{tag}.b"), &[hidden]),
                    };
                    let f = dir("fwd", p);
                    let b = dir("bwd", p);
                    out.push((f, b));
                    input = 2 * hidden;
                }
                Encoder::Birnn {
                    embed,
                    layers: out,
                    hidden,
                }
            }
            EncoderKind::Window => Encoder::Window {
                embed,
                w: p.add_glorot("window.w", &[2 * hidden, 3 * embed_dim], rng),
                b: p.add_zeros("window.b", &[2 * hidden]),
                hidden,
            },
        }
    }

    /// Width of `[F_i; B_i]`.
    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::Birnn { hidden, .. } | Encoder::Window { hidden, .. } => 2 * hidden,
        }
    }

    fn embed_rows<T: Scalar>(p: &ParamStore<T>, embed: BlockId, ids: &[usize]) -> Array2<T> {
        let table = p.view2(embed);
        let mut x = Array2::zeros((ids.len(), table.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            x.row_mut(r).assign(&table.row(id));
        }
        x
    }

    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, ids: &[usize]) -> EncoderCache<T> {
        match self {
            Encoder::Birnn { embed, layers, .. } => {
                let mut inputs = vec![Self::embed_rows(p, *embed, ids)];
                let mut states = Vec::new();
                for (f, b) in layers {
                    let x = inputs.last().unwrap();
                    let fs = run_direction(p, f, x.view(), false);
                    let bs = run_direction(p, b, x.view(), true);
                    let next = concatenate![Axis(1), fs, bs];
                    states.push((fs, bs));
                    inputs.push(next);
                }
                let output = inputs.pop().unwrap();
                EncoderCache {
                    ids: ids.to_vec(),
                    inputs,
                    states,
                    output,
                }
            }
            Encoder::Window { embed, w, b, .. } => {
                let x = Self::embed_rows(p, *embed, ids);
                let win = window_inputs(x.view());
                let mut z = win.dot(&p.view2(*w).t());
                z += &p.view2(*b).row(0);
                z.mapv_inplace(|v| v.tanh());
                EncoderCache {
                    ids: ids.to_vec(),
                    inputs: vec![x, win],
                    states: Vec::new(),
                    output: z,
                }
            }
        }
    }

    /// Accumulates gradients given `dL/d output`.
    pub fn backward<T: Scalar>(
        &self,
        p: &ParamStore<T>,
        cache: &EncoderCache<T>,
        d_output: Array2<T>,
        g: &mut ParamStore<T>,
    ) {
        let (embed, d_embed_rows) = match self {
            Encoder::Birnn { embed, layers, hidden } => {
                let mut d = d_output;
                for (l, (f, b)) in layers.iter().enumerate().rev() {
                    let x = &cache.inputs[l];
                    let (fs, bs) = &cache.states[l];
                    let df = d.slice(s![.., ..*hidden]).to_owned();
                    let db = d.slice(s![.., *hidden..]).to_owned();
                    let mut dx = backprop_direction(p, f, x.view(), fs, df, false, g);
                    dx += &backprop_direction(p, b, x.view(), bs, db, true, g);
                    d = dx;
                }
                (*embed, d)
            }
            Encoder::Window { embed, w, b, .. } => {
                let win = &cache.inputs[1];
                let mut dz = d_output;
                dz.zip_mut_with(&cache.output, |d, &y| *d *= T::one() - y * y);
                {
                    let mut gw = g.view2_mut(*w);
                    gw += &dz.t().dot(win);
                }
                {
                    let mut gb = g.view2_mut(*b);
                    let mut row = gb.row_mut(0);
                    row += &dz.sum_axis(Axis(0));
                }
                let dwin = dz.dot(&p.view2(*w));
                let e = cache.inputs[0].ncols();
                let len = cache.ids.len();
                let mut dx = Array2::zeros((len, e));
                for t in 0..len {
                    for (slot, off) in [(0usize, -1isize), (1, 0), (2, 1)] {
                        let src = t as isize + off;
                        if src >= 0 && (src as usize) < len {
                            let mut row = dx.row_mut(src as usize);
                            row += &dwin.slice(s![t, slot * e..(slot + 1) * e]);
                        }
                    }
                }
                (*embed, dx)
            }
        };
        let mut ge = g.view2_mut(embed);
        for (r, &id) in cache.ids.iter().enumerate() {
            let mut row = ge.row_mut(id);
            row += &d_embed_rows.row(r);
        }
    }
}

fn window_inputs<T: Scalar>(x: ArrayView2<'_, T>) -> Array2<T> {
    let (len, e) = x.dim();
    let mut win = Array2::zeros((len, 3 * e));
    for t in 0..len {
        if t > 0 {
            win.slice_mut(s![t, ..e]).assign(&x.row(t - 1));
        }
        win.slice_mut(s![t, e..2 * e]).assign(&x.row(t));
        if t + 1 < len {
            win.slice_mut(s![t, 2 * e..]).assign(&x.row(t + 1));
        }
    }
    win
}

fn run_direction<T: Scalar>(p: &ParamStore<T>, d: &RnnDirection, x: ArrayView2<'_, T>, reverse: bool) -> Array2<T> {
    let w = p.view2(d.w);
    let u = p.view2(d.u);
    let b = p.view2(d.b);
    let len = x.nrows();
    let hidden = w.nrows();
    let wx = x.dot(&w.t());
    let mut out = Array2::zeros((len, hidden));
    let mut prev = Array1::zeros(hidden);
    for step in 0..len {
        let t = if reverse { len - 1 - step } else { step };
        let mut z = wx.row(t).to_owned() + u.dot(&prev) + b.row(0);
        z.mapv_inplace(|v| v.tanh());
        out.row_mut(t).assign(&z);
        prev = z;
    }
    out
}

fn backprop_direction<T: Scalar>(
    p: &ParamStore<T>,
    d: &RnnDirection,
    x: ArrayView2<'_, T>,
    states: &Array2<T>,
    d_states: Array2<T>,
    reverse: bool,
    g: &mut ParamStore<T>,
) -> Array2<T> {
    let u = p.view2(d.u);
    let len = x.nrows();
    let hidden = states.ncols();
    let mut dz_all = Array2::zeros((len, hidden));
    let mut carry = Array1::<T>::zeros(hidden);
    for step in (0..len).rev() {
        let t = if reverse { len - 1 - step } else { step };
        let mut dz = d_states.row(t).to_owned() + &carry;
        dz.zip_mut_with(&states.row(t), |v, &h| *v *= T::one() - h * h);
        carry = u.t().dot(&dz);
        dz_all.row_mut(t).assign(&dz);
    }
    // previous state for every t (zeros at the sequence start)
    let mut prev = Array2::zeros((len, hidden));
    for t in 0..len {
        let src = if reverse { t + 1 } else { t.wrapping_sub(1) };
        if src < len {
            prev.row_mut(t).assign(&states.row(src));
        }
    }
    {
        let mut gw = g.view2_mut(d.w);
        gw += &dz_all.t().dot(&x);
    }
    {
        let mut gu = g.view2_mut(d.u);
        gu += &dz_all.t().dot(&prev);
    }
    {
        let mut gb = g.view2_mut(d.b);
        let mut row = gb.row_mut(0);
        row += &dz_all.sum_axis(Axis(0));
    }
    dz_all.dot(&p.view2(d.w))
}
