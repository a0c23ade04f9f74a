//! Projection, biaffine and triaffine layers with explicit backward passes.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;

use crate::num::Scalar;

use super::params::{BlockId, ParamStore};

/// `x -> tanh(x W^T + b)` applied row-wise.
#[derive(Clone, Copy, Debug)]
pub struct Dense {
    pub w: BlockId,
    pub b: BlockId,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new<T: Scalar>(p: &mut ParamStore<T>, name: &str, input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = p.add_glorot(&format!("{name}.w"), &[output, input], rng);
        let b = p.add_zeros(&format!("{name}.b"), &[output]);
        Dense { w, b, input, output }
    }

    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, x: ArrayView2<'_, T>) -> Array2<T> {
        let mut z = x.dot(&p.view2(self.w).t());
        let b = p.view2(self.b);
        z += &b.row(0);
        z.mapv_inplace(|v| v.tanh());
        z
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward<T: Scalar>(
        &self,
        p: &ParamStore<T>,
        x: ArrayView2<'_, T>,
        y: ArrayView2<'_, T>,
        dy: ArrayView2<'_, T>,
        g: &mut ParamStore<T>,
    ) -> Array2<T> {
        let mut dz = dy.to_owned();
        dz.zip_mut_with(&y, |d, &yv| *d *= T::one() - yv * yv);
        {
            let mut gw = g.view2_mut(self.w);
            gw += &dz.t().dot(&x);
        }
        {
            let mut gb = g.view2_mut(self.b);
            let sums = dz.sum_axis(Axis(0));
            let mut row = gb.row_mut(0);
            row += &sums;
        }
        dz.dot(&p.view2(self.w))
    }
}

/// Appends a constant-1 column.
pub fn augment<T: Scalar>(x: ArrayView2<'_, T>) -> Array2<T> {
    let (r, c) = x.dim();
    let mut out = Array2::from_elem((r, c + 1), T::one());
    out.slice_mut(s![.., ..c]).assign(&x);
    out
}

/// Drops the constant column again (for gradients w.r.t. augmented inputs).
pub fn strip<T: Scalar>(x: Array2<T>) -> Array2<T> {
    let c = x.ncols();
    x.slice(s![.., ..c - 1]).to_owned()
}

/// `S = X~ W Y~^T` with bias-augmented inputs.
#[derive(Clone, Copy, Debug)]
pub struct Biaffine {
    pub w: BlockId,
}

impl Biaffine {
    pub fn new<T: Scalar>(p: &mut ParamStore<T>, name: &str, left: usize, right: usize) -> Self {
        Biaffine {
            w: p.add_zeros(name, &[left + 1, right + 1]),
        }
    }

    /// `xa`, `ya` already augmented.
    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, xa: &Array2<T>, ya: &Array2<T>) -> Array2<T> {
        xa.dot(&p.view2(self.w)).dot(&ya.t())
    }

    /// Returns gradients w.r.t. the augmented inputs.
    pub fn backward<T: Scalar>(
        &self,
        p: &ParamStore<T>,
        xa: &Array2<T>,
        ya: &Array2<T>,
        gs: ArrayView2<'_, T>,
        g: &mut ParamStore<T>,
    ) -> (Array2<T>, Array2<T>) {
        let w = p.view2(self.w);
        let gy = gs.dot(ya);
        {
            let mut gw = g.view2_mut(self.w);
            gw += &xa.t().dot(&gy);
        }
        let dx = gy.dot(&w.t());
        let dy = gs.t().dot(&xa.dot(&w));
        (dx, dy)
    }
}

/// `T[h, s, m] = sum_ijk W[i, j, k] H~[h, i] S~[s, j] M~[m, k]`.
#[derive(Clone, Copy, Debug)]
pub struct Triaffine {
    pub w: BlockId,
    pub dim: usize,
}

impl Triaffine {
    pub fn new<T: Scalar>(p: &mut ParamStore<T>, name: &str, dim: usize) -> Self {
        let d = dim + 1;
        Triaffine {
            w: p.add_zeros(name, &[d, d, d]),
            dim,
        }
    }

    /// `W` contracted with one middle vector: `A[i, k] = sum_j W[i, j, k] s[j]`.
    fn contract<T: Scalar>(&self, w: &[T], sv: ndarray::ArrayView1<'_, T>) -> Array2<T> {
        let d = self.dim + 1;
        let mut a = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                let sj = sv[j];
                if sj == T::zero() {
                    continue;
                }
                let base = (i * d + j) * d;
                for k in 0..d {
                    a[[i, k]] += w[base + k] * sj;
                }
            }
        }
        a
    }

    /// Dense `W x W x W` tensor flattened as `[(h * W + s) * W + m]`.
    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, ha: &Array2<T>, sa: &Array2<T>, ma: &Array2<T>) -> Vec<T> {
        let w = p.get(self.w);
        let npos = ha.nrows();
        let mut out = vec![T::zero(); npos * npos * npos];
        for s_ in 0..npos {
            let a = self.contract(w, sa.row(s_));
            let t = ha.dot(&a).dot(&ma.t());
            for h in 0..npos {
                for m in 0..npos {
                    out[(h * npos + s_) * npos + m] = t[[h, m]];
                }
            }
        }
        out
    }

    /// Gradients w.r.t. the three augmented inputs given `dL/dT`.
    pub fn backward<T: Scalar>(
        &self,
        p: &ParamStore<T>,
        ha: &Array2<T>,
        sa: &Array2<T>,
        ma: &Array2<T>,
        gt: &[T],
        g: &mut ParamStore<T>,
    ) -> (Array2<T>, Array2<T>, Array2<T>) {
        let w = p.get(self.w);
        let d = self.dim + 1;
        let npos = ha.nrows();
        let mut dh = Array2::zeros(ha.dim());
        let mut ds = Array2::zeros(sa.dim());
        let mut dm = Array2::zeros(ma.dim());
        let mut gw = vec![T::zero(); d * d * d];
        let mut gs_mat = Array2::zeros((npos, npos));
        for s_ in 0..npos {
            let mut any = false;
            for h in 0..npos {
                for m in 0..npos {
                    let v = gt[(h * npos + s_) * npos + m];
                    gs_mat[[h, m]] = v;
                    any |= v != T::zero();
                }
            }
            if !any {
                continue;
            }
            let a = self.contract(w, sa.row(s_));
            // dA = H~^T G M~
            let da = ha.t().dot(&gs_mat).dot(ma);
            dh += &gs_mat.dot(ma).dot(&a.t());
            dm += &gs_mat.t().dot(ha).dot(&a);
            let srow = sa.row(s_);
            for i in 0..d {
                for j in 0..d {
                    let base = (i * d + j) * d;
                    let sj = srow[j];
                    let mut acc = T::zero();
                    for k in 0..d {
                        gw[base + k] += da[[i, k]] * sj;
                        acc += da[[i, k]] * w[base + k];
                    }
                    ds[[s_, j]] += acc;
                }
            }
        }
        for (x, y) in g.get_mut(self.w).iter_mut().zip(gw) {
            *x += y;
        }
        (dh, ds, dm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rand_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
    }

    fn randomize(p: &mut ParamStore<f64>, rng: &mut ChaCha8Rng) {
        for b in p.blocks_mut() {
            for x in &mut b.data {
                *x = rng.gen_range(-1.0..1.0);
            }
        }
    }

    #[test]
    fn biaffine_with_identity_weight_is_inner_product() {
        let mut p = ParamStore::<f64>::new();
        let bi = Biaffine::new(&mut p, "w", 2, 2);
        {
            let w = p.get_mut(bi.w);
            w[0] = 1.0;
            w[4] = 1.0;
        }
        let x = augment(ndarray::array![[1.0, 2.0]].view());
        let y = augment(ndarray::array![[3.0, -1.0]].view());
        assert_eq!(bi.forward(&p, &x, &y)[[0, 0]], 1.0);
    }

    #[test]
    fn triaffine_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = ParamStore::<f64>::new();
        let tri = Triaffine::new(&mut p, "t", 2);
        randomize(&mut p, &mut rng);
        let ha = augment(rand_mat(3, 2, &mut rng).view());
        let sa = augment(rand_mat(3, 2, &mut rng).view());
        let ma = augment(rand_mat(3, 2, &mut rng).view());
        let gt: Vec<f64> = (0..27).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |p: &ParamStore<f64>, ha: &Array2<f64>, sa: &Array2<f64>, ma: &Array2<f64>| -> f64 {
            tri.forward(p, ha, sa, ma).iter().zip(&gt).map(|(a, b)| a * b).sum()
        };
        let mut g = p.zeros_like();
        let (dh, ds, dm) = tri.backward(&p, &ha, &sa, &ma, &gt, &mut g);
        let eps = 1e-6;
        for k in 0..27 {
            let mut q = p.clone();
            q.get_mut(tri.w)[k] += eps;
            let fd = (loss(&q, &ha, &sa, &ma) - loss(&p, &ha, &sa, &ma)) / eps;
            assert!((fd - g.get(tri.w)[k]).abs() < 1e-4);
        }
        for (mat, grad, which) in [(&ha, &dh, 0), (&sa, &ds, 1), (&ma, &dm, 2)] {
            for r in 0..3 {
                for c in 0..3 {
                    let mut m2 = mat.clone();
                    m2[[r, c]] += eps;
                    let v = match which {
                        0 => loss(&p, &m2, &sa, &ma),
                        1 => loss(&p, &ha, &m2, &ma),
                        _ => loss(&p, &ha, &sa, &m2),
                    };
                    let fd = (v - loss(&p, &ha, &sa, &ma)) / eps;
                    assert!((fd - grad[[r, c]]).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn dense_and_biaffine_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = ParamStore::<f64>::new();
        let dense = Dense::new(&mut p, "d", 3, 2, &mut rng);
        let bi = Biaffine::new(&mut p, "b", 2, 2);
        randomize(&mut p, &mut rng);
        let x = rand_mat(4, 3, &mut rng);
        let gs = rand_mat(4, 4, &mut rng);
        let loss = |p: &ParamStore<f64>, x: &Array2<f64>| -> f64 {
            let y = augment(dense.forward(p, x.view()).view());
            (&bi.forward(p, &y, &y) * &gs).sum()
        };
        let mut g = p.zeros_like();
        let y = dense.forward(&p, x.view());
        let ya = augment(y.view());
        let (dx1, dx2) = bi.backward(&p, &ya, &ya, gs.view(), &mut g);
        let dy = strip(dx1 + dx2);
        let dx = dense.backward(&p, x.view(), y.view(), dy.view(), &mut g);
        let eps = 1e-6;
        for (id, k) in p.coordinates().collect::<Vec<_>>() {
            let mut q = p.clone();
            q.get_mut(id)[k] += eps;
            let fd = (loss(&q, &x) - loss(&p, &x)) / eps;
            assert!((fd - g.get(id)[k]).abs() < 1e-4, "{:?}[{}]", id, k);
        }
        for r in 0..4 {
            for c in 0..3 {
                let mut x2 = x.clone();
                x2[[r, c]] += eps;
                let fd = (loss(&p, &x2) - loss(&p, &x)) / eps;
                assert!((fd - dx[[r, c]]).abs() < 1e-4);
            }
        }
    }
}
