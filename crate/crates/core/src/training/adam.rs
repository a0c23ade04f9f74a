use crate::num::Scalar;
use crate::scoring::ParamStore;

/// Adaptive-moment optimizer with bias correction and global-norm clipping.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    /// Global gradient-norm ceiling; zero disables clipping.
    pub clip: T,
    m: ParamStore<T>,
    v: ParamStore<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamStore<T>, lr: T, beta1: T, beta2: T, eps: T, clip: T) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            clip,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// Applies one update; `grads` may be rescaled in place by clipping.
    /// Returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &mut ParamStore<T>) -> T {
        let norm = grads.l2_norm();
        if self.clip > T::zero() && norm > self.clip {
            grads.scale(self.clip / norm);
        }
        self.t += 1;
        if self.lr == T::zero() {
            return norm;
        }
        let c1 = T::one() - self.beta1.powi(self.t);
        let c2 = T::one() - self.beta2.powi(self.t);
        let blocks = params
            .blocks_mut()
            .iter_mut()
            .zip(grads.blocks())
            .zip(self.m.blocks_mut().iter_mut().zip(self.v.blocks_mut().iter_mut()));
        for ((p, g), (m, v)) in blocks {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = self.beta1 * m.data[i] + (T::one() - self.beta1) * gi;
                v.data[i] = self.beta2 * v.data[i] + (T::one() - self.beta2) * gi * gi;
                let mh = m.data[i] / c1;
                let vh = v.data[i] / c2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = ParamStore::<f64>::new();
        let id = p.add_zeros("w", &[3]);
        let mut g = p.zeros_like();
        g.get_mut(id).copy_from_slice(&[2.0, -0.5, 0.0]);
        let mut opt = Adam::new(&p, 0.1, 0.9, 0.999, 1e-8, 0.0);
        opt.step(&mut p, &mut g);
        let w = p.get(id);
        assert!((w[0] + 0.1).abs() < 1e-6);
        assert!((w[1] - 0.1).abs() < 1e-6);
        assert_eq!(w[2], 0.0);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut p = ParamStore::<f64>::new();
        let id = p.add_zeros("w", &[2]);
        let mut g = p.zeros_like();
        g.get_mut(id).copy_from_slice(&[30.0, 40.0]);
        let mut opt = Adam::new(&p, 0.0, 0.9, 0.999, 1e-8, 5.0);
        let norm = opt.step(&mut p, &mut g);
        assert_eq!(norm, 50.0);
        assert!((g.l2_norm() - 5.0).abs() < 1e-12);
        assert_eq!(p.get(id), &[0.0, 0.0]);
    }
}
