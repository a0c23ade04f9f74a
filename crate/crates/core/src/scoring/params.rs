use ndarray::{ArrayView2, ArrayViewMut2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::num::Scalar;

use super::ScoringError;

/// Handle to a named block inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Block<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Flat collection of named, shaped parameter blocks.
///
/// The same structure holds parameters, gradients and optimizer moments;
/// [`ParamStore::zeros_like`] gives a gradient buffer with identical layout.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore<T> {
    blocks: Vec<Block<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { blocks: Vec::new() }
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> BlockId {
        let len = shape.iter().product();
        self.push(name, shape, vec![T::zero(); len])
    }

    /// Uniform initialization in `±sqrt(6 / (fan_in + fan_out))` using the
    /// last two dimensions as fans.
    pub fn add_glorot(&mut self, name: &str, shape: &[usize], rng: &mut ChaCha8Rng) -> BlockId {
        let len: usize = shape.iter().product();
        let fan_out = shape.first().copied().unwrap_or(1);
        let fan_in = shape.last().copied().unwrap_or(1);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..len).map(|_| T::lit(rng.gen_range(-bound..bound))).collect();
        self.push(name, shape, data)
    }

    pub fn add_uniform(&mut self, name: &str, shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> BlockId {
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| T::lit(rng.gen_range(-bound..bound))).collect();
        self.push(name, shape, data)
    }

    fn push(&mut self, name: &str, shape: &[usize], data: Vec<T>) -> BlockId {
        debug_assert!(self.blocks.iter().all(|b| b.name != name), "duplicate block {name}");
        self.blocks.push(Block {
            name: name.to_string(),
            shape: shape.to_vec(),
            data,
        });
        BlockId(self.blocks.len() - 1)
    }

    pub fn blocks(&self) -> &[Block<T>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block<T>] {
        &mut self.blocks
    }

    pub fn find(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    #[inline]
    pub fn get(&self, id: BlockId) -> &[T] {
        &self.blocks[id.0].data
    }

    #[inline]
    pub fn get_mut(&mut self, id: BlockId) -> &mut [T] {
        &mut self.blocks[id.0].data
    }

    pub fn shape(&self, id: BlockId) -> &[usize] {
        &self.blocks[id.0].shape
    }

    /// Two-dimensional view; one-dimensional blocks become a single row.
    pub fn view2(&self, id: BlockId) -> ArrayView2<'_, T> {
        let b = &self.blocks[id.0];
        let (r, c) = rows_cols(&b.shape);
        ArrayView2::from_shape((r, c), &b.data).expect("block shape")
    }

    pub fn view2_mut(&mut self, id: BlockId) -> ArrayViewMut2<'_, T> {
        let b = &mut self.blocks[id.0];
        let (r, c) = rows_cols(&b.shape);
        ArrayViewMut2::from_shape((r, c), &mut b.data).expect("block shape")
    }

    pub fn zeros_like(&self) -> Self {
        ParamStore {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    name: b.name.clone(),
                    shape: b.shape.clone(),
                    data: vec![T::zero(); b.data.len()],
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fill_zero(&mut self) {
        for b in &mut self.blocks {
            b.data.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    fn check_layout(&self, other: &Self) -> Result<(), ScoringError> {
        let same = self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape);
        if same {
            Ok(())
        } else {
            Err(ScoringError::Shape("parameter layouts differ".into()))
        }
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: T, other: &Self) -> Result<(), ScoringError> {
        self.check_layout(other)?;
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for b in &mut self.blocks {
            b.data.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn l2_norm(&self) -> T {
        self.blocks
            .iter()
            .flat_map(|b| b.data.iter())
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.data.iter().all(|x| x.is_finite()))
    }

    /// Iterates `(block index, flat index)` over every scalar.
    pub fn coordinates(&self) -> impl Iterator<Item = (BlockId, usize)> + '_ {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(i, b)| (0..b.data.len()).map(move |k| (BlockId(i), k)))
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    name: b.name.clone(),
                    shape: b.shape.clone(),
                    data: b.data.iter().map(|x| U::lit(x.as_f64())).collect(),
                })
                .collect(),
        }
    }
}

fn rows_cols(shape: &[usize]) -> (usize, usize) {
    match shape {
        [] => (1, 1),
        [c] => (1, *c),
        [r, rest @ ..] => (*r, rest.iter().product()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn axpy_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = ParamStore::<f64>::new();
        let a = p.add_glorot("a", &[2, 3], &mut rng);
        p.add_zeros("b", &[4]);
        let mut g = p.zeros_like();
        g.get_mut(a)[1] = 2.0;
        let before = p.get(a)[1];
        p.axpy(0.5, &g).unwrap();
        assert_eq!(p.get(a)[1], before + 1.0);
        assert_eq!(g.l2_norm(), 2.0);
        assert_eq!(p.view2(a).dim(), (2, 3));
        assert_eq!(p.coordinates().count(), 10);
    }

    #[test]
    fn mismatched_layouts_are_rejected() {
        let mut p = ParamStore::<f64>::new();
        p.add_zeros("a", &[2]);
        let mut q = ParamStore::<f64>::new();
        q.add_zeros("a", &[3]);
        assert!(p.axpy(1.0, &q).is_err());
    }
}
