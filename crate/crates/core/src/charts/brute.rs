use crate::constraints::ConstraintMask;
use crate::num::{LogSumExp, Scalar};

use super::tree::{enumerate_projective_trees, tree_score_unchecked};
use super::{ChartError, DepTree, ScoreSet};

/// Largest sentence the enumeration oracle accepts.
pub const BRUTE_FORCE_MAX_N: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BruteMode {
    Sum,
    Max,
}

#[derive(Clone, Debug)]
pub struct BruteResult<T> {
    pub value: T,
    /// First-enumerated maximizer in [`BruteMode::Max`].
    pub argmax: Option<DepTree>,
    /// Number of admitted trees.
    pub count: usize,
}

/// Exhaustive oracle: scores every admitted projective tree with
/// [`super::tree_score`] and returns their log-sum-exp or maximum.
pub fn brute_force<T: Scalar>(
    scores: &ScoreSet<T>,
    mask: Option<&ConstraintMask>,
    mode: BruteMode,
) -> Result<BruteResult<T>, ChartError> {
    let n = scores.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(ChartError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    if n == 0 {
        return Err(ChartError::EmptySentence);
    }
    if let Some(mk) = mask {
        if mk.n() != n {
            return Err(ChartError::DimensionMismatch {
                expected: n,
                found: mk.n(),
            });
        }
    }
    let mut acc = LogSumExp::new();
    let mut best = T::neg_infinity();
    let mut argmax = None;
    let mut count = 0;
    for heads in enumerate_projective_trees(n) {
        let tree = DepTree::new(heads)?;
        if let Some(mk) = mask {
            if !mk.permits(&tree) {
                continue;
            }
        }
        count += 1;
        let s = tree_score_unchecked(scores, &tree);
        match mode {
            BruteMode::Sum => acc.push(s),
            BruteMode::Max => {
                if s > best {
                    best = s;
                    argmax = Some(tree);
                }
            }
        }
    }
    let value = match mode {
        BruteMode::Sum => acc.value(),
        BruteMode::Max => best,
    };
    Ok(BruteResult { value, argmax, count })
}
